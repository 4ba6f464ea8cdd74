//! Radii, round and pulled-back annuli, inverse-branch derivatives.
//!
//! For one stage value `b < -6` the preimage of the closed 2-disk under
//! `z^2 + b` is two components about `+-sqrt(-b)`; their extreme distances
//! from the centres are `r` and `s`. The round annulus `A_k` about
//! `sqrt(-b_k)` with radii `r_k` and `2 sqrt(-b_k) - r_k` separates the two
//! components, and its pull-backs through the univalent inverse branches of
//! `Q_{m, M_k - 1}` give the annuli `B^{k,j}_m`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::compose;
use crate::params::{ParameterSequence, ParamsError};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("stage value b = {0} must be a finite number < -6")]
    BDomain(f64),
    #[error("{what} = {value} is outside its domain")]
    Domain { what: &'static str, value: f64 },
    #[error("branch code has length {given}, expected {expected}")]
    CodeLength { given: usize, expected: usize },
    #[error("start time {m} is past M_{k} - 1 = {last}")]
    StartTime { m: u64, k: usize, last: u64 },
    #[error("stage {k} precedes the first stage {k0} visible from time {m}")]
    StageBeforeStart { k: usize, k0: usize, m: u64 },
    #[error("point {0} is not in the annulus 1/3 < |z| < 3")]
    OutsideDerivativeAnnulus(Complex64),
    #[error("continuation lost continuity at the inverse of P_{time}; sampling too coarse near a critical point")]
    Continuity { time: u64 },
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Relative gap between consecutive boundary samples after refinement.
pub const REFINE_TOLERANCE: f64 = 1e-3;
const INITIAL_SAMPLES: usize = 256;
const MAX_SAMPLES: usize = 1 << 20;
const MIN_ANGLE_STEP: f64 = TAU / (1u64 << 36) as f64;

/// Closed-form radii for one stage value `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Radii {
    /// `sqrt(-b) - sqrt(-b - 2)`: outer extent of the preimage components.
    pub r: f64,
    /// `sqrt(-b + 2) - sqrt(-b)`: inner extent.
    pub s: f64,
    /// `sqrt(-b + 1/2) - sqrt(-b)`.
    pub t: f64,
    /// `sqrt(-b + 1/3) - sqrt(-b)`.
    pub u: f64,
}

// Differences of square roots are evaluated as quotients to avoid
// cancellation: sqrt(x + d) - sqrt(x) = d / (sqrt(x + d) + sqrt(x)).
fn sqrt_gap(x: f64, d: f64) -> f64 {
    d / ((x + d).sqrt() + x.sqrt())
}

pub fn radii(b: f64) -> Result<Radii, GeometryError> {
    if !(b.is_finite() && b < -6.0) {
        return Err(GeometryError::BDomain(b));
    }
    let x = -b;
    Ok(Radii {
        r: sqrt_gap(x - 2.0, 2.0),
        s: sqrt_gap(x, 2.0),
        t: sqrt_gap(x, 0.5),
        u: sqrt_gap(x, 1.0 / 3.0),
    })
}

/// Radius of the disks about `+-sqrt(-b)` that `z^2 + b` maps into the disk
/// of radius `big_r`: `sqrt(-b + R) - sqrt(-b)`.
pub fn forward_image_radius(b: f64, big_r: f64) -> Result<f64, GeometryError> {
    if !(b.is_finite() && b < 0.0) {
        return Err(GeometryError::Domain { what: "b", value: b });
    }
    if !(big_r.is_finite() && big_r >= 0.0) {
        return Err(GeometryError::Domain { what: "R", value: big_r });
    }
    Ok(sqrt_gap(-b, big_r))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundAnnulus {
    pub center: Complex64,
    pub inner: f64,
    pub outer: f64,
}

impl RoundAnnulus {
    /// `ln(outer / inner)`.
    pub fn modulus(&self) -> f64 {
        (self.outer / self.inner).ln()
    }
}

/// `A_k`, centred at `sqrt(-b_k)` with radii `r_k` and `2 sqrt(-b_k) - r_k`.
pub fn annulus_a(seq: &ParameterSequence, k: usize) -> Result<RoundAnnulus, GeometryError> {
    seq.check_stage(k)?;
    let c = seq.root_b(k);
    let r = radii(seq.b(k))?.r;
    Ok(RoundAnnulus {
        center: Complex64::new(c, 0.0),
        inner: r,
        outer: 2.0 * c - r,
    })
}

/// Lower bound `ln(4 sqrt(-b) - 1)` on the modulus of `A_k`.
pub fn annulus_modulus_lower_bound(b: f64) -> f64 {
    (4.0 * (-b).sqrt() - 1.0).ln()
}

/// Choice of square root at each inverse step, in forward time order.
///
/// Bit 0 picks the root with non-negative real part (ties go to the one with
/// non-negative imaginary part), bit 1 its negative.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BranchCode(Vec<bool>);

impl BranchCode {
    pub fn new(bits: Vec<bool>) -> Self {
        BranchCode(bits)
    }

    pub fn zeros(len: usize) -> Self {
        BranchCode(vec![false; len])
    }

    /// Code whose bits spell `index` in binary, most significant first.
    pub fn from_index(index: u64, len: usize) -> Self {
        BranchCode(
            (0..len)
                .map(|i| {
                    let shift = len - 1 - i;
                    shift < 64 && (index >> shift) & 1 == 1
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }
}

impl fmt::Display for BranchCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BranchCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("branch code digit must be 0 or 1, got {other:?}")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BranchCode)
    }
}

/// Square root with non-negative real part, ties to non-negative imaginary.
fn canonical_sqrt(w: Complex64) -> Complex64 {
    let r = w.sqrt();
    if r.re < 0.0 || (r.re == 0.0 && r.im < 0.0) {
        -r
    } else {
        r
    }
}

/// The constants `c_t` of the maps to invert, latest time first, with the
/// matching times.
fn inverse_chain(seq: &ParameterSequence, m: u64, end: u64) -> Vec<(u64, f64)> {
    (m + 1..=end).rev().map(|t| (t, seq.coefficient(t))).collect()
}

/// One sample of a boundary curve followed through every inverse step.
/// `path[0]` is on the round circle, `path[l]` is after `l` inverse steps.
type Path = Vec<Complex64>;

struct Continuation<'a> {
    chain: &'a [(u64, f64)],
    center: Complex64,
    radius: f64,
}

impl Continuation<'_> {
    fn circle(&self, theta: f64) -> Complex64 {
        self.center + Complex64::from_polar(self.radius, theta)
    }

    /// Path of the first sample, roots picked by `pick(level, root)`.
    fn seed(&self, theta: f64, mut pick: impl FnMut(usize, Complex64) -> Complex64) -> Path {
        let mut path = Vec::with_capacity(self.chain.len() + 1);
        let mut w = self.circle(theta);
        path.push(w);
        for (l, &(_, c)) in self.chain.iter().enumerate() {
            w = pick(l, canonical_sqrt(w - c));
            path.push(w);
        }
        path
    }

    /// Path at `theta` continued from a neighbouring path. The flag is false
    /// when some nearest-root choice was not clear-cut.
    fn follow(&self, theta: f64, prev: &Path) -> (Path, bool) {
        self.follow_point(self.circle(theta), prev)
    }

    fn follow_point(&self, start: Complex64, prev: &Path) -> (Path, bool) {
        let mut path = Vec::with_capacity(prev.len());
        let mut w = start;
        path.push(w);
        let mut clear = true;
        for (l, &(_, c)) in self.chain.iter().enumerate() {
            let root = canonical_sqrt(w - c);
            let near_pos = (root - prev[l + 1]).norm_sqr();
            let near_neg = (root + prev[l + 1]).norm_sqr();
            let (chosen, d_near, d_far) = if near_pos <= near_neg {
                (root, near_pos, near_neg)
            } else {
                (-root, near_neg, near_pos)
            };
            // 3 d_near < d_far, squared
            clear &= 9.0 * d_near < d_far;
            w = chosen;
            path.push(w);
        }
        (path, clear)
    }

    /// Continue `path` along the straight segment from its base point to
    /// `target`, bisecting until every nearest-root choice is clear-cut.
    fn continue_along(&self, path: &Path, target: Complex64) -> Result<Path, GeometryError> {
        const STEPS: usize = 64;
        const MAX_DEPTH: u32 = 40;
        let from = path[0];
        let mut current = path.clone();
        let mut s = 0.0f64;
        let mut h = 1.0 / STEPS as f64;
        let mut depth: u32 = 0;
        while s < 1.0 {
            let next = (s + h).min(1.0);
            let point = if next >= 1.0 { target } else { from + (target - from) * next };
            let (p, clear) = self.follow_point(point, &current);
            if clear {
                current = p;
                s = next;
                depth = depth.saturating_sub(1);
                h = (2.0 * h).min(1.0 / STEPS as f64);
            } else {
                depth += 1;
                if depth > MAX_DEPTH {
                    let time = self.chain.first().map_or(0, |c| c.0);
                    return Err(GeometryError::Continuity { time });
                }
                h *= 0.5;
            }
        }
        Ok(current)
    }

    /// Adaptive continuation around the whole circle; returns the final-level
    /// polyline (closed, last point joins the first).
    fn run(&self, first: Path) -> Result<Vec<Complex64>, GeometryError> {
        let levels = self.chain.len() + 1;
        let mut thetas: Vec<f64> = (0..INITIAL_SAMPLES)
            .map(|i| TAU * i as f64 / INITIAL_SAMPLES as f64)
            .collect();

        loop {
            let mut paths: Vec<Path> = Vec::with_capacity(thetas.len());
            let mut clear: Vec<bool> = Vec::with_capacity(thetas.len());
            paths.push(first.clone());
            clear.push(true);
            for &theta in &thetas[1..] {
                let (p, ok) = self.follow(theta, paths.last().unwrap());
                paths.push(p);
                clear.push(ok);
            }

            let scale: Vec<f64> = (0..levels)
                .map(|l| bbox_diagonal(paths.iter().map(|p| p[l])))
                .collect();

            let n = thetas.len();
            let mut refined = Vec::with_capacity(2 * n);
            let mut split_any = false;
            for i in 0..n {
                refined.push(thetas[i]);
                let j = (i + 1) % n;
                let next_theta = if j == 0 { TAU } else { thetas[j] };
                // Wrap-around pair: the last sample must land next to the
                // first on every level, or the branch does not close up.
                let bad_level = (1..levels).find(|&l| {
                    let gap_sqr = (paths[j][l] - paths[i][l]).norm_sqr();
                    let limit = REFINE_TOLERANCE * scale[l];
                    !(gap_sqr <= limit * limit)
                });
                let ambiguous = j != 0 && !clear[j];
                if bad_level.is_some() || ambiguous {
                    let step = next_theta - thetas[i];
                    if step < MIN_ANGLE_STEP {
                        let l = bad_level.unwrap_or(1);
                        return Err(GeometryError::Continuity {
                            time: self.chain[l - 1].0,
                        });
                    }
                    refined.push(thetas[i] + 0.5 * step);
                    split_any = true;
                }
            }
            if !split_any {
                return Ok(paths.into_iter().map(|p| p[levels - 1]).collect());
            }
            if refined.len() > MAX_SAMPLES {
                let l = levels - 1;
                return Err(GeometryError::Continuity {
                    time: self.chain.get(l.saturating_sub(1)).map_or(0, |c| c.0),
                });
            }
            thetas = refined;
        }
    }
}

fn bbox_diagonal(points: impl Iterator<Item = Complex64>) -> f64 {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p.re);
        x1 = x1.max(p.re);
        y0 = y0.min(p.im);
        y1 = y1.max(p.im);
    }
    (x1 - x0).hypot(y1 - y0)
}

/// A component `B^{k,j}_m` of the preimage of `A_k` under `Q_{m, M_k - 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulledBackAnnulus {
    pub stage: usize,
    pub start_time: u64,
    pub code: BranchCode,
    pub inner: Vec<Complex64>,
    pub outer: Vec<Complex64>,
    /// Modulus of `A_k`, preserved by the univalent branch.
    pub modulus: f64,
    /// Largest distance between two samples of the outer boundary.
    pub diameter: f64,
    /// Largest gap between consecutive samples, per boundary.
    pub inner_gap: f64,
    pub outer_gap: f64,
}

impl PulledBackAnnulus {
    /// Number of inverse steps, `M_k - 1 - m`.
    pub fn steps(&self) -> usize {
        self.code.len()
    }
}

fn check_pull_back_args(seq: &ParameterSequence, m: u64, k: usize) -> Result<u64, GeometryError> {
    seq.check_stage(k)?;
    let last = seq.checkpoint(k) - 1;
    if m > last {
        return Err(GeometryError::StartTime { m, k, last });
    }
    Ok(last)
}

/// Number of branches of `Q_{m, M_k - 1}`, as a power of two exponent.
pub fn branch_count_log2(seq: &ParameterSequence, m: u64, k: usize) -> Result<u64, GeometryError> {
    let last = check_pull_back_args(seq, m, k)?;
    Ok(last - m)
}

/// Pull `A_k` back from time `M_k - 1` to time `m` along the branch `code`.
///
/// The code fixes the roots taken by the inner boundary's sample at angle 0,
/// `sqrt(-b_k) + r_k`. The outer boundary is seeded by continuing that sample
/// radially outwards, and both boundaries are then continued around their
/// circles by nearest-root tracking.
pub fn pull_back_annulus(
    seq: &ParameterSequence,
    m: u64,
    k: usize,
    code: &BranchCode,
) -> Result<PulledBackAnnulus, GeometryError> {
    let last = check_pull_back_args(seq, m, k)?;
    let expected = (last - m) as usize;
    if code.len() != expected {
        return Err(GeometryError::CodeLength {
            given: code.len(),
            expected,
        });
    }
    let chain = inverse_chain(seq, m, last);
    let annulus = annulus_a(seq, k)?;
    let inner_cont = Continuation {
        chain: &chain,
        center: annulus.center,
        radius: annulus.inner,
    };
    let outer_cont = Continuation {
        chain: &chain,
        center: annulus.center,
        radius: annulus.outer,
    };
    // chain[l] inverts P_{last - l}, whose code bit is at index last - l - m - 1.
    let inner_seed = inner_cont.seed(0.0, |l, root| if code.bits()[expected - 1 - l] { -root } else { root });
    let outer_seed = inner_cont.continue_along(&inner_seed, outer_cont.circle(0.0))?;
    let mut inner = inner_cont.run(inner_seed)?;
    let mut outer = outer_cont.run(outer_seed)?;
    if last > m {
        for (curve, radius) in [(&mut inner, annulus.inner), (&mut outer, annulus.outer)] {
            for p in curve.iter_mut() {
                *p = polish(seq, m, last, annulus.center, radius, *p);
            }
        }
    }
    finish(seq, m, k, code.clone(), inner, outer)
}

fn ulp_steps(x: f64, n: i32) -> f64 {
    (0..n.unsigned_abs()).fold(x, |y, _| if n > 0 { y.next_up() } else { y.next_down() })
}

/// Moves `p` one ulp at a time while its forward image gets closer to the
/// circle. The forward map can expand by 1e10 at depth, so the last bits of a
/// sample decide how well it round-trips.
fn polish(seq: &ParameterSequence, m: u64, last: u64, center: Complex64, radius: f64, p: Complex64) -> Complex64 {
    const ROUNDS: usize = 4;
    let err = |q: Complex64| compose(seq, m, last, q).map_or(f64::INFINITY, |w| ((w - center).norm() - radius).abs());
    let mut best = (err(p), p);
    for _ in 0..ROUNDS {
        let centre = best.1;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let q = Complex64::new(ulp_steps(centre.re, dx), ulp_steps(centre.im, dy));
                let e = err(q);
                if e < best.0 {
                    best = (e, q);
                }
            }
        }
        if best.1 == centre {
            break;
        }
    }
    best.1
}

/// The branch code whose pull-back of `A_k` follows the orbit of `z` from
/// time `m`: at every inverse step the root nearer the orbit is taken.
///
/// When the orbit is in the G disk at time `M_k - 1`, `z` lies in the bounded
/// complementary component of the resulting annulus.
pub fn branch_code_along_orbit(
    seq: &ParameterSequence,
    m: u64,
    k: usize,
    z: Complex64,
) -> Result<BranchCode, GeometryError> {
    let last = check_pull_back_args(seq, m, k)?;
    let chain = inverse_chain(seq, m, last);
    let steps = chain.len();
    let mut orbit = Vec::with_capacity(steps + 1);
    let mut w = z;
    orbit.push(w);
    for t in m + 1..=last {
        w = w * w + seq.coefficient(t);
        orbit.push(w);
    }
    // After l + 1 inverse steps the seed sits at time last - l - 1.
    let annulus = annulus_a(seq, k)?;
    let mut bits = vec![false; steps];
    let mut w = annulus.center + annulus.inner;
    for (l, &(_, c)) in chain.iter().enumerate() {
        let root = canonical_sqrt(w - c);
        let g = orbit[steps - 1 - l];
        let negate = (root - g).norm() > (root + g).norm();
        bits[steps - 1 - l] = negate;
        w = if negate { -root } else { root };
    }
    Ok(BranchCode::new(bits))
}

/// [`pull_back_annulus`] along [`branch_code_along_orbit`].
pub fn pull_back_annulus_around(
    seq: &ParameterSequence,
    m: u64,
    k: usize,
    z: Complex64,
) -> Result<PulledBackAnnulus, GeometryError> {
    let code = branch_code_along_orbit(seq, m, k, z)?;
    pull_back_annulus(seq, m, k, &code)
}

fn finish(
    seq: &ParameterSequence,
    m: u64,
    k: usize,
    code: BranchCode,
    inner: Vec<Complex64>,
    outer: Vec<Complex64>,
) -> Result<PulledBackAnnulus, GeometryError> {
    let modulus = annulus_a(seq, k)?.modulus();
    Ok(PulledBackAnnulus {
        stage: k,
        start_time: m,
        code,
        diameter: point_set_diameter(&outer),
        inner_gap: max_gap(&inner),
        outer_gap: max_gap(&outer),
        inner,
        outer,
        modulus,
    })
}

/// Image of `z` under the inverse branch of `Q_{m, M_k}` selected by `code`
/// (length `M_k - m`), together with `|f'(z)|` by the chain rule.
pub fn inverse_branch(
    seq: &ParameterSequence,
    m: u64,
    k: usize,
    z: Complex64,
    code: &BranchCode,
) -> Result<(Complex64, f64), GeometryError> {
    seq.check_stage(k)?;
    let end = seq.checkpoint(k);
    if m >= end {
        return Err(GeometryError::StartTime { m, k, last: end - 1 });
    }
    let expected = (end - m) as usize;
    if code.len() != expected {
        return Err(GeometryError::CodeLength {
            given: code.len(),
            expected,
        });
    }
    let mut w = z;
    let mut derivative = 1.0;
    for (l, (_, c)) in inverse_chain(seq, m, end).into_iter().enumerate() {
        let root = canonical_sqrt(w - c);
        w = if code.bits()[expected - 1 - l] { -root } else { root };
        // d/dw sqrt(w - c) = 1 / (2 sqrt(w - c))
        derivative /= 2.0 * root.norm();
    }
    Ok((w, derivative))
}

/// `|f'(z)|` for the inverse branch of `Q_{m, M_k}` given by `code`, for `z`
/// in the annulus `1/3 < |z| < 3`.
pub fn branch_derivative(
    seq: &ParameterSequence,
    m: u64,
    k: usize,
    z: Complex64,
    code: &BranchCode,
) -> Result<f64, GeometryError> {
    let r = z.norm();
    if !(r > 1.0 / 3.0 && r < 3.0) {
        return Err(GeometryError::OutsideDerivativeAnnulus(z));
    }
    inverse_branch(seq, m, k, z, code).map(|(_, d)| d)
}

/// Crude distance constant for points of the annulus 1/2 < |z| < 2 joined
/// inside a half-plane sector.
pub const SECTOR_PATH_CONSTANT: f64 = 4.0 * PI + 1.5;

/// `(4 pi + 3/2) 6 sqrt(-b_{k0}) / 2^(k - k0)` where `k0` is the first stage
/// with `m <= M_{k0} - 1`.
pub fn diameter_bound(seq: &ParameterSequence, m: u64, k: usize) -> Result<f64, GeometryError> {
    seq.check_stage(k)?;
    let k0 = seq.first_stage_from(m);
    if k < k0 {
        return Err(GeometryError::StageBeforeStart { k, k0, m });
    }
    Ok(SECTOR_PATH_CONSTANT * 6.0 * seq.root_b(k0) / ((k - k0) as f64).exp2())
}

// ---------------------------------------------------------------------------
// Polylines
// ---------------------------------------------------------------------------

/// Largest gap between consecutive points of a closed polyline.
pub fn max_gap(poly: &[Complex64]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| (poly[(i + 1) % n] - poly[i]).norm_sqr())
        .fold(0.0, f64::max)
        .sqrt()
}

fn cross(o: Complex64, a: Complex64, b: Complex64) -> f64 {
    (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
}

/// Winding number of a closed polyline around `p`.
pub fn winding_number(poly: &[Complex64], p: Complex64) -> i32 {
    let n = poly.len();
    let mut wn = 0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if a.im <= p.im {
            if b.im > p.im && cross(a, b, p) > 0.0 {
                wn += 1;
            }
        } else if b.im <= p.im && cross(a, b, p) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

fn point_segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Distance from `p` to a closed polyline.
pub fn distance_to_polyline(poly: &[Complex64], p: Complex64) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| point_segment_distance(p, poly[i], poly[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Andrew's monotone chain; returns hull vertices counter-clockwise.
pub fn convex_hull(points: &[Complex64]) -> Vec<Complex64> {
    let mut pts: Vec<Complex64> = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Complex64> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Largest pairwise distance in a point set, by rotating calipers on the hull.
pub fn point_set_diameter(points: &[Complex64]) -> f64 {
    let hull = convex_hull(points);
    let n = hull.len();
    match n {
        0 | 1 => return 0.0,
        2 => return (hull[1] - hull[0]).norm(),
        _ => {}
    }
    let area = |a: Complex64, b: Complex64, c: Complex64| cross(a, b, c).abs();
    let mut best: f64 = 0.0;
    let mut j = 1;
    for i in 0..n {
        let ni = (i + 1) % n;
        while area(hull[i], hull[ni], hull[(j + 1) % n]) > area(hull[i], hull[ni], hull[j]) {
            j = (j + 1) % n;
        }
        best = best.max((hull[i] - hull[j]).norm_sqr());
        best = best.max((hull[ni] - hull[j]).norm_sqr());
    }
    best.sqrt()
}

fn on_segment(a: Complex64, b: Complex64, p: Complex64) -> bool {
    p.re >= a.re.min(b.re) && p.re <= a.re.max(b.re) && p.im >= a.im.min(b.im) && p.im <= a.im.max(b.im)
}

/// Closed-segment intersection test.
pub fn segments_intersect(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Number of intersecting segment pairs between distinct closed polylines.
///
/// Segments are swept by their left x-extent, so only pairs whose x-ranges
/// overlap are tested.
pub fn count_polyline_intersections(polys: &[&[Complex64]]) -> usize {
    struct Seg {
        poly: usize,
        a: Complex64,
        b: Complex64,
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
    }
    let mut segs = Vec::new();
    for (pi, poly) in polys.iter().enumerate() {
        let n = poly.len();
        for i in 0..n {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            segs.push(Seg {
                poly: pi,
                a,
                b,
                x0: a.re.min(b.re),
                x1: a.re.max(b.re),
                y0: a.im.min(b.im),
                y1: a.im.max(b.im),
            });
        }
    }
    segs.sort_by(|s, t| s.x0.total_cmp(&t.x0));
    let mut count = 0;
    for i in 0..segs.len() {
        let s = &segs[i];
        for t in &segs[i + 1..] {
            if t.x0 > s.x1 {
                break;
            }
            if t.poly == s.poly || t.y0 > s.y1 || t.y1 < s.y0 {
                continue;
            }
            if segments_intersect(s.a, s.b, t.a, t.b) {
                count += 1;
            }
        }
    }
    count
}

// ---------------------------------------------------------------------------
// Separation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationVerdict {
    /// No points inside, points on both sides.
    Separates,
    /// Some point lies in the annulus itself.
    NotSeparating,
    /// No points inside, but all on one side.
    OneSided,
    /// Some point is within a sampling gap of a boundary.
    Indeterminate,
    /// No points given.
    Vacuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SeparationCounts {
    pub bounded: usize,
    pub unbounded: usize,
    pub inside: usize,
    pub indeterminate: usize,
}

impl SeparationCounts {
    pub fn verdict(&self) -> SeparationVerdict {
        if self.bounded + self.unbounded + self.inside + self.indeterminate == 0 {
            SeparationVerdict::Vacuous
        } else if self.inside > 0 {
            SeparationVerdict::NotSeparating
        } else if self.indeterminate > 0 {
            SeparationVerdict::Indeterminate
        } else if self.bounded > 0 && self.unbounded > 0 {
            SeparationVerdict::Separates
        } else {
            SeparationVerdict::OneSided
        }
    }
}

/// Where `p` sits relative to a pulled-back annulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Bounded,
    Inside,
    Unbounded,
    Indeterminate,
}

pub fn locate(annulus: &PulledBackAnnulus, p: Complex64) -> Location {
    if distance_to_polyline(&annulus.inner, p) <= annulus.inner_gap
        || distance_to_polyline(&annulus.outer, p) <= annulus.outer_gap
    {
        return Location::Indeterminate;
    }
    let in_outer = winding_number(&annulus.outer, p) != 0;
    let in_inner = winding_number(&annulus.inner, p) != 0;
    match (in_inner, in_outer) {
        (true, true) => Location::Bounded,
        (false, true) => Location::Inside,
        (false, false) => Location::Unbounded,
        (true, false) => Location::Indeterminate,
    }
}

pub fn separation_check(annulus: &PulledBackAnnulus, points: &[Complex64]) -> SeparationCounts {
    let mut counts = SeparationCounts::default();
    for &p in points {
        match locate(annulus, p) {
            Location::Bounded => counts.bounded += 1,
            Location::Inside => counts.inside += 1,
            Location::Unbounded => counts.unbounded += 1,
            Location::Indeterminate => counts.indeterminate += 1,
        }
    }
    counts
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolylineRow {
    pub time: u64,
    pub stage: usize,
    pub code: String,
    pub boundary: String,
    pub index: usize,
    pub re: f64,
    pub im: f64,
}

/// One boundary curve read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub time: u64,
    pub stage: usize,
    pub code: String,
    pub boundary: String,
    pub points: Vec<Complex64>,
}

/// Writes boundary samples as `time,stage,code,boundary,index,re,im`.
pub fn write_annuli_csv<W: io::Write>(annuli: &[PulledBackAnnulus], out: W) -> Result<(), GeometryError> {
    let mut wtr = csv::Writer::from_writer(out);
    if annuli.is_empty() {
        wtr.write_record(["time", "stage", "code", "boundary", "index", "re", "im"])?;
    }
    for ann in annuli {
        let code = ann.code.to_string();
        for (boundary, poly) in [("inner", &ann.inner), ("outer", &ann.outer)] {
            for (index, p) in poly.iter().enumerate() {
                wtr.serialize(PolylineRow {
                    time: ann.start_time,
                    stage: ann.stage,
                    code: code.clone(),
                    boundary: boundary.to_string(),
                    index,
                    re: p.re,
                    im: p.im,
                })?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Reads polylines written by [`write_annuli_csv`]; a row with index 0
/// starts a new curve.
pub fn read_polylines_csv<R: io::Read>(input: R) -> Result<Vec<Polyline>, GeometryError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out: Vec<Polyline> = Vec::new();
    for row in rdr.deserialize() {
        let row: PolylineRow = row?;
        let p = Complex64::new(row.re, row.im);
        match out.last_mut() {
            Some(last) if row.index > 0 => last.points.push(p),
            _ => out.push(Polyline {
                time: row.time,
                stage: row.stage,
                code: row.code,
                boundary: row.boundary,
                points: vec![p],
            }),
        }
    }
    Ok(out)
}

//! One reproducible check per quantitative bound of the construction.
//!
//! Set containments are checked by mapping samples forward and testing the
//! image, or by the contrapositive on the complement; preimages are never
//! computed except through the explicit inverse branches in [`geometry`].
//! Every check draws its samples from a ChaCha stream seeded from the run
//! seed and the check's identity, so reports are reproducible bit for bit.

use std::f64::consts::TAU;
use std::fmt;
use std::io;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{classify, compose, itinerary_class, ItineraryClass, Status, BAILOUT};
use crate::geometry::{
    annulus_a, annulus_modulus_lower_bound, branch_count_log2, diameter_bound, inverse_branch, pull_back_annulus,
    radii, BranchCode,
};
use crate::params::ParameterSequence;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("the sequence has no stages")]
    EmptySequence,
    #[error("unknown check {0:?}; expected one of {1}")]
    UnknownCheck(String, String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Indeterminate,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Indeterminate => "indeterminate",
        })
    }
}

/// One asserted inequality inside a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubCheck {
    pub name: String,
    pub status: CheckStatus,
    /// Smallest slack observed; negative means violated.
    pub margin: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    /// The inequality or containment being checked.
    pub statement: String,
    pub status: CheckStatus,
    pub margin: f64,
    pub samples: usize,
    pub details: Vec<SubCheck>,
    /// Left out of serialised reports so they stay byte-identical.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl CheckReport {
    fn from_parts(name: String, statement: &str, details: Vec<SubCheck>, started: Instant) -> Self {
        let status = if details.iter().any(|d| d.status == CheckStatus::Fail) {
            CheckStatus::Fail
        } else if details.iter().any(|d| d.status == CheckStatus::Indeterminate) {
            CheckStatus::Indeterminate
        } else {
            CheckStatus::Pass
        };
        CheckReport {
            name,
            statement: statement.to_string(),
            status,
            margin: details.iter().map(|d| d.margin).fold(f64::INFINITY, f64::min),
            samples: details.iter().map(|d| d.samples).sum(),
            details,
            wall_time: started.elapsed(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

/// Accumulates the smallest slack of one inequality over many samples.
struct Slack {
    name: String,
    min: f64,
    samples: usize,
    violations: usize,
}

impl Slack {
    fn new(name: impl Into<String>) -> Self {
        Slack {
            name: name.into(),
            min: f64::INFINITY,
            samples: 0,
            violations: 0,
        }
    }

    /// Records a strict inequality `slack > 0`.
    fn strict(&mut self, slack: f64) {
        self.record(slack, !(slack > 0.0));
    }

    /// Records an inclusive inequality `slack >= 0`.
    fn inclusive(&mut self, slack: f64) {
        self.record(slack, !(slack >= 0.0));
    }

    fn record(&mut self, slack: f64, violated: bool) {
        self.samples += 1;
        self.min = self.min.min(slack);
        if violated {
            self.violations += 1;
        }
    }

    fn finish(self) -> SubCheck {
        SubCheck {
            name: self.name,
            status: if self.violations > 0 {
                CheckStatus::Fail
            } else {
                CheckStatus::Pass
            },
            margin: self.min,
            samples: self.samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Samples per sampled sub-check.
    pub samples: usize,
    pub radii_samples: usize,
    /// Grid points per axis for the centre-disk check.
    pub grid_n: usize,
    /// Branch codes sampled per stage for the diameter check.
    pub codes: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 1,
            samples: 1000,
            radii_samples: 10_000,
            grid_n: 36,
            codes: 16,
        }
    }
}

fn rng_for(seed: u64, family: u64, k: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ family.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ k.rotate_left(32))
}

/// Uniform sample of the annulus `lo < |z| < hi` (by area).
fn sample_annulus(rng: &mut impl Rng, lo: f64, hi: f64) -> Complex64 {
    let r2 = rng.gen_range(lo * lo..hi * hi);
    let r = r2.sqrt().max(lo.next_up()).min(hi.next_down());
    Complex64::from_polar(r, rng.gen_range(0.0..TAU))
}

fn exact(name: &str, slack: f64, strict: bool) -> SubCheck {
    let mut s = Slack::new(name);
    if strict {
        s.strict(slack)
    } else {
        s.inclusive(slack)
    }
    s.finish()
}

/// Preimages of the closed 2-disk under the block map stay in the 2-disk.
pub fn check_block_invariance(seq: &ParameterSequence, k: usize, opts: &VerifyOptions) -> CheckReport {
    let started = Instant::now();
    let margins = seq.margins(k);
    let abs_a = seq.a(k).abs();
    let abs_b = seq.b(k).abs();
    let remark = (seq.m(k) as f64).exp2() - (abs_a + (abs_b + 2.0).sqrt()).log2();

    let mut details = vec![
        exact("2^m - log2(|a| + 2^k) > 0", margins.invariance1, true),
        exact("2^m - log2(|a| + sqrt(|b| + 2^k)) > 0", margins.invariance2, true),
        exact("2^m - log2(|a| + sqrt(|b| + 2)) > 0", remark, true),
    ];

    let (from, to) = (seq.checkpoint(k - 1), seq.checkpoint(k));
    let mut rng = rng_for(opts.seed, 1, k as u64);
    let mut escape = Slack::new("2 < |z| <= 4 implies |Q(z)| > 2");
    for i in 0..opts.samples {
        // Every fourth sample sits just outside the 2-disk, where the bound is tightest.
        let z = if i % 4 == 0 {
            Complex64::from_polar(2f64.next_up(), rng.gen_range(0.0..TAU))
        } else {
            let r = rng.gen_range(2.0..=4.0f64).max(2f64.next_up());
            Complex64::from_polar(r, rng.gen_range(0.0..TAU))
        };
        match compose(seq, from, to, z) {
            Some(w) => escape.strict(w.norm() - 2.0),
            None => escape.strict(BAILOUT - 2.0),
        }
    }
    details.push(escape.finish());
    CheckReport::from_parts(
        format!("block_invariance[k={k}]"),
        "preimages of the closed disk of radius 2 under the stage block stay in that disk",
        details,
        started,
    )
}

/// The closed annulus `1/2 <= |z| <= 2` is backward invariant under the
/// block, the disk `|z| < 1/2` is mapped into itself, and lands in the H
/// disk just before the checkpoint.
pub fn check_annulus_invariance(seq: &ParameterSequence, k: usize, opts: &VerifyOptions) -> CheckReport {
    let started = Instant::now();
    let margins = seq.margins(k);
    let (from, to) = (seq.checkpoint(k - 1), seq.checkpoint(k));
    let root_b = seq.root_b(k);
    let r = radii(seq.b(k)).map(|r| r.r).unwrap_or(0.0);
    let mut rng = rng_for(opts.seed, 2, k as u64);

    let mut into_disk = Slack::new("|z| < 1/2 implies |Q(z)| < 1/2");
    let mut h_disk = Slack::new("|z| < 1/2 implies |Q'(z) + sqrt(-b)| <= r and Re < 0");
    let mut next_step = Slack::new("|z| < 1/2 implies |P(Q'(z))| <= 2");
    let mut outer = Slack::new("2 < |z| <= 4 implies |Q(z)| > 2");

    for i in 0..opts.samples {
        let z = if i == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            sample_annulus(&mut rng, 0.0, 0.5)
        };
        let w = compose(seq, from, to - 1, z);
        match w {
            Some(w) => {
                let dist = (w + root_b).norm();
                h_disk.inclusive(if w.re < 0.0 { r - dist } else { -w.re.abs().max(f64::MIN_POSITIVE) });
                let img = w * w + seq.b(k);
                next_step.inclusive(2.0 - img.norm());
                into_disk.strict(0.5 - img.norm());
            }
            None => {
                h_disk.inclusive(f64::NEG_INFINITY);
                next_step.inclusive(f64::NEG_INFINITY);
                into_disk.strict(f64::NEG_INFINITY);
            }
        }

        let z = Complex64::from_polar(rng.gen_range(2.0..=4.0f64).max(2f64.next_up()), rng.gen_range(0.0..TAU));
        match compose(seq, from, to, z) {
            Some(w) => outer.strict(w.norm() - 2.0),
            None => outer.strict(BAILOUT - 2.0),
        }
    }

    let details = vec![
        exact("m - log2(log2(8 sqrt(-b))) >= 0", margins.annulus, false),
        into_disk.finish(),
        h_disk.finish(),
        next_step.finish(),
        outer.finish(),
    ];
    CheckReport::from_parts(
        format!("annulus_invariance[k={k}]"),
        "closed annulus 1/2 <= |z| <= 2 is backward invariant, the disk |z| < 1/2 maps into itself and into the H disk",
        details,
        started,
    )
}

/// Ulp of `x`, for the radius inequality tolerance.
fn ulp(x: f64) -> f64 {
    let x = x.abs();
    x.next_up() - x
}

/// Bounds on `r`, `s`, `t`, `u` over random `b` in `(-1e6, -6)`.
pub fn check_radii_bounds(n_samples: usize, opts: &VerifyOptions) -> CheckReport {
    let started = Instant::now();
    let mut rng = rng_for(opts.seed, 3, 0);
    let names = [
        "1/sqrt(-b) <= r",
        "r <= 1/sqrt(-b-2)",
        "1/sqrt(-b-2) < 1/2",
        "1/(2 sqrt(-b)) <= s",
        "t > 1/(8 sqrt(-b))",
        "u > 1/(12 sqrt(-b))",
    ];
    let mut slacks: Vec<Slack> = names.iter().map(|n| Slack::new(*n)).collect();
    let fixed = [-6.000001, -7.0, -9.0, -10.0, -1.0e5, -999_999.0];
    let (lo, hi) = (6f64.ln(), 1.0e6f64.ln());
    for i in 0..n_samples + fixed.len() {
        let b = if i < fixed.len() {
            fixed[i]
        } else if i % 2 == 0 {
            -rng.gen_range(6.0..1.0e6f64).max(6f64.next_up())
        } else {
            // Half the samples log-uniform so the region near -6 is covered.
            -rng.gen_range(lo..hi).exp().clamp(6f64.next_up(), 1.0e6)
        };
        let Ok(rd) = radii(b) else { continue };
        let x = -b;
        let checks = [
            (rd.r, 1.0 / x.sqrt(), false),
            (1.0 / (x - 2.0).sqrt(), rd.r, false),
            (0.5, 1.0 / (x - 2.0).sqrt(), true),
            (rd.s, 1.0 / (2.0 * x.sqrt()), false),
            (rd.t, 1.0 / (8.0 * x.sqrt()), true),
            (rd.u, 1.0 / (12.0 * x.sqrt()), true),
        ];
        for ((big, small, strict), slack) in checks.into_iter().zip(slacks.iter_mut()) {
            // 4-ulp allowance on the larger side.
            let tol = 4.0 * ulp(big.max(small));
            let diff = big - small;
            if strict {
                slack.record(diff, !(diff > -tol));
            } else {
                slack.record(diff, !(diff >= -tol));
            }
        }
    }
    CheckReport::from_parts(
        "radii_bounds".into(),
        "1/sqrt(-b) <= r <= 1/sqrt(-b-2) < 1/2, s >= 1/(2 sqrt(-b)), t > 1/(8 sqrt(-b)), u > 1/(12 sqrt(-b))",
        slacks.into_iter().map(Slack::finish).collect(),
        started,
    )
}

fn random_code(rng: &mut impl Rng, len: usize) -> BranchCode {
    BranchCode::new((0..len).map(|_| rng.gen_bool(0.5)).collect())
}

/// Inverse branches of the stage maps contract on `1/3 < |z| < 3`.
pub fn check_contracting(seq: &ParameterSequence, k: usize, n_samples: usize, opts: &VerifyOptions) -> CheckReport {
    let started = Instant::now();
    let margins = seq.margins(k);
    let (block_start, end) = (seq.checkpoint(k - 1), seq.checkpoint(k));
    let bound_partial = 6.0 * seq.root_b(k);
    let mut rng = rng_for(opts.seed, 4, k as u64);

    let mut full = Slack::new("full block branch |f'| < 1/2");
    let mut partial = Slack::new("partial block branch |f'| < 6 sqrt(-b)");
    let mut fd = Slack::new("chain rule vs finite difference, relative error <= 1e-4");
    let mut skipped = 0usize;

    for _ in 0..n_samples {
        let z = sample_annulus(&mut rng, 1.0 / 3.0, 3.0);
        let code = random_code(&mut rng, (end - block_start) as usize);
        match inverse_branch(seq, block_start, k, z, &code) {
            Ok((_, d)) => full.strict(0.5 - d),
            Err(_) => skipped += 1,
        }
        let m = rng.gen_range(block_start..end);
        let code = random_code(&mut rng, (end - m) as usize);
        match inverse_branch(seq, m, k, z, &code) {
            Ok((_, d)) => partial.strict(bound_partial - d),
            Err(_) => skipped += 1,
        }
    }

    for _ in 0..10 {
        let z = sample_annulus(&mut rng, 1.0 / 3.0, 3.0);
        let code = random_code(&mut rng, (end - block_start) as usize);
        let Ok((w, d)) = inverse_branch(seq, block_start, k, z, &code) else {
            skipped += 1;
            continue;
        };
        let h = 1e-6 * w.norm().max(1e-3);
        let (Some(fp), Some(fm)) = (
            compose(seq, block_start, end, w + h),
            compose(seq, block_start, end, w - h),
        ) else {
            skipped += 1;
            continue;
        };
        let forward = ((fp - fm) / (2.0 * h)).norm();
        let rel = (d - 1.0 / forward).abs() / d;
        fd.inclusive(1e-4 - rel);
    }

    let mut details = vec![
        exact("m - log2(12 sqrt(-b)) >= 0", margins.contraction, false),
        full.finish(),
        partial.finish(),
        fd.finish(),
    ];
    if skipped > 0 {
        details.push(SubCheck {
            name: "samples outside the branch domain".into(),
            status: CheckStatus::Indeterminate,
            margin: 0.0,
            samples: skipped,
        });
    }
    CheckReport::from_parts(
        format!("contracting[k={k}]"),
        "inverse branches of Q_{M_{k-1},M_k} have |f'| < 1/2 and of Q_{m,M_k} have |f'| < 6 sqrt(-b_k) on 1/3 < |z| < 3",
        details,
        started,
    )
}

/// `mod A_k > ln(4 sqrt(-b_k) - 1)`, increasing when `b` is decreasing.
pub fn check_modulus_growth(seq: &ParameterSequence) -> CheckReport {
    let started = Instant::now();
    let mut lower = Slack::new("mod A_k - ln(4 sqrt(-b_k) - 1) > 0");
    let mut moduli = Vec::with_capacity(seq.depth());
    for k in 1..=seq.depth() {
        let modulus = annulus_a(seq, k).map(|a| a.modulus()).unwrap_or(f64::NAN);
        lower.strict(modulus - annulus_modulus_lower_bound(seq.b(k)));
        moduli.push(modulus);
    }
    let decreasing_b = seq.b_values().windows(2).all(|w| w[1] < w[0]);
    let increasing = if decreasing_b {
        let mut s = Slack::new("mod A_{k+1} > mod A_k");
        for w in moduli.windows(2) {
            s.strict(w[1] - w[0]);
        }
        s.finish()
    } else {
        SubCheck {
            name: "mod A_{k+1} > mod A_k".into(),
            status: CheckStatus::Indeterminate,
            margin: 0.0,
            samples: 0,
        }
    };
    CheckReport::from_parts(
        "modulus_growth".into(),
        "mod A_k > ln(4 sqrt(-b_k) - 1), increasing in k",
        vec![lower.finish(), increasing],
        started,
    )
}

/// Codes to sample at stage `k` from time `m`: all of them when there are at
/// most `max_codes`, otherwise all-zero, all-one and random ones.
fn sample_codes(len: usize, max_codes: usize, rng: &mut impl Rng) -> Vec<BranchCode> {
    if len < 63 && (1u64 << len) <= max_codes as u64 {
        return (0..1u64 << len).map(|j| BranchCode::from_index(j, len)).collect();
    }
    let mut codes = vec![BranchCode::zeros(len), BranchCode::new(vec![true; len])];
    while codes.len() < max_codes.max(2) {
        codes.push(random_code(rng, len));
    }
    codes
}

/// Measured diameters of pulled-back annuli against the closed-form bound,
/// and their decay from one stage to the next.
pub fn check_diameter_decay(seq: &ParameterSequence, m: u64, opts: &VerifyOptions) -> CheckReport {
    const RATIO_LIMIT: f64 = 0.75;
    let started = Instant::now();
    let k0 = seq.first_stage_from(m);
    let mut rng = rng_for(opts.seed, 6, m);
    let mut bound = Slack::new("diam B^{k,j}_m <= bound(m, k)");
    let mut failures = 0usize;
    let mut max_diam = Vec::new();

    for k in k0..=seq.depth() {
        let Ok(len) = branch_count_log2(seq, m, k) else { continue };
        let codes = sample_codes(len as usize, opts.codes, &mut rng);
        let limit = diameter_bound(seq, m, k).unwrap_or(f64::NAN);
        let diams: Vec<Option<f64>> = codes
            .par_iter()
            .map(|code| pull_back_annulus(seq, m, k, code).ok().map(|a| a.diameter))
            .collect();
        let mut largest: f64 = 0.0;
        for d in diams {
            match d {
                Some(d) => {
                    bound.inclusive(limit - d);
                    largest = largest.max(d);
                }
                None => failures += 1,
            }
        }
        max_diam.push(largest);
    }

    let mut ratio = Slack::new("max diam at k+1 / max diam at k <= 0.75");
    for w in max_diam.windows(2) {
        ratio.inclusive(RATIO_LIMIT - w[1] / w[0]);
    }
    let mut details = vec![bound.finish(), ratio.finish()];
    if failures > 0 {
        details.push(SubCheck {
            name: "pull-backs that lost continuity".into(),
            status: CheckStatus::Indeterminate,
            margin: 0.0,
            samples: failures,
        });
    }
    if k0 > seq.depth() {
        details.push(SubCheck {
            name: "no stage ahead of the start time".into(),
            status: CheckStatus::Indeterminate,
            margin: 0.0,
            samples: 0,
        });
    }
    CheckReport::from_parts(
        format!("diameter_decay[m={m}]"),
        "diam B^{k,j}_m <= (4 pi + 3/2) 6 sqrt(-b_{k0}) / 2^(k - k0)",
        details,
        started,
    )
}

/// Every grid point of `|z| < 1/2` at time `M_{k0}` survives with an all-H
/// itinerary. The slack is the distance inside the H disk at each stage.
pub fn check_center_disk_in_h(seq: &ParameterSequence, k0: usize, grid_n: usize) -> CheckReport {
    let started = Instant::now();
    let m = seq.checkpoint(k0.min(seq.depth()));
    let horizon = seq.depth();
    let n = grid_n.max(2);
    let points: Vec<Complex64> = (0..n * n)
        .map(|i| {
            let (ix, iy) = (i % n, i / n);
            Complex64::new(
                -0.5 + (ix as f64 + 0.5) / n as f64,
                -0.5 + (iy as f64 + 0.5) / n as f64,
            )
        })
        .filter(|z| z.norm() < 0.5)
        .collect();

    let mut all_h = Slack::new("r_j - |Q_{m,M_j - 1}(z) + sqrt(-b_j)| >= 0 with Re < 0");
    let mut radius = Slack::new("|Q_{m,M_j}(z)| <= 2 at each checkpoint");
    for &z in &points {
        let cl = classify(seq, z, m, horizon);
        let classified_h = matches!(cl.status, Status::Survived { .. })
            && !cl.anomaly
            && (cl.itinerary.is_empty() || itinerary_class(&cl.itinerary, 1) == ItineraryClass::AllH);
        if !classified_h {
            all_h.inclusive(f64::NEG_INFINITY);
        }
        for j in k0 + 1..=horizon {
            let r = radii(seq.b(j)).map(|r| r.r).unwrap_or(0.0);
            let slack = match compose(seq, m, seq.checkpoint(j) - 1, z) {
                Some(w) if w.re < 0.0 => r - (w + seq.root_b(j)).norm(),
                _ => f64::NEG_INFINITY,
            };
            all_h.inclusive(slack);
            let w = compose(seq, m, seq.checkpoint(j), z);
            radius.inclusive(w.map_or(f64::NEG_INFINITY, |w| 2.0 - w.norm()));
        }
    }
    let mut details = vec![all_h.finish(), radius.finish()];
    if k0 >= horizon {
        details.push(SubCheck {
            name: "no stage ahead of M_k0".into(),
            status: CheckStatus::Indeterminate,
            margin: 0.0,
            samples: 0,
        });
    }
    CheckReport::from_parts(
        format!("center_disk[k0={k0}]"),
        "the disk |z| < 1/2 at time M_k0 lies in the all-H set",
        details,
        started,
    )
}

/// Check families in execution order.
pub const CHECK_NAMES: [&str; 7] = [
    "block_invariance",
    "annulus_invariance",
    "radii",
    "contracting",
    "modulus_growth",
    "diameter_decay",
    "center_disk",
];

/// Runs every check, optionally restricted to one family.
pub fn run_selected(
    seq: &ParameterSequence,
    opts: &VerifyOptions,
    only: Option<&str>,
) -> Result<Vec<CheckReport>, VerifyError> {
    if seq.depth() == 0 {
        return Err(VerifyError::EmptySequence);
    }
    if let Some(name) = only {
        if !CHECK_NAMES.contains(&name) {
            return Err(VerifyError::UnknownCheck(name.to_string(), CHECK_NAMES.join(", ")));
        }
    }
    let wanted = |name: &str| only.map_or(true, |o| o == name);

    type Job<'a> = Box<dyn Fn() -> CheckReport + Send + Sync + 'a>;
    let mut jobs: Vec<Job> = Vec::new();
    let depth = seq.depth();
    if wanted("block_invariance") {
        for k in 1..=depth {
            jobs.push(Box::new(move || check_block_invariance(seq, k, opts)));
        }
    }
    if wanted("annulus_invariance") {
        for k in 1..=depth {
            jobs.push(Box::new(move || check_annulus_invariance(seq, k, opts)));
        }
    }
    if wanted("radii") {
        jobs.push(Box::new(move || check_radii_bounds(opts.radii_samples, opts)));
    }
    if wanted("contracting") {
        for k in 1..=depth {
            jobs.push(Box::new(move || check_contracting(seq, k, opts.samples, opts)));
        }
    }
    if wanted("modulus_growth") {
        jobs.push(Box::new(move || check_modulus_growth(seq)));
    }
    if wanted("diameter_decay") {
        jobs.push(Box::new(move || check_diameter_decay(seq, 0, opts)));
        if depth >= 2 {
            let m = seq.checkpoint(1);
            jobs.push(Box::new(move || check_diameter_decay(seq, m, opts)));
        }
    }
    if wanted("center_disk") {
        for k0 in 0..depth {
            jobs.push(Box::new(move || check_center_disk_in_h(seq, k0, opts.grid_n)));
        }
    }
    Ok(jobs.par_iter().map(|job| job()).collect())
}

pub fn run_all(seq: &ParameterSequence, opts: &VerifyOptions) -> Result<Vec<CheckReport>, VerifyError> {
    run_selected(seq, opts, None)
}

pub fn all_passed(reports: &[CheckReport]) -> bool {
    reports.iter().all(CheckReport::passed)
}

pub fn write_json<W: io::Write>(reports: &[CheckReport], mut out: W) -> Result<(), VerifyError> {
    serde_json::to_writer_pretty(&mut out, reports)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// `name,status,margin,samples`, one row per report.
pub fn write_csv<W: io::Write>(reports: &[CheckReport], out: W) -> Result<(), VerifyError> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["name", "status", "margin", "samples"])?;
    for r in reports {
        wtr.write_record([
            r.name.clone(),
            r.status.to_string(),
            format!("{:e}", r.margin),
            r.samples.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{build_sequence, PlanPolicy};

    fn opts() -> VerifyOptions {
        VerifyOptions {
            samples: 300,
            radii_samples: 2000,
            ..VerifyOptions::default()
        }
    }

    #[test]
    fn block_invariance_default() {
        let seq = ParameterSequence::default_demo();
        for k in 1..=3 {
            let r = check_block_invariance(&seq, k, &opts());
            assert_eq!(r.status, CheckStatus::Pass, "{r:?}");
        }
        let r = check_block_invariance(&seq, 1, &opts());
        // log-domain slack 2^5 - log2(sqrt 7 + 3)
        let expected = 32.0 - (7f64.sqrt() + 3.0).log2();
        assert!((r.details[2].margin - expected).abs() < 1e-12);
    }

    #[test]
    fn block_invariance_detects_too_small_exponent() {
        let seq = build_sequence(&[-7.0, -10.0], &PlanPolicy::unchecked(&[1, 6])).unwrap();
        let r = check_block_invariance(&seq, 1, &opts());
        assert_eq!(r.status, CheckStatus::Fail);
        let r = check_annulus_invariance(&seq, 1, &opts());
        assert_eq!(r.status, CheckStatus::Fail);
    }

    #[test]
    fn annulus_invariance_default() {
        let seq = ParameterSequence::default_demo();
        for k in 1..=3 {
            let r = check_annulus_invariance(&seq, k, &opts());
            assert_eq!(r.status, CheckStatus::Pass, "{r:?}");
        }
    }

    #[test]
    fn radii_margins() {
        let r = check_radii_bounds(2000, &opts());
        assert_eq!(r.status, CheckStatus::Pass);
        assert_eq!(r.samples, 6 * 2006);
    }

    #[test]
    fn contracting_default() {
        let seq = ParameterSequence::default_demo();
        for k in 1..=3 {
            let r = check_contracting(&seq, k, 300, &opts());
            assert_eq!(r.status, CheckStatus::Pass, "{r:?}");
        }
    }

    #[test]
    fn contraction_bound_violation_is_reported() {
        let seq = build_sequence(&[-7.0, -10.0], &PlanPolicy::unchecked(&[3, 6])).unwrap();
        let r = check_contracting(&seq, 1, 300, &opts());
        assert_eq!(r.status, CheckStatus::Fail);
        assert_eq!(r.details[0].status, CheckStatus::Fail);
    }

    #[test]
    fn modulus_growth_cases() {
        let seq = ParameterSequence::default_demo();
        let r = check_modulus_growth(&seq);
        assert_eq!(r.status, CheckStatus::Pass);
        let constant = build_sequence(&[-7.0, -7.0], &PlanPolicy::default()).unwrap();
        let r = check_modulus_growth(&constant);
        assert_eq!(r.details[1].status, CheckStatus::Indeterminate);
        assert_eq!(r.status, CheckStatus::Indeterminate);
    }

    #[test]
    fn center_disk_default() {
        let seq = ParameterSequence::default_demo();
        for k0 in 0..3 {
            let r = check_center_disk_in_h(&seq, k0, 20);
            assert_eq!(r.status, CheckStatus::Pass, "{r:?}");
        }
        let r = check_center_disk_in_h(&seq, 3, 20);
        assert_eq!(r.status, CheckStatus::Indeterminate);
    }

    #[test]
    fn unknown_filter_is_an_error() {
        let seq = ParameterSequence::default_demo();
        assert!(matches!(
            run_selected(&seq, &opts(), Some("nope")),
            Err(VerifyError::UnknownCheck(..))
        ));
        let only = run_selected(&seq, &opts(), Some("radii")).unwrap();
        assert_eq!(only.len(), 1);
        assert_eq!(only[0].name, "radii_bounds");
    }

    #[test]
    fn csv_has_one_row_per_report() {
        let seq = ParameterSequence::default_demo();
        let reports = run_selected(&seq, &opts(), Some("modulus_growth")).unwrap();
        let mut buf = Vec::new();
        write_csv(&reports, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("name,status,margin,samples\nmodulus_growth,pass,"));
    }
}

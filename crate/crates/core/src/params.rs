//! Construction of the polynomial sequence.
//!
//! A sequence is built from a list of stage values `b_k < -6`. Each stage `k`
//! contributes a block of `m_k + 1` maps ending at the checkpoint time
//! `M_k = sum_{j<=k} (m_j + 1)`:
//!
//! ```text
//! P_t(z) = z^2 + a_k   if t = M_k - 1
//! P_t(z) = z^2 + b_k   if t = M_k
//! P_t(z) = z^2         otherwise
//! ```
//!
//! with `a_k = -sqrt(-b_k)`, so the block `M_{k-1} -> M_k - 1` is the single
//! map `z^(2^m_k) + a_k`. The block exponents `m_k` must satisfy four lower
//! bounds; all of them are compared in the `log2` domain so `2^(2^m)` is never
//! materialised.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stage values must lie strictly below this.
pub const B_LIMIT: f64 = -6.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("stage value b = {value} at stage {stage} must be a finite number < -6")]
    BDomain { stage: usize, value: f64 },
    #[error("the stage list is empty")]
    Empty,
    #[error("{given} exponent overrides given for {stages} stages")]
    OverrideLength { given: usize, stages: usize },
    #[error("exponent m = {m} at stage {stage} violates {bound}")]
    OverrideViolation {
        stage: usize,
        m: u32,
        bound: &'static str,
    },
    #[error("time {time} is outside 1..={max}")]
    TimeOutOfRange { time: u64, max: u64 },
    #[error("stage {stage} is outside 1..={depth}")]
    StageOutOfRange { stage: usize, depth: usize },
}

/// `a = -sqrt(-b)`, the placement of the critical value of each block.
pub fn derive_a(b: f64) -> Result<f64, ParamsError> {
    check_b(0, b)?;
    Ok(-(-b).sqrt())
}

fn check_b(stage: usize, b: f64) -> Result<(), ParamsError> {
    if b.is_finite() && b < B_LIMIT {
        Ok(())
    } else {
        Err(ParamsError::BDomain { stage, value: b })
    }
}

/// `log2(x + 2^k)` without overflowing for large `k`.
fn log2_plus_pow2(x: f64, k: usize) -> f64 {
    let p = (k as f64).exp2();
    if p.is_finite() {
        (x + p).log2()
    } else {
        k as f64
    }
}

/// `log2(x + sqrt(y + 2^k))` without overflowing for large `k`.
fn log2_plus_sqrt_pow2(x: f64, y: f64, k: usize) -> f64 {
    let p = (k as f64).exp2();
    if p.is_finite() {
        (x + (y + p).sqrt()).log2()
    } else {
        k as f64 / 2.0
    }
}

/// Slack of each of the four block-exponent bounds for one stage.
///
/// The first two are strict (`> 0` required) and measured as
/// `2^m - log2(..)`; the last two are inclusive (`>= 0` required) and measured
/// as `m - threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundMargins {
    /// `2^(2^m) - |a| > 2^k`
    pub invariance1: f64,
    /// `(2^(2^m) - |a|)^2 - |b| > 2^k`
    pub invariance2: f64,
    /// `m >= log2(log2(8 sqrt(-b)))`
    pub annulus: f64,
    /// `m >= log2(12 sqrt(-b))`
    pub contraction: f64,
}

impl BoundMargins {
    pub fn new(k: usize, b: f64, m: u32) -> Self {
        let abs_a = (-b).sqrt();
        let abs_b = -b;
        let two_m = (m as f64).exp2();
        BoundMargins {
            invariance1: two_m - log2_plus_pow2(abs_a, k),
            invariance2: two_m - log2_plus_sqrt_pow2(abs_a, abs_b, k),
            annulus: m as f64 - annulus_exponent_threshold(b),
            contraction: m as f64 - contraction_exponent_threshold(b),
        }
    }

    pub fn satisfied(&self) -> bool {
        self.first_violation().is_none()
    }

    /// Name of the first bound that fails, if any.
    pub fn first_violation(&self) -> Option<&'static str> {
        if !(self.invariance1 > 0.0) {
            Some("2^(2^m) - |a_k| > 2^k")
        } else if !(self.invariance2 > 0.0) {
            Some("(2^(2^m) - |a_k|)^2 - |b_k| > 2^k")
        } else if !(self.annulus >= 0.0) {
            Some("m >= log2(log2(8 sqrt(-b_k)))")
        } else if !(self.contraction >= 0.0) {
            Some("m >= log2(12 sqrt(-b_k))")
        } else {
            None
        }
    }
}

/// `log2(log2(8 sqrt(-b)))`, the annulus-invariance threshold on `m`.
pub fn annulus_exponent_threshold(b: f64) -> f64 {
    (8.0 * (-b).sqrt()).log2().log2()
}

/// `log2(12 sqrt(-b))`, the contraction threshold on `m`.
pub fn contraction_exponent_threshold(b: f64) -> f64 {
    (12.0 * (-b).sqrt()).log2()
}

/// Smallest block exponent for stage `k` (1-based) meeting all four bounds.
pub fn min_block_exponent(k: usize, b: f64) -> Result<u32, ParamsError> {
    check_b(k, b)?;
    let abs_a = (-b).sqrt();
    let inv1 = log2_plus_pow2(abs_a, k);
    let inv2 = log2_plus_sqrt_pow2(abs_a, -b, k);
    let ann = annulus_exponent_threshold(b);
    let con = contraction_exponent_threshold(b);

    // The inclusive bounds give a closed-form floor; the strict ones need 2^m
    // strictly above a value, which is a short walk from there.
    let mut m = ann.max(con).ceil().max(1.0) as u32;
    while !((m as f64).exp2() > inv1 && (m as f64).exp2() > inv2) {
        m += 1;
    }
    debug_assert!(BoundMargins::new(k, b, m).satisfied());
    Ok(m)
}

/// How block exponents are chosen.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub enum ExponentMode {
    /// The smallest admissible exponent at every stage.
    #[default]
    Minimal,
    /// Per-stage overrides; `None` entries fall back to the minimum.
    Explicit(Vec<Option<u32>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanPolicy {
    pub mode: ExponentMode,
    /// When false, overrides violating the bounds are kept and reported as
    /// advisories. Only used to build falsification fixtures.
    pub enforce_bounds: bool,
}

impl Default for PlanPolicy {
    fn default() -> Self {
        PlanPolicy {
            mode: ExponentMode::Minimal,
            enforce_bounds: true,
        }
    }
}

impl PlanPolicy {
    pub fn explicit(overrides: Vec<Option<u32>>) -> Self {
        PlanPolicy {
            mode: ExponentMode::Explicit(overrides),
            enforce_bounds: true,
        }
    }

    /// Explicit exponents accepted even when they break the bounds.
    pub fn unchecked(exponents: &[u32]) -> Self {
        PlanPolicy {
            mode: ExponentMode::Explicit(exponents.iter().copied().map(Some).collect()),
            enforce_bounds: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Advisory {
    /// `b` is not strictly decreasing between these stages.
    NotDecreasing { stage: usize },
    /// An unchecked override breaks one of the exponent bounds.
    BoundViolated {
        stage: usize,
        m: u32,
        bound: String,
    },
}

/// The constructed sequence. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSequence {
    b: Vec<f64>,
    a: Vec<f64>,
    m: Vec<u32>,
    /// Checkpoint times, `checkpoints[0] = 0`.
    checkpoints: Vec<u64>,
    #[serde(default)]
    advisories: Vec<Advisory>,
}

/// `b_k = -(7 + 3(k-1))` for `k = 1..=depth`.
pub fn default_b(depth: usize) -> Vec<f64> {
    (0..depth).map(|i| -(7.0 + 3.0 * i as f64)).collect()
}

pub fn build_sequence(b: &[f64], policy: &PlanPolicy) -> Result<ParameterSequence, ParamsError> {
    if b.is_empty() {
        return Err(ParamsError::Empty);
    }
    for (i, &bk) in b.iter().enumerate() {
        check_b(i + 1, bk)?;
    }
    let overrides: Vec<Option<u32>> = match &policy.mode {
        ExponentMode::Minimal => vec![None; b.len()],
        ExponentMode::Explicit(o) if o.len() == b.len() => o.clone(),
        ExponentMode::Explicit(o) => {
            return Err(ParamsError::OverrideLength {
                given: o.len(),
                stages: b.len(),
            })
        }
    };

    let mut advisories = Vec::new();
    for k in 2..=b.len() {
        if !(b[k - 1] < b[k - 2]) {
            advisories.push(Advisory::NotDecreasing { stage: k });
        }
    }

    let mut m = Vec::with_capacity(b.len());
    for (i, (&bk, ov)) in b.iter().zip(&overrides).enumerate() {
        let k = i + 1;
        let mk = match *ov {
            None => min_block_exponent(k, bk)?,
            Some(mk) => {
                if let Some(bound) = BoundMargins::new(k, bk, mk).first_violation() {
                    if policy.enforce_bounds || mk == 0 {
                        return Err(ParamsError::OverrideViolation { stage: k, m: mk, bound });
                    }
                    advisories.push(Advisory::BoundViolated {
                        stage: k,
                        m: mk,
                        bound: bound.to_string(),
                    });
                }
                mk
            }
        };
        m.push(mk);
    }

    let mut checkpoints = Vec::with_capacity(b.len() + 1);
    checkpoints.push(0u64);
    for &mk in &m {
        let last = *checkpoints.last().unwrap();
        checkpoints.push(last + mk as u64 + 1);
    }

    Ok(ParameterSequence {
        a: b.iter().map(|&bk| -(-bk).sqrt()).collect(),
        b: b.to_vec(),
        m,
        checkpoints,
        advisories,
    })
}

impl ParameterSequence {
    /// The default three-stage sequence `b = (-7, -10, -13)`.
    pub fn default_demo() -> Self {
        build_sequence(&default_b(3), &PlanPolicy::default()).expect("default sequence is valid")
    }

    /// Number of stages `K`.
    pub fn depth(&self) -> usize {
        self.b.len()
    }

    pub fn b_values(&self) -> &[f64] {
        &self.b
    }

    pub fn a_values(&self) -> &[f64] {
        &self.a
    }

    pub fn exponents(&self) -> &[u32] {
        &self.m
    }

    pub fn checkpoints(&self) -> &[u64] {
        &self.checkpoints
    }

    pub fn advisories(&self) -> &[Advisory] {
        &self.advisories
    }

    /// `b_k` for 1-based `k`.
    pub fn b(&self, k: usize) -> f64 {
        self.b[k - 1]
    }

    /// `a_k` for 1-based `k`.
    pub fn a(&self, k: usize) -> f64 {
        self.a[k - 1]
    }

    /// `m_k` for 1-based `k`.
    pub fn m(&self, k: usize) -> u32 {
        self.m[k - 1]
    }

    /// `sqrt(-b_k)`, the centre of the right-hand preimage disk.
    pub fn root_b(&self, k: usize) -> f64 {
        -self.a[k - 1]
    }

    /// Checkpoint time `M_k`, with `M_0 = 0`.
    pub fn checkpoint(&self, k: usize) -> u64 {
        self.checkpoints[k]
    }

    /// Last time covered by the sequence, `M_K`.
    pub fn final_time(&self) -> u64 {
        *self.checkpoints.last().unwrap()
    }

    pub fn margins(&self, k: usize) -> BoundMargins {
        BoundMargins::new(k, self.b(k), self.m(k))
    }

    pub fn check_stage(&self, k: usize) -> Result<(), ParamsError> {
        if (1..=self.depth()).contains(&k) {
            Ok(())
        } else {
            Err(ParamsError::StageOutOfRange {
                stage: k,
                depth: self.depth(),
            })
        }
    }

    /// Stage whose block contains time `t >= 1`, i.e. `M_{k-1} < t <= M_k`.
    pub fn stage_of_time(&self, t: u64) -> usize {
        self.checkpoints.partition_point(|&mk| mk < t)
    }

    /// Smallest stage `k` with `m <= M_k - 1`, or `K + 1` past the horizon.
    pub fn first_stage_from(&self, m: u64) -> usize {
        self.checkpoints[1..].partition_point(|&mk| mk < m + 1) + 1
    }

    /// Constant term `c_t` of `P_t(z) = z^2 + c_t`.
    pub fn coefficient_at(&self, t: u64) -> Result<f64, ParamsError> {
        if t == 0 || t > self.final_time() {
            return Err(ParamsError::TimeOutOfRange {
                time: t,
                max: self.final_time(),
            });
        }
        Ok(self.coefficient(t))
    }

    /// Unchecked variant of [`coefficient_at`](Self::coefficient_at) for hot loops.
    #[inline]
    pub(crate) fn coefficient(&self, t: u64) -> f64 {
        let k = self.stage_of_time(t);
        let mk = self.checkpoints[k];
        if t == mk {
            self.b[k - 1]
        } else if t + 1 == mk {
            self.a[k - 1]
        } else {
            0.0
        }
    }

    /// Coefficients `c_{from+1}, ..., c_{to}` in time order.
    pub fn coefficients(&self, from: u64, to: u64) -> Vec<f64> {
        (from + 1..=to).map(|t| self.coefficient(t)).collect()
    }

    /// Keeps the first `depth` stages.
    pub fn truncated(&self, depth: usize) -> Result<Self, ParamsError> {
        if depth == 0 {
            return Err(ParamsError::Empty);
        }
        self.check_stage(depth)?;
        Ok(ParameterSequence {
            b: self.b[..depth].to_vec(),
            a: self.a[..depth].to_vec(),
            m: self.m[..depth].to_vec(),
            checkpoints: self.checkpoints[..=depth].to_vec(),
            advisories: self
                .advisories
                .iter()
                .filter(|adv| match adv {
                    Advisory::NotDecreasing { stage } => *stage <= depth,
                    Advisory::BoundViolated { stage, .. } => *stage <= depth,
                })
                .cloned()
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct evaluation of the four bounds with `2^(2^m)` materialised;
    /// valid while it stays finite (m <= 9).
    fn bounds_hold_direct(k: usize, b: f64, m: u32) -> bool {
        assert!(m <= 9);
        let big = 2f64.powi(2i32.pow(m));
        let abs_a = (-b).sqrt();
        let two_k = 2f64.powi(k as i32);
        let ln2 = 2f64.ln();
        big - abs_a > two_k
            && (big - abs_a).powi(2) - (-b) > two_k
            && (m as f64) >= ((8.0 * (-b).sqrt()).ln() / ln2).ln() / ln2
            && (m as f64) >= (12.0 * (-b).sqrt()).ln() / ln2
    }

    #[test]
    fn derive_a_values() {
        let a7 = derive_a(-7.0).unwrap();
        assert!((a7 - -2.6457513).abs() < 1e-7);
        assert!((a7 * a7 - 7.0).abs() < 1e-14);
        assert_eq!(derive_a(-9.0).unwrap(), -3.0);
        let a10 = derive_a(-10.0).unwrap();
        assert!((a10 - -3.1622777).abs() < 1e-7);
        assert!((a10 * a10 - 10.0).abs() < 1e-14);
        assert!(derive_a(-6.0).is_err());
        assert!(derive_a(-5.0).is_err());
        assert!(derive_a(f64::NAN).is_err());
    }

    #[test]
    fn min_exponent_examples() {
        assert_eq!(min_block_exponent(1, -7.0).unwrap(), 5);
        assert_eq!(min_block_exponent(2, -10.0).unwrap(), 6);
        assert_eq!(min_block_exponent(1, -9.0).unwrap(), 6);
        assert!(!bounds_hold_direct(1, -7.0, 4));
        assert!(bounds_hold_direct(1, -7.0, 5));
        assert!(!bounds_hold_direct(2, -10.0, 5));
        assert!(bounds_hold_direct(2, -10.0, 6));
        assert!(!bounds_hold_direct(1, -9.0, 5));
        assert!(bounds_hold_direct(1, -9.0, 6));
    }

    #[test]
    fn large_stage_index_does_not_overflow() {
        // 2^k dominates |a| here, so 2^m > k is what matters.
        let m = min_block_exponent(2000, -7.0).unwrap();
        assert_eq!(m, 11);
    }

    #[test]
    fn build_two_stages() {
        let seq = build_sequence(&[-7.0, -10.0], &PlanPolicy::default()).unwrap();
        assert_eq!(seq.exponents(), &[5, 6]);
        assert_eq!(seq.checkpoints(), &[0, 6, 13]);
        assert!(seq.advisories().is_empty());

        let one = build_sequence(&[-7.0], &PlanPolicy::default()).unwrap();
        assert_eq!(one.depth(), 1);
        assert_eq!(one.checkpoints(), &[0, 6]);
    }

    #[test]
    fn build_rejects_bad_input() {
        assert_eq!(
            build_sequence(&[-5.0, -10.0], &PlanPolicy::default()),
            Err(ParamsError::BDomain { stage: 1, value: -5.0 })
        );
        assert_eq!(build_sequence(&[], &PlanPolicy::default()), Err(ParamsError::Empty));
        let err = build_sequence(&[-7.0], &PlanPolicy::explicit(vec![Some(3)])).unwrap_err();
        assert!(matches!(err, ParamsError::OverrideViolation { stage: 1, m: 3, .. }));
        let err = build_sequence(&[-7.0, -10.0], &PlanPolicy::explicit(vec![Some(5)])).unwrap_err();
        assert!(matches!(err, ParamsError::OverrideLength { .. }));
    }

    #[test]
    fn explicit_overrides() {
        let seq = build_sequence(&[-7.0, -10.0], &PlanPolicy::explicit(vec![Some(7), None])).unwrap();
        assert_eq!(seq.exponents(), &[7, 6]);
        assert_eq!(seq.checkpoints(), &[0, 8, 15]);

        let bad = build_sequence(&[-7.0, -10.0], &PlanPolicy::unchecked(&[3, 6])).unwrap();
        assert_eq!(bad.exponents(), &[3, 6]);
        assert!(matches!(bad.advisories()[0], Advisory::BoundViolated { stage: 1, m: 3, .. }));
    }

    #[test]
    fn non_decreasing_b_is_advisory() {
        let seq = build_sequence(&[-10.0, -7.0, -7.0], &PlanPolicy::default()).unwrap();
        assert_eq!(
            seq.advisories(),
            &[Advisory::NotDecreasing { stage: 2 }, Advisory::NotDecreasing { stage: 3 }]
        );
    }

    #[test]
    fn coefficient_layout() {
        let seq = build_sequence(&[-7.0, -10.0], &PlanPolicy::default()).unwrap();
        assert!((seq.coefficient_at(5).unwrap() - -2.6457513).abs() < 1e-7);
        assert_eq!(seq.coefficient_at(6).unwrap(), -7.0);
        assert_eq!(seq.coefficient_at(3).unwrap(), 0.0);
        assert_eq!(seq.coefficient_at(12).unwrap(), seq.a(2));
        assert_eq!(seq.coefficient_at(13).unwrap(), -10.0);
        assert!(seq.coefficient_at(0).is_err());
        assert!(seq.coefficient_at(14).is_err());
    }

    #[test]
    fn stage_lookup() {
        let seq = ParameterSequence::default_demo();
        assert_eq!(seq.checkpoints(), &[0, 6, 13, 20]);
        assert_eq!(seq.stage_of_time(1), 1);
        assert_eq!(seq.stage_of_time(6), 1);
        assert_eq!(seq.stage_of_time(7), 2);
        assert_eq!(seq.first_stage_from(0), 1);
        assert_eq!(seq.first_stage_from(5), 1);
        assert_eq!(seq.first_stage_from(6), 2);
        assert_eq!(seq.first_stage_from(19), 3);
        assert_eq!(seq.first_stage_from(20), 4);
    }

    #[test]
    fn default_sequence_exponents() {
        assert_eq!(ParameterSequence::default_demo().exponents(), &[5, 6, 6]);
    }

    #[test]
    fn json_round_trip() {
        let seq = ParameterSequence::default_demo();
        let text = serde_json::to_string(&seq).unwrap();
        let back: ParameterSequence = serde_json::from_str(&text).unwrap();
        assert_eq!(back, seq);
        let rebuilt = build_sequence(
            back.b_values(),
            &PlanPolicy::explicit(back.exponents().iter().copied().map(Some).collect()),
        )
        .unwrap();
        assert_eq!(rebuilt, seq);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]

            #[test]
            fn minimal_exponent_is_minimal(k in 1usize..40, b in -1.0e6f64..-6.000001) {
                let m = min_block_exponent(k, b).unwrap();
                prop_assert!(BoundMargins::new(k, b, m).satisfied());
                prop_assert!(m == 1 || !BoundMargins::new(k, b, m - 1).satisfied());
            }

            #[test]
            fn contraction_bound_dominates_annulus_bound(b in -1.0e6f64..-6.000001) {
                prop_assert!(contraction_exponent_threshold(b) > annulus_exponent_threshold(b));
            }

            #[test]
            fn preimage_disks_fit_inside_block_image(b in proptest::collection::vec(-1.0e4f64..-6.000001, 1..6)) {
                let seq = build_sequence(&b, &PlanPolicy::default()).unwrap();
                for k in 1..=seq.depth() {
                    let lhs = (seq.m(k) as f64).exp2();
                    let rhs = (seq.a(k).abs() + (seq.b(k).abs() + 2.0).sqrt()).log2();
                    prop_assert!(lhs > rhs);
                    prop_assert_eq!(seq.checkpoint(k) - seq.checkpoint(k - 1), seq.m(k) as u64 + 1);
                }
            }
        }
    }
}

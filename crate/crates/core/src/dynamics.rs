//! Orbits, escape classification and G/H itineraries.
//!
//! Escape is only decided at checkpoint times `M_k`: a point whose orbit has
//! modulus above 2 at a checkpoint escapes to infinity, and one that stays in
//! the closed disk of radius 2 at every checkpoint never does. At the time
//! `M_k - 1` just before each checkpoint a surviving orbit sits in one of the
//! two preimage disks about `+sqrt(-b_k)` (G, right) or `-sqrt(-b_k)` (H, left);
//! the sequence of those sides is the point's itinerary.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::radii;
use crate::params::ParameterSequence;

/// Any orbit point larger than this is treated as escaped immediately.
pub const BAILOUT: f64 = 1e12;

/// Escape radius tested at checkpoints.
pub const ESCAPE_RADIUS: f64 = 2.0;

/// Relative slack on the disk test, to absorb rounding at the disk boundary.
const DISK_TEST_SLACK: f64 = 1e-12;

/// `Q_{m,n}(z) = P_n(...P_{m+1}(z))`; `None` once the orbit passes [`BAILOUT`].
///
/// `Q_{m,m}` is the identity. Times past `M_K` are clamped to `M_K`.
pub fn compose(seq: &ParameterSequence, m: u64, n: u64, z: Complex64) -> Option<Complex64> {
    let n = n.min(seq.final_time());
    let mut w = z;
    for t in m + 1..=n {
        w = w * w + seq.coefficient(t);
        if !(w.norm_sqr() <= BAILOUT * BAILOUT) {
            return None;
        }
    }
    Some(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// Right-hand disk, about `+sqrt(-b_k)`.
    G,
    /// Left-hand disk, about `-sqrt(-b_k)`.
    H,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::G => "G",
            Side::H => "H",
        })
    }
}

/// G/H record of a surviving orbit, one entry per completed stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Itinerary {
    /// Stage number of the first entry.
    pub first_stage: usize,
    pub sides: Vec<Side>,
}

impl Itinerary {
    pub fn new(first_stage: usize, sides: Vec<Side>) -> Self {
        Itinerary { first_stage, sides }
    }

    pub fn len(&self) -> usize {
        self.sides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sides.is_empty()
    }

    /// Side recorded for stage `k`, if that stage is covered.
    pub fn at_stage(&self, k: usize) -> Option<Side> {
        k.checked_sub(self.first_stage)
            .and_then(|i| self.sides.get(i))
            .copied()
    }

    /// Stage of the last G entry.
    pub fn last_g_stage(&self) -> Option<usize> {
        self.sides
            .iter()
            .rposition(|&s| s == Side::G)
            .map(|i| i + self.first_stage)
    }

    /// Bitmask with bit `k - first_stage` set for every G entry.
    pub fn g_mask(&self) -> u64 {
        self.sides
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == Side::G)
            .fold(0u64, |acc, (i, _)| acc | (1u64 << i.min(63)))
    }
}

impl fmt::Display for Itinerary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.sides.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for Itinerary {
    type Err = String;

    /// Parses `"G,H,H"` as an itinerary starting at stage 1.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Itinerary::new(1, Vec::new()));
        }
        let sides = s
            .split(',')
            .map(|p| match p.trim() {
                "G" | "g" => Ok(Side::G),
                "H" | "h" => Ok(Side::H),
                other => Err(format!("not a side: {other:?}")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Itinerary::new(1, sides))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    /// Detected at checkpoint `M_stage`, or by the bailout at `time`.
    Escaped { stage: usize, time: u64, modulus: f64 },
    /// Stayed in the closed 2-disk at every checkpoint up to `depth`.
    Survived { depth: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub status: Status,
    pub itinerary: Itinerary,
    /// Set when a recorded side disagrees with the preimage-disk test.
    pub anomaly: bool,
}

impl Classification {
    pub fn survived(&self) -> bool {
        matches!(self.status, Status::Survived { .. })
    }

    pub fn escape_stage(&self) -> Option<usize> {
        match self.status {
            Status::Escaped { stage, .. } => Some(stage),
            Status::Survived { .. } => None,
        }
    }
}

/// Classify `z` at time `m` up to stage `horizon` (clamped to `K`).
///
/// At each time `M_k - 1` the orbit point's side is recorded by the sign of
/// its real part; once the checkpoint `M_k` is passed the entry is kept and
/// cross-checked against the two radius-`r_k` disks. Entries for a stage whose
/// checkpoint is not survived are dropped.
pub fn classify(seq: &ParameterSequence, z: Complex64, m: u64, horizon: usize) -> Classification {
    let horizon = horizon.min(seq.depth());
    let first_stage = seq.first_stage_from(m);
    let mut itinerary = Itinerary::new(first_stage, Vec::new());
    let mut anomaly = false;

    if first_stage > horizon {
        return Classification {
            status: Status::Survived { depth: horizon },
            itinerary,
            anomaly,
        };
    }

    let mut w = z;
    let mut k = first_stage;
    // Orbit point at time M_k - 1 for the current stage.
    let mut pending: Option<Complex64> = (m + 1 == seq.checkpoint(k)).then_some(w);
    let end = seq.checkpoint(horizon);

    for t in m + 1..=end {
        w = w * w + seq.coefficient(t);
        if !(w.norm_sqr() <= BAILOUT * BAILOUT) {
            return Classification {
                status: Status::Escaped {
                    stage: seq.stage_of_time(t),
                    time: t,
                    modulus: w.norm(),
                },
                itinerary,
                anomaly,
            };
        }
        if t == seq.checkpoint(k) {
            let modulus = w.norm();
            if modulus > ESCAPE_RADIUS {
                return Classification {
                    status: Status::Escaped { stage: k, time: t, modulus },
                    itinerary,
                    anomaly,
                };
            }
            if let Some(p) = pending.take() {
                let (side, ok) = side_of(seq, k, p);
                anomaly |= !ok;
                itinerary.sides.push(side);
            }
            k += 1;
        } else if k <= horizon && t + 1 == seq.checkpoint(k) {
            pending = Some(w);
        }
    }

    Classification {
        status: Status::Survived { depth: horizon },
        itinerary,
        anomaly,
    }
}

/// Side by the sign of the real part, and whether the disk test agrees.
fn side_of(seq: &ParameterSequence, k: usize, w: Complex64) -> (Side, bool) {
    let c = seq.root_b(k);
    let r = radii(seq.b(k)).map(|r| r.r).unwrap_or(0.5);
    let tol = r * (1.0 + DISK_TEST_SLACK);
    let in_g = (w - c).norm() <= tol;
    let in_h = (w + c).norm() <= tol;
    if w.re > 0.0 {
        (Side::G, in_g)
    } else if w.re < 0.0 {
        (Side::H, in_h)
    } else if in_g {
        (Side::G, true)
    } else {
        (Side::H, in_h)
    }
}

/// Largest stage `k <= kmax` whose checkpoint the orbit of `z` from time `m`
/// survives (with every earlier checkpoint); `first_stage - 1` when it escapes
/// at the first checkpoint.
pub fn survival_depth(seq: &ParameterSequence, z: Complex64, m: u64, kmax: usize) -> usize {
    let kmax = kmax.min(seq.depth());
    let first = seq.first_stage_from(m);
    if first > kmax {
        return kmax;
    }
    let mut w = z;
    let mut k = first;
    for t in m + 1..=seq.checkpoint(kmax) {
        w = w * w + seq.coefficient(t);
        if !(w.norm_sqr() <= BAILOUT * BAILOUT) {
            return seq.stage_of_time(t) - 1;
        }
        if t == seq.checkpoint(k) {
            if w.norm() > ESCAPE_RADIUS {
                return k - 1;
            }
            k += 1;
        }
    }
    kmax
}

/// Finite-horizon class of an itinerary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ItineraryClass {
    /// No G entry.
    AllH,
    /// Last G at `joining`, followed by at least `margin` H entries.
    TailH { joining: usize },
    /// A G entry within the last `margin` stages.
    HitsGLate,
    /// Nothing to decide (empty itinerary).
    Mixed,
}

impl ItineraryClass {
    /// AllH and TailH are the thick part; the rest counts as thin.
    pub fn is_thick(&self) -> bool {
        matches!(self, ItineraryClass::AllH | ItineraryClass::TailH { .. })
    }
}

pub const DEFAULT_TAIL_MARGIN: usize = 2;

pub fn itinerary_class(itinerary: &Itinerary, margin: usize) -> ItineraryClass {
    let margin = margin.max(1);
    if itinerary.is_empty() {
        return ItineraryClass::Mixed;
    }
    match itinerary.sides.iter().rposition(|&s| s == Side::G) {
        None => ItineraryClass::AllH,
        Some(i) if itinerary.len() - 1 - i >= margin => ItineraryClass::TailH {
            joining: i + itinerary.first_stage,
        },
        Some(_) => ItineraryClass::HitsGLate,
    }
}

/// Stage of the last G entry, 0 when there is none.
pub fn joining_stage(itinerary: &Itinerary) -> usize {
    itinerary.last_g_stage().unwrap_or(0)
}

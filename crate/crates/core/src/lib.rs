//! Unbounded quadratic polynomial sequences whose iterated Julia sets split
//! into a thick, eventually-left part and a thin part separated by shrinking
//! annuli of growing modulus.
//!
//! * [`params`] builds the sequence `P_t(z) = z^2 + c_t` from stage values.
//! * [`dynamics`] iterates it, decides escape at checkpoints and records G/H
//!   itineraries.
//! * [`geometry`] holds the closed-form radii, the separating annuli and their
//!   pull-backs.
//! * [`verify`] turns each quantitative bound into a reproducible check.
//! * [`render`] classifies pixel grids and writes P6 images.

pub mod dynamics;
pub mod geometry;
pub mod params;
pub mod render;
pub mod verify;

pub use num_complex::Complex64;

pub use dynamics::{classify, compose, itinerary_class, joining_stage, survival_depth};
pub use dynamics::{Classification, Itinerary, ItineraryClass, Side, Status};
pub use geometry::{BranchCode, PulledBackAnnulus, Radii, RoundAnnulus};
pub use params::{build_sequence, ParameterSequence, PlanPolicy};
pub use verify::{CheckReport, CheckStatus};


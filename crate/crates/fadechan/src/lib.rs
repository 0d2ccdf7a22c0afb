//! Transmittance statistics of Gaussian optical beams propagating through
//! atmospheric turbulence onto an annular (Cassegrain-type) receiver
//! aperture.
//!
//! The crate computes, from first principles for the Kolmogorov-Obukhov
//! spectrum, the field correlation functions and channel statistics of a
//! turbulent free-space link, and builds probability distributions of the
//! aperture transmittance (PDTs) under three channel models:
//!
//! * **beam wandering** - a rigid Gaussian beam with a randomly deflected
//!   centroid;
//! * **elliptic beam** - random centroid plus random elliptic deformation
//!   and orientation of the beam spot;
//! * **weak beam wandering** - a conditional bivariate log-normal model for
//!   the two partial (disk) transmittances, combined by the law of total
//!   probability; appropriate for long links.
//!
//! Aim-point offset, tip-tilt tracking, and deterministic attenuation enter
//! as corrections common to all three models. The `fadechan` binary drives
//! everything from JSON scenario files and writes canonical CSV/JSON
//! outputs.

pub mod aperture;
pub mod error;
pub mod numerics;
pub mod pdt;
pub mod run;
pub mod scenario;
pub mod turbulence;

pub use error::{Error, Result};

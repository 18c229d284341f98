//! Label-distribution-learning laboratory.
//!
//! * [`nn`]: a small deterministic network engine with soft-target training.
//! * [`labelgen`]: supervision targets: hard, smoothed, distilled, teacher
//!   soft labels (single, ensemble, multi-teacher, offline and online), MC
//!   dropout labels and per-class OGR weights.
//! * [`augment`]: label-coupled batch blending (mixup, CutMix, RICAP).
//! * [`calib`]: reliability bins, ECE, UCE, NLL, Brier, temperature
//!   scaling and per-class profiles.
//! * [`harness`]: synthetic data, teacher banks, the experiment runner and
//!   report export.

pub mod augment;
mod binio;
pub mod calib;
pub mod error;
pub mod harness;
pub mod labelgen;
pub mod nn;
pub mod rng;

pub use error::{LdlError, Result};
pub use rng::Prng;

//! Exponential-family deep learning laboratory.
//!
//! * [`expfam`]: exponential families, Bregman losses, KL, samplers.
//! * [`net`]: explicit ReLU networks, sizing rule, serialization.
//! * [`train`]: empirical Bregman risk minimization by backpropagation.
//! * [`approx`]: explicit ReLU approximation of Hölder functions.
//! * [`dimension`]: box-counting and mass-cover dimension estimates.
//! * [`synth`]: explanatory distributions, Hölder targets, packings, datasets.
//! * [`harness`]: rate sweeps and separation checks.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod dimension;
pub mod error;
pub mod expfam;
pub mod harness;
pub mod net;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use expfam::{ExpFamily, FamilyKind};
pub use net::{FinalActivation, ReluNet, SizingRule};

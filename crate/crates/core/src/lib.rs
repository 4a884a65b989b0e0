//! Gradient methods for phase retrieval, low-rank matrix completion and blind
//! deconvolution, together with spectral initializations, leave-one-out
//! sequences, landscape checks and an experiment harness.

// `!(x >= 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blind_deconvolution;
pub mod ensembles;
pub mod error;
pub mod harness;
pub mod landscape;
pub mod leave_one_out;
pub mod matrix_completion;
pub mod numlin;
pub mod phase_retrieval;

pub use error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;

//! Synthesis of noisy reverberant speech mixtures at controlled dataset
//! sizes, and intrusive evaluation of enhanced outputs.

// `!(x > 0.0)` is used on purpose: NaN must fail range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod catalog;
pub mod dsp;
pub mod error;
pub mod metrics;
pub mod renderer;
pub mod resample;
pub mod sampler;
pub mod schedule;
pub mod seed;
pub mod synth;
pub mod wav;

pub use audio::{AudioBuffer, Brir};
pub use error::{Error, Result};

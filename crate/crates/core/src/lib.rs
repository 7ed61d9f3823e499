//! Wideband multiuser hybrid beamforming link simulator.
//!
//! Numerical code is generic over the real scalar (`f32` or `f64`); the
//! `*64`/`*32` aliases below pick a precision.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod beamselect;
pub mod channel;
pub mod codebook;
pub mod config;
pub mod digital;
pub mod error;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod signal;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::{Real, C, CMatrix, CVector};

pub use beamselect::ScenarioMode;
pub use channel::ChannelTensor;
pub use config::RunConfig;
pub use signal::EstimatorModel;

pub type Scenario64 = sim::Scenario<f64>;
pub type Scenario32 = sim::Scenario<f32>;
pub type ChannelTensor64 = channel::ChannelTensor<f64>;
pub type ChannelTensor32 = channel::ChannelTensor<f32>;
pub type CodebookSet64 = codebook::CodebookSet<f64>;
pub type CodebookSet32 = codebook::CodebookSet<f32>;

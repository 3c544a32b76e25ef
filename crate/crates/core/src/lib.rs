//! Simulation and optimization toolkit for asynchronous SGD whose delays
//! depend on the data being processed.
//!
//! A parameter server applies each arriving gradient immediately. Workers
//! are heterogeneous and the delay of a gradient is coupled to the group of
//! the sample it was computed on, so slow samples systematically arrive stale.
//! The crate provides
//!
//! * [`objective`]: synthetic objectives with exact smoothness constants,
//!   minimizers and sample-based stochastic gradients;
//! * [`delay`]: the geometric-arrival delay model with group assignment;
//! * [`optim`]: ordered momentum, ordered μ²-SGD and five baselines as pure
//!   step functions;
//! * [`simulator`]: the deterministic event loop producing a [`simulator::RunTrace`];
//! * [`analysis`]: independent oracles (unrolled momentum, delay bias) and
//!   convergence / F1 metrics;
//! * [`experiment`]: config-driven runs, sweeps, reports and the invariant
//!   suite behind the `ordered-async` binary.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod delay;
mod error;
pub mod experiment;
pub mod objective;
pub mod optim;
pub mod simulator;

pub use error::{Error, Result};

/// Dense real vector used for iterates and gradients.
pub type Vector = nalgebra::DVector<f64>;

//! Server-side update rules.
//!
//! Every state is immutable-in/immutable-out: `step` consumes one worker
//! report and returns the next state. The iteration counter inside the state
//! is the index `t` of the update about to be applied, and a report must carry
//! `τ_t = t − k` for its dispatch index `k`.

mod baseline;
mod ordered_momentum;
mod ordered_mu2;
mod params;
mod spec;

pub use baseline::{BaselineMethod, BaselineState, DelayAdaptiveRule};
pub use ordered_momentum::OrderedMomentumState;
#[doc(hidden)]
pub use ordered_momentum::StalenessWeighting;
pub use ordered_mu2::{Mu2Weighting, OrderedMu2State};
pub use params::{
    ordered_weight, theorem1_params, theorem2_step_window, MomentumParams, StepWindow,
};
pub use spec::{BuildContext, MethodSpec};

use crate::delay::Component;
use crate::error::{Error, Result};
use crate::Vector;

/// Payload returned by a worker.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayedGradientReport {
    pub worker_id: usize,
    /// Index `k` of the model snapshot the gradient was computed on.
    pub dispatch_iteration: usize,
    /// `τ_t = t − k`.
    pub delay: usize,
    pub component: Component,
    /// `∇f(x_k; z)`.
    pub gradient: Vector,
    /// `∇f(x_{k−1}; z)` on the same sample, for STORM-type estimators.
    pub prev_gradient: Option<Vector>,
}

impl DelayedGradientReport {
    pub fn new(
        worker_id: usize,
        dispatch_iteration: usize,
        delay: usize,
        component: Component,
        gradient: Vector,
    ) -> Self {
        Self {
            worker_id,
            dispatch_iteration,
            delay,
            component,
            gradient,
            prev_gradient: None,
        }
    }

    pub fn with_prev_gradient(mut self, prev: Option<Vector>) -> Self {
        self.prev_gradient = prev;
        self
    }

    pub(crate) fn check(&self, iteration: usize, dim: usize) -> Result<()> {
        let k = self.dispatch_iteration;
        if k == 0 || k > iteration || iteration - k != self.delay {
            return Err(Error::Protocol(format!(
                "report dispatched at {k} with delay {} cannot apply at iteration {iteration}",
                self.delay
            )));
        }
        if self.gradient.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: self.gradient.len(),
            });
        }
        Ok(())
    }
}

/// Any of the seven update rules behind one interface.
#[derive(Clone, Debug, PartialEq)]
pub enum Optimizer {
    OrderedMomentum(OrderedMomentumState),
    OrderedMu2(OrderedMu2State),
    Baseline(BaselineState),
}

impl Optimizer {
    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::OrderedMomentum(_) => "ordered-momentum",
            Optimizer::OrderedMu2(_) => "ordered-mu2",
            Optimizer::Baseline(b) => b.method().name(),
        }
    }

    pub fn step(&self, report: &DelayedGradientReport) -> Result<Self> {
        Ok(match self {
            Optimizer::OrderedMomentum(s) => Optimizer::OrderedMomentum(s.step(report)?),
            Optimizer::OrderedMu2(s) => Optimizer::OrderedMu2(s.step(report)?),
            Optimizer::Baseline(s) => Optimizer::Baseline(s.step(report)?),
        })
    }

    /// The model sent to workers (`x_t`).
    pub fn query_point(&self) -> &Vector {
        match self {
            Optimizer::OrderedMomentum(s) => s.iterate(),
            Optimizer::OrderedMu2(s) => s.averaged_iterate(),
            Optimizer::Baseline(s) => s.iterate(),
        }
    }

    pub fn iteration(&self) -> usize {
        match self {
            Optimizer::OrderedMomentum(s) => s.iteration(),
            Optimizer::OrderedMu2(s) => s.iteration(),
            Optimizer::Baseline(s) => s.iteration(),
        }
    }

    /// Whether workers must also return `∇f(x_{k−1}; z)`.
    pub fn needs_paired_gradient(&self) -> bool {
        match self {
            Optimizer::OrderedMu2(_) => true,
            Optimizer::Baseline(b) => matches!(b.method(), BaselineMethod::NaiveMu2 { .. }),
            Optimizer::OrderedMomentum(_) => false,
        }
    }

    /// Momentum-type buffer: `m_t`, `q_t = α_t d_t`, or `d_t`.
    pub fn buffer(&self) -> Option<&Vector> {
        match self {
            Optimizer::OrderedMomentum(s) => Some(s.momentum()),
            Optimizer::OrderedMu2(s) => Some(s.weighted_momentum()),
            Optimizer::Baseline(s) => s.momentum(),
        }
    }

    /// Descent iterate `w_t` for the two-sequence methods.
    pub fn descent_iterate(&self) -> Option<&Vector> {
        match self {
            Optimizer::OrderedMu2(s) => Some(s.descent_iterate()),
            Optimizer::Baseline(s) => s.descent_iterate(),
            Optimizer::OrderedMomentum(_) => None,
        }
    }
}

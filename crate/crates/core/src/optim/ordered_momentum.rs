use crate::error::{Error, Result};
use crate::Vector;

use super::params::ordered_weight;
use super::DelayedGradientReport;

#[doc(hidden)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StalenessWeighting {
    #[default]
    Ordered,
    /// Deliberately wrong weight `β(1−β)^{τ+1}`; used to check that the
    /// invariant suite notices a broken update rule.
    OffByOne,
}

/// Server state for asynchronous momentum with ordered weights.
///
/// A gradient computed at iteration `k` and applied at iteration `t` enters
/// the buffer with weight `β(1−β)^{t−k}`, exactly the weight it would have had
/// in the single-worker exponential moving average.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderedMomentumState {
    iterate: Vector,
    momentum: Vector,
    step_size: f64,
    momentum_param: f64,
    first_index_consumed: bool,
    iteration: usize,
    weighting: StalenessWeighting,
}

impl OrderedMomentumState {
    pub fn new(initial: Vector, step_size: f64, momentum_param: f64) -> Result<Self> {
        if !(step_size > 0.0) || !step_size.is_finite() {
            return Err(Error::config("method.eta", "must be positive"));
        }
        if !(momentum_param > 0.0 && momentum_param <= 1.0) {
            return Err(Error::config("method.beta", "must lie in (0, 1]"));
        }
        let d = initial.len();
        Ok(Self {
            iterate: initial,
            momentum: Vector::zeros(d),
            step_size,
            momentum_param,
            first_index_consumed: false,
            iteration: 1,
            weighting: StalenessWeighting::Ordered,
        })
    }

    /// Resumes from an explicit buffer at iteration `iteration`.
    pub fn from_parts(
        iterate: Vector,
        momentum: Vector,
        step_size: f64,
        momentum_param: f64,
        iteration: usize,
    ) -> Result<Self> {
        if iterate.len() != momentum.len() {
            return Err(Error::DimensionMismatch {
                expected: iterate.len(),
                actual: momentum.len(),
            });
        }
        let mut s = Self::new(iterate, step_size, momentum_param)?;
        s.momentum = momentum;
        s.iteration = iteration.max(1);
        s.first_index_consumed = iteration > 1;
        Ok(s)
    }

    #[doc(hidden)]
    pub fn with_weighting(mut self, weighting: StalenessWeighting) -> Self {
        self.weighting = weighting;
        self
    }

    pub fn iterate(&self) -> &Vector {
        &self.iterate
    }

    pub fn momentum(&self) -> &Vector {
        &self.momentum
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn momentum_param(&self) -> f64 {
        self.momentum_param
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn first_index_consumed(&self) -> bool {
        self.first_index_consumed
    }

    fn weight(&self, delay: usize) -> f64 {
        match self.weighting {
            StalenessWeighting::Ordered => ordered_weight(self.momentum_param, delay),
            StalenessWeighting::OffByOne => ordered_weight(self.momentum_param, delay + 1),
        }
    }

    /// Applies one arriving gradient: `m_t = β(1−β)^{τ_t} g_{t−τ_t} + (1−β) m_{t−1}`,
    /// then `x_{t+1} = x_t − η m_t`.
    ///
    /// Gradients dispatched at iteration 1 after the first one has been used
    /// are replaced by zero.
    pub fn step(&self, report: &DelayedGradientReport) -> Result<Self> {
        let t = self.iteration;
        report.check(t, self.iterate.len())?;
        let mut next = self.clone();
        let beta = self.momentum_param;
        next.momentum *= 1.0 - beta;
        let duplicate_first = report.dispatch_iteration == 1 && (t > 1 || self.first_index_consumed);
        if !duplicate_first {
            next.momentum.axpy(self.weight(report.delay), &report.gradient, 1.0);
        }
        if report.dispatch_iteration == 1 {
            next.first_index_consumed = true;
        }
        next.iterate.axpy(-self.step_size, &next.momentum, 1.0);
        next.iteration = t + 1;
        Ok(next)
    }
}

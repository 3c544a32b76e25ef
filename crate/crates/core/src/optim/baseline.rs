use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vector;

use super::DelayedGradientReport;

/// Per-iteration step size `η_t = c · min{1/(Lτ_t), 1/(LM), √(Δ/(Lσ²T))}`.
///
/// The `1/(Lτ_t)` term is skipped when `τ_t = 0` and the noise term when
/// `σ = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayAdaptiveRule {
    pub scale: f64,
    pub smoothness: Option<f64>,
    pub workers: Option<usize>,
    pub delta_gap: Option<f64>,
    pub sigma: Option<f64>,
    pub horizon: Option<usize>,
}

impl DelayAdaptiveRule {
    fn require<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
        v.ok_or_else(|| Error::config(format!("method.{name}"), "required by delay-adaptive SGD"))
    }

    pub fn validate(&self) -> Result<()> {
        self.step_size(0).map(|_| ())
    }

    pub fn step_size(&self, delay: usize) -> Result<f64> {
        let l = Self::require(self.smoothness, "smoothness")?;
        let m = Self::require(self.workers, "workers")?;
        let delta = Self::require(self.delta_gap, "delta_gap")?;
        let sigma = Self::require(self.sigma, "sigma")?;
        let horizon = Self::require(self.horizon, "horizon")?;
        if !(l > 0.0) || m == 0 || !(delta > 0.0) || !(sigma >= 0.0) || horizon == 0 {
            return Err(Error::config(
                "method",
                "delay-adaptive constants must be positive",
            ));
        }
        if !(self.scale > 0.0) {
            return Err(Error::config("method.scale", "must be positive"));
        }
        let mut eta = 1.0 / (l * m as f64);
        if delay > 0 {
            eta = eta.min(1.0 / (l * delay as f64));
        }
        if sigma > 0.0 {
            eta = eta.min((delta / (l * sigma * sigma * horizon as f64)).sqrt());
        }
        Ok(self.scale * eta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BaselineMethod {
    /// `x_{t+1} = x_t − η g_{t−τ_t}`.
    Vanilla { step_size: f64 },
    DelayAdaptive(DelayAdaptiveRule),
    /// Vanilla SGD that drops every gradient with `τ_t > max_delay`.
    DelayFiltered { step_size: f64, max_delay: f64 },
    /// `m_t = β g_{t−τ_t} + (1−β) m_{t−1}` regardless of staleness.
    NaiveMomentum { step_size: f64, beta: f64 },
    /// Constant-parameter μ²-SGD fed with stale pairs:
    /// `d_t = g + (1−β)(d_{t−1} − g̃)`, `w ← w − η d_t`, `x ← γw + (1−γ)x`.
    NaiveMu2 { step_size: f64, beta: f64, gamma: f64 },
}

impl BaselineMethod {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineMethod::Vanilla { .. } => "vanilla",
            BaselineMethod::DelayAdaptive(_) => "delay-adaptive",
            BaselineMethod::DelayFiltered { .. } => "delay-filtered",
            BaselineMethod::NaiveMomentum { .. } => "naive-momentum",
            BaselineMethod::NaiveMu2 { .. } => "naive-mu2",
        }
    }

    fn validate(&self) -> Result<()> {
        let step = |eta: f64| {
            if eta > 0.0 && eta.is_finite() {
                Ok(())
            } else {
                Err(Error::config("method.eta", "must be positive"))
            }
        };
        let unit = |v: f64, name: &str| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::config(format!("method.{name}"), "must lie in (0, 1]"))
            }
        };
        match self {
            BaselineMethod::Vanilla { step_size } => step(*step_size),
            BaselineMethod::DelayAdaptive(rule) => rule.validate(),
            BaselineMethod::DelayFiltered {
                step_size,
                max_delay,
            } => {
                step(*step_size)?;
                if *max_delay >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::config("method.max_delay", "must be nonnegative"))
                }
            }
            BaselineMethod::NaiveMomentum { step_size, beta } => {
                step(*step_size)?;
                unit(*beta, "beta")
            }
            BaselineMethod::NaiveMu2 {
                step_size,
                beta,
                gamma,
            } => {
                step(*step_size)?;
                unit(*beta, "beta")?;
                unit(*gamma, "gamma")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineState {
    method: BaselineMethod,
    iterate: Vector,
    momentum: Option<Vector>,
    descent: Option<Vector>,
    iteration: usize,
    applied_updates: usize,
}

impl BaselineState {
    pub fn new(method: BaselineMethod, initial: Vector) -> Result<Self> {
        method.validate()?;
        let d = initial.len();
        let (momentum, descent) = match method {
            BaselineMethod::NaiveMomentum { .. } => (Some(Vector::zeros(d)), None),
            BaselineMethod::NaiveMu2 { .. } => (Some(Vector::zeros(d)), Some(initial.clone())),
            _ => (None, None),
        };
        Ok(Self {
            method,
            iterate: initial,
            momentum,
            descent,
            iteration: 1,
            applied_updates: 0,
        })
    }

    pub fn method(&self) -> &BaselineMethod {
        &self.method
    }

    /// Point at which workers evaluate gradients.
    pub fn iterate(&self) -> &Vector {
        &self.iterate
    }

    pub fn momentum(&self) -> Option<&Vector> {
        self.momentum.as_ref()
    }

    pub fn descent_iterate(&self) -> Option<&Vector> {
        self.descent.as_ref()
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Number of reports that changed the iterate.
    pub fn applied_updates(&self) -> usize {
        self.applied_updates
    }

    pub fn step(&self, report: &DelayedGradientReport) -> Result<Self> {
        let t = self.iteration;
        report.check(t, self.iterate.len())?;
        let mut next = self.clone();
        next.iteration = t + 1;
        let g = &report.gradient;
        match &self.method {
            BaselineMethod::Vanilla { step_size } => {
                next.iterate.axpy(-step_size, g, 1.0);
            }
            BaselineMethod::DelayAdaptive(rule) => {
                let eta = rule.step_size(report.delay)?;
                next.iterate.axpy(-eta, g, 1.0);
            }
            BaselineMethod::DelayFiltered {
                step_size,
                max_delay,
            } => {
                if report.delay as f64 > *max_delay {
                    return Ok(next);
                }
                next.iterate.axpy(-step_size, g, 1.0);
            }
            BaselineMethod::NaiveMomentum { step_size, beta } => {
                let m = next.momentum.as_mut().expect("momentum buffer");
                *m *= 1.0 - beta;
                m.axpy(*beta, g, 1.0);
                next.iterate.axpy(-step_size, m, 1.0);
            }
            BaselineMethod::NaiveMu2 {
                step_size,
                beta,
                gamma,
            } => {
                let prev = match (&report.prev_gradient, report.dispatch_iteration) {
                    (_, 1) => None,
                    (Some(p), _) => Some(p),
                    (None, k) => {
                        return Err(Error::Protocol(format!(
                            "report for dispatch {k} lacks the previous-iterate gradient"
                        )))
                    }
                };
                let d = next.momentum.as_mut().expect("storm buffer");
                if let Some(p) = prev {
                    d.axpy(-1.0, p, 1.0);
                }
                *d *= 1.0 - beta;
                *d += g;
                let w = next.descent.as_mut().expect("descent iterate");
                w.axpy(-step_size, d, 1.0);
                next.iterate = &*w * *gamma + &self.iterate * (1.0 - gamma);
            }
        }
        next.applied_updates += 1;
        Ok(next)
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{BallDomain, TheoryConstants};
use crate::Vector;

use super::baseline::{BaselineMethod, BaselineState, DelayAdaptiveRule};
use super::ordered_momentum::OrderedMomentumState;
use super::ordered_mu2::{Mu2Weighting, OrderedMu2State};
use super::params::theorem1_params;
use super::Optimizer;

/// Config-file description of an update rule.
///
/// Omitted `eta`/`beta` on the ordered methods fall back to the theory-driven
/// values (ordered momentum: the nonconvex `(β, η)` pair; ordered μ²-SGD:
/// `η = 1/(4LT)`). Omitted delay-adaptive constants are filled from the
/// objective's closed-form constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MethodSpec {
    OrderedMomentum {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
    /// Anytime weighting unless both `beta` and `gamma` are given.
    OrderedMu2 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    Vanilla {
        eta: f64,
    },
    DelayAdaptive {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        smoothness: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta_gap: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
    },
    DelayFiltered {
        eta: f64,
        max_delay: f64,
    },
    NaiveMomentum {
        eta: f64,
        beta: f64,
    },
    NaiveMu2 {
        eta: f64,
        beta: f64,
        gamma: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// Problem data an optimizer needs beyond its `MethodSpec`.
#[derive(Clone, Debug)]
pub struct BuildContext<'a> {
    pub initial: &'a Vector,
    pub constants: &'a TheoryConstants,
    pub horizon: usize,
    pub workers: usize,
    pub domain: Option<&'a BallDomain>,
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::OrderedMomentum { .. } => "ordered-momentum",
            MethodSpec::OrderedMu2 { .. } => "ordered-mu2",
            MethodSpec::Vanilla { .. } => "vanilla",
            MethodSpec::DelayAdaptive { .. } => "delay-adaptive",
            MethodSpec::DelayFiltered { .. } => "delay-filtered",
            MethodSpec::NaiveMomentum { .. } => "naive-momentum",
            MethodSpec::NaiveMu2 { .. } => "naive-mu2",
        }
    }

    /// The step-size knob swept by grids (`scale` for delay-adaptive).
    pub fn eta(&self) -> Option<f64> {
        match self {
            MethodSpec::OrderedMomentum { eta, .. } | MethodSpec::OrderedMu2 { eta, .. } => *eta,
            MethodSpec::Vanilla { eta }
            | MethodSpec::DelayFiltered { eta, .. }
            | MethodSpec::NaiveMomentum { eta, .. }
            | MethodSpec::NaiveMu2 { eta, .. } => Some(*eta),
            MethodSpec::DelayAdaptive { scale, .. } => Some(*scale),
        }
    }

    pub fn with_eta(mut self, value: f64) -> Self {
        match &mut self {
            MethodSpec::OrderedMomentum { eta, .. } | MethodSpec::OrderedMu2 { eta, .. } => {
                *eta = Some(value)
            }
            MethodSpec::Vanilla { eta }
            | MethodSpec::DelayFiltered { eta, .. }
            | MethodSpec::NaiveMomentum { eta, .. }
            | MethodSpec::NaiveMu2 { eta, .. } => *eta = value,
            MethodSpec::DelayAdaptive { scale, .. } => *scale = value,
        }
        self
    }

    pub fn uses_beta(&self) -> bool {
        matches!(
            self,
            MethodSpec::OrderedMomentum { .. }
                | MethodSpec::NaiveMomentum { .. }
                | MethodSpec::NaiveMu2 { .. }
                | MethodSpec::OrderedMu2 { beta: Some(_), .. }
        )
    }

    pub fn with_beta(mut self, value: f64) -> Self {
        match &mut self {
            MethodSpec::OrderedMomentum { beta, .. } | MethodSpec::OrderedMu2 { beta, .. } => {
                *beta = Some(value)
            }
            MethodSpec::NaiveMomentum { beta, .. } | MethodSpec::NaiveMu2 { beta, .. } => {
                *beta = value
            }
            _ => {}
        }
        self
    }

    pub fn uses_gamma(&self) -> bool {
        matches!(
            self,
            MethodSpec::NaiveMu2 { .. } | MethodSpec::OrderedMu2 { gamma: Some(_), .. }
        )
    }

    pub fn with_gamma(mut self, value: f64) -> Self {
        match &mut self {
            MethodSpec::OrderedMu2 { gamma, .. } => *gamma = Some(value),
            MethodSpec::NaiveMu2 { gamma, .. } => *gamma = value,
            _ => {}
        }
        self
    }

    pub fn uses_max_delay(&self) -> bool {
        matches!(self, MethodSpec::DelayFiltered { .. })
    }

    pub fn with_max_delay(mut self, value: f64) -> Self {
        if let MethodSpec::DelayFiltered { max_delay, .. } = &mut self {
            *max_delay = value;
        }
        self
    }

    pub fn build(&self, ctx: &BuildContext<'_>) -> Result<Optimizer> {
        let x1 = ctx.initial.clone();
        let theory_pair = || -> Result<(f64, f64)> {
            let c = ctx.constants;
            let p = theorem1_params(
                c.smoothness,
                c.delta_gap()?,
                c.sigma()?,
                ctx.horizon,
                ctx.workers,
            )?;
            Ok((p.eta, p.beta))
        };
        Ok(match self {
            MethodSpec::OrderedMomentum { eta, beta } => {
                let (eta, beta) = match (eta, beta) {
                    (Some(e), Some(b)) => (*e, *b),
                    (e, b) => {
                        let (te, tb) = theory_pair()?;
                        (e.unwrap_or(te), b.unwrap_or(tb))
                    }
                };
                Optimizer::OrderedMomentum(OrderedMomentumState::new(x1, eta, beta)?)
            }
            MethodSpec::OrderedMu2 { eta, beta, gamma } => {
                let weighting = match (beta, gamma) {
                    (None, None) => Mu2Weighting::Anytime,
                    (Some(beta), Some(gamma)) => Mu2Weighting::Constant {
                        beta: *beta,
                        gamma: *gamma,
                    },
                    _ => {
                        return Err(Error::config(
                            "method",
                            "ordered-mu2 needs both `beta` and `gamma` or neither",
                        ))
                    }
                };
                let eta = match (eta, weighting) {
                    (Some(e), _) => *e,
                    (None, Mu2Weighting::Anytime) => {
                        1.0 / (4.0 * ctx.constants.smoothness * ctx.horizon as f64)
                    }
                    (None, _) => return Err(Error::config("method.eta", "required")),
                };
                Optimizer::OrderedMu2(OrderedMu2State::new(x1, eta, weighting, ctx.domain.cloned())?)
            }
            MethodSpec::Vanilla { eta } => Optimizer::Baseline(BaselineState::new(
                BaselineMethod::Vanilla { step_size: *eta },
                x1,
            )?),
            MethodSpec::DelayAdaptive {
                scale,
                smoothness,
                delta_gap,
                sigma,
            } => {
                let c = ctx.constants;
                let rule = DelayAdaptiveRule {
                    scale: *scale,
                    smoothness: Some(smoothness.unwrap_or(c.smoothness)),
                    workers: Some(ctx.workers),
                    delta_gap: delta_gap.or(c.delta_gap),
                    sigma: sigma.or(c.sigma),
                    horizon: Some(ctx.horizon),
                };
                Optimizer::Baseline(BaselineState::new(BaselineMethod::DelayAdaptive(rule), x1)?)
            }
            MethodSpec::DelayFiltered { eta, max_delay } => Optimizer::Baseline(BaselineState::new(
                BaselineMethod::DelayFiltered {
                    step_size: *eta,
                    max_delay: *max_delay,
                },
                x1,
            )?),
            MethodSpec::NaiveMomentum { eta, beta } => Optimizer::Baseline(BaselineState::new(
                BaselineMethod::NaiveMomentum {
                    step_size: *eta,
                    beta: *beta,
                },
                x1,
            )?),
            MethodSpec::NaiveMu2 { eta, beta, gamma } => Optimizer::Baseline(BaselineState::new(
                BaselineMethod::NaiveMu2 {
                    step_size: *eta,
                    beta: *beta,
                    gamma: *gamma,
                },
                x1,
            )?),
        })
    }
}

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::delay::DelaySpec;
use crate::error::{Error, Result};
use crate::objective::{DomainSpec, Objective, ObjectiveSpec};
use crate::optim::{BuildContext, MethodSpec};
use crate::Vector;

use super::{default_snapshot_stride, Simulation};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordOptions {
    /// Keep raw gradients, pending sets and buffers for every step.
    #[serde(default)]
    pub details: bool,
}

/// One simulated run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub objective: ObjectiveSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    pub delay: DelaySpec,
    pub method: MethodSpec,
    /// `T`, the number of applied updates.
    pub iterations: usize,
    /// `M`.
    pub workers: usize,
    pub seed: u64,
    /// Defaults to `⌈T / 1000⌉`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_stride: Option<usize>,
    /// `x₁`; defaults to the domain center, else the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_point: Option<Vec<f64>>,
    /// Share of final iterates averaged into `tail_average`.
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
    #[serde(default)]
    pub record: RecordOptions,
}

fn default_tail_fraction() -> f64 {
    0.1
}

impl SimConfig {
    /// Digest of every field except `seed`.
    pub fn config_hash(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        if let Some(map) = value.as_object_mut() {
            map.remove("seed");
        }
        Ok(hex::encode(Sha256::digest(value.to_string().as_bytes())))
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn build(&self) -> Result<Simulation> {
        if self.workers == 0 {
            return Err(Error::config("workers", "must be positive"));
        }
        if self.iterations < self.workers {
            return Err(Error::config(
                "iterations",
                format!("T = {} must be at least M = {}", self.iterations, self.workers),
            ));
        }
        if self.snapshot_stride == Some(0) {
            return Err(Error::config("snapshot_stride", "must be positive"));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(Error::config("tail_fraction", "must lie in (0, 1]"));
        }
        let objective = self.objective.build()?;
        let delay = self.delay.build(self.workers)?;
        check_group_weights(&objective, self.delay.slow_weight)?;

        let domain = self.domain.as_ref().map(|d| d.build()).transpose()?;
        let dim = objective.dim();
        if let Some(d) = &domain {
            if d.dim() != dim {
                return Err(Error::config(
                    "domain.center",
                    format!("dimension {} does not match objective dimension {dim}", d.dim()),
                ));
            }
        }
        let initial = match (&self.initial_point, &domain) {
            (Some(x), _) => Vector::from_column_slice(x),
            (None, Some(d)) => d.center().clone(),
            (None, None) => Vector::zeros(dim),
        };
        if initial.len() != dim {
            return Err(Error::config(
                "initial_point",
                format!("expected {dim} entries, got {}", initial.len()),
            ));
        }
        let constants = objective.theory_constants(&initial)?;
        if let (Some(d), Some(xs)) = (&domain, &constants.minimizer) {
            if !d.contains(xs, 1e-9) {
                return Err(Error::config("domain", "the objective's minimizer lies outside the ball"));
            }
        }
        let ctx = BuildContext {
            initial: &initial,
            constants: &constants,
            horizon: self.iterations,
            workers: self.workers,
            domain: domain.as_ref(),
        };
        let optimizer = self.method.build(&ctx).map_err(|e| match e {
            Error::InvalidConfig { field, reason } if !field.starts_with("method") => {
                Error::config(format!("method.{field}"), reason)
            }
            Error::UnsupportedObjective(what) => Error::config(
                "method",
                format!("default hyperparameters need {what}; set them explicitly"),
            ),
            other => other,
        })?;
        Ok(Simulation {
            objective,
            delay,
            optimizer,
            iterations: self.iterations,
            seed: self.seed,
            snapshot_stride: self
                .snapshot_stride
                .unwrap_or_else(|| default_snapshot_stride(self.iterations)),
            tail_fraction: self.tail_fraction,
            record: self.record,
            config_hash: self.config_hash()?,
        })
    }
}

/// The delay model must route samples in the objective's own proportions.
fn check_group_weights(objective: &Objective, slow_weight: f64) -> Result<()> {
    let Some(weights) = objective.group_weights() else {
        return Ok(());
    };
    let tolerance = match objective {
        Objective::Logistic(l) => 1.0 / l.num_samples() as f64,
        _ => 1e-9,
    };
    if (weights[0] - slow_weight).abs() > tolerance {
        return Err(Error::config(
            "delay.slow_weight",
            format!(
                "is {slow_weight} but the objective's slow group has weight {}",
                weights[0]
            ),
        ));
    }
    Ok(())
}

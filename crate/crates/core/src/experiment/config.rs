use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::delay::DelaySpec;
use crate::error::{Error, Result};
use crate::objective::{DomainSpec, ObjectiveSpec};
use crate::optim::{theorem2_step_window, MethodSpec};
use crate::simulator::{RecordOptions, SimConfig};
use crate::Vector;

use super::report::Check;

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "ASYNC_ORDERED_OUT";

/// Top-level experiment document (TOML).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub problem: ProblemConfig,
    pub objective: ObjectiveSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    pub delay: DelaySpec,
    pub methods: Vec<MethodSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub report: ReportConfig,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub iterations: usize,
    pub workers: usize,
    #[serde(default = "one")]
    pub seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_stride: Option<usize>,
    #[serde(default = "tail")]
    pub tail_fraction: f64,
    /// Also write the strided iterate snapshots per run.
    #[serde(default)]
    pub write_snapshots: bool,
}

fn one() -> usize {
    1
}

fn tail() -> f64 {
    0.1
}

/// Step-size axis of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum EtaAxis {
    Values(Vec<f64>),
    /// `points` log-spaced values in `[min, max]`.
    Log { min: f64, max: f64, points: usize },
    /// `points` log-spaced values across the convex step-size window computed
    /// from the objective's constants and the domain diameter.
    Window {
        points: usize,
        #[serde(default = "unit")]
        constant: f64,
    },
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<EtaAxis>,
    /// Apply each grid value as `η·T` to every method except ordered-mu2, whose
    /// anytime weights scale its step by `α_t = t`.
    #[serde(default)]
    pub effective_step: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gamma: Vec<f64>,
    /// Delay-filter thresholds as multiples of `M`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub max_delay_factors: Vec<f64>,
    /// Worker threads; 0 uses all cores.
    #[serde(default)]
    pub parallelism: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
}

/// One method with every hyperparameter fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    /// Position of the method in `methods`.
    pub method_index: usize,
    pub method: MethodSpec,
    /// Grid coordinate before any `effective_step` scaling.
    pub eta: Option<f64>,
}

/// One (grid point, seed) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub grid: GridPoint,
    pub seed_index: usize,
    pub config: SimConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let field = e.message().split('`').nth(1).unwrap_or("config").to_string();
            Error::config(field, e.to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// `output_dir`, unless the override variable is set.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }

    /// Checks the document. With a `sweep` section the swept grid is
    /// validated, so methods may leave swept fields at a placeholder.
    pub fn validate(&self) -> Result<()> {
        self.validate_grid(self.sweep.is_some())
    }

    /// Builds the seed-0 run of every grid point of `run` (`sweep = false`)
    /// or `sweep`, reporting the first invalid field.
    pub fn validate_grid(&self, sweep: bool) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::config("methods", "at least one method is required"));
        }
        if self.problem.seeds == 0 {
            return Err(Error::config("problem.seeds", "must be positive"));
        }
        for run in self.expand(sweep)?.iter().filter(|r| r.seed_index == 0) {
            run.config.build().map_err(|e| match e {
                Error::InvalidConfig { field, reason } => {
                    let prefix = if let Some(rest) = field.strip_prefix("method") {
                        format!("methods[{}]{rest}", run.grid.method_index)
                    } else if ["iterations", "workers", "snapshot_stride", "initial_point", "tail_fraction"]
                        .iter()
                        .any(|f| field.starts_with(f))
                    {
                        format!("problem.{field}")
                    } else {
                        field
                    };
                    Error::config(prefix, reason)
                }
                other => other,
            })?;
        }
        if let Some(sweep) = &self.sweep {
            if let Some(EtaAxis::Log { points: 0, .. } | EtaAxis::Window { points: 0, .. }) = &sweep.eta {
                return Err(Error::config("sweep.eta.points", "must be positive"));
            }
            if let Some(EtaAxis::Values(v)) = &sweep.eta {
                if v.is_empty() {
                    return Err(Error::config("sweep.eta.values", "must be nonempty"));
                }
            }
        }
        Ok(())
    }

    fn sim_config(&self, method: MethodSpec, seed: u64) -> SimConfig {
        SimConfig {
            objective: self.objective.clone(),
            domain: self.domain.clone(),
            delay: self.delay.clone(),
            method,
            iterations: self.problem.iterations,
            workers: self.problem.workers,
            seed,
            snapshot_stride: self.problem.snapshot_stride,
            initial_point: self.problem.initial_point.clone(),
            tail_fraction: self.problem.tail_fraction,
            record: RecordOptions::default(),
        }
    }

    /// Step sizes of the sweep's `eta` axis.
    pub fn eta_grid(&self) -> Result<Option<Vec<f64>>> {
        let Some(axis) = self.sweep.as_ref().and_then(|s| s.eta.as_ref()) else {
            return Ok(None);
        };
        Ok(Some(match axis {
            EtaAxis::Values(v) => v.clone(),
            EtaAxis::Log { min, max, points } => log_grid(*min, *max, *points)?,
            EtaAxis::Window { points, constant } => {
                let objective = self.objective.build()?;
                let domain = self
                    .domain
                    .as_ref()
                    .ok_or_else(|| Error::config("sweep.eta.window", "needs a `domain`"))?
                    .build()?;
                let x1 = match &self.problem.initial_point {
                    Some(x) => Vector::from_column_slice(x),
                    None => domain.center().clone(),
                };
                let c = objective.theory_constants(&x1)?;
                let window = theorem2_step_window(
                    c.smoothness,
                    c.sigma()?,
                    c.sigma_smoothness.unwrap_or(0.0),
                    domain.diameter(),
                    self.problem.iterations,
                    self.problem.workers,
                    *constant,
                )?;
                window.log_grid(*points)
            }
        }))
    }

    /// Grid points in a fixed order: methods as listed, then η, β, γ and
    /// filter threshold, innermost last.
    pub fn grid_points(&self, sweep: bool) -> Result<Vec<GridPoint>> {
        let empty = SweepConfig::default();
        let s = if sweep { self.sweep.as_ref().unwrap_or(&empty) } else { &empty };
        let etas = if sweep { self.eta_grid()? } else { None };
        let horizon = self.problem.iterations as f64;
        let mut out = Vec::new();
        for (method_index, method) in self.methods.iter().enumerate() {
            let eta_values: Vec<Option<f64>> = match &etas {
                Some(v) => v.iter().copied().map(Some).collect(),
                None => vec![None],
            };
            for eta in &eta_values {
                let m = match eta {
                    Some(e) => {
                        let scaled = if s.effective_step && !matches!(method, MethodSpec::OrderedMu2 { .. }) {
                            e * horizon
                        } else {
                            *e
                        };
                        method.clone().with_eta(scaled)
                    }
                    None => method.clone(),
                };
                let betas: Vec<MethodSpec> = if m.uses_beta() && !s.beta.is_empty() {
                    s.beta.iter().map(|&b| m.clone().with_beta(b)).collect()
                } else {
                    vec![m]
                };
                for mb in betas {
                    let gammas: Vec<MethodSpec> = if mb.uses_gamma() && !s.gamma.is_empty() {
                        s.gamma.iter().map(|&g| mb.clone().with_gamma(g)).collect()
                    } else {
                        vec![mb]
                    };
                    for mg in gammas {
                        let filtered: Vec<MethodSpec> = if mg.uses_max_delay() && !s.max_delay_factors.is_empty() {
                            s.max_delay_factors
                                .iter()
                                .map(|&f| mg.clone().with_max_delay(f * self.problem.workers as f64))
                                .collect()
                        } else {
                            vec![mg]
                        };
                        for method in filtered {
                            out.push(GridPoint {
                                index: out.len(),
                                method_index,
                                method,
                                eta: eta.or_else(|| method_eta(&self.methods[method_index])),
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Every run of the experiment, grid-major then seed.
    pub fn expand(&self, sweep: bool) -> Result<Vec<RunSpec>> {
        let mut runs = Vec::new();
        for grid in self.grid_points(sweep)? {
            for seed_index in 0..self.problem.seeds {
                let seed = self.problem.base_seed + seed_index as u64;
                runs.push(RunSpec {
                    config: self.sim_config(grid.method.clone(), seed),
                    grid: grid.clone(),
                    seed_index,
                });
            }
        }
        Ok(runs)
    }
}

fn method_eta(m: &MethodSpec) -> Option<f64> {
    m.eta()
}

fn log_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min) {
        return Err(Error::config("sweep.eta.log", "need 0 < min ≤ max"));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    let (a, b) = (min.ln(), max.ln());
    Ok((0..points)
        .map(|i| {
            if i + 1 == points {
                max
            } else {
                (a + (b - a) * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect())
}

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::runner::{RunStatus, RunSummary};

/// Acceptance check evaluated over a finished sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Check {
    /// Worst / best mean metric across the method's grid is at most `max_ratio`.
    RobustnessAtMost { method: String, max_ratio: f64 },
    /// Worst / best is at least `min_ratio`, or some grid point failed.
    RobustnessAtLeast { method: String, min_ratio: f64 },
    /// Mean tail distance to the minimizer at the method's best grid point is
    /// at most `max_ratio` times the baseline's.
    DistanceRatioAtMost {
        method: String,
        baseline: String,
        max_ratio: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: Check,
    pub value: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub grid_index: usize,
    pub method: String,
    pub eta: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub max_delay: Option<f64>,
    /// Mean of the selection metric over seeds that finished.
    pub mean: f64,
    pub std: f64,
    pub ok_runs: usize,
    pub failed_runs: usize,
    pub mean_tail_distance: Option<f64>,
    pub mean_macro_f1: Option<f64>,
}

impl RobustnessRow {
    fn complete(&self) -> bool {
        self.failed_runs == 0 && self.mean.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub metric: String,
    /// `None` when every grid point had a failed seed.
    pub best: Option<RobustnessRow>,
    pub final_loss: Option<Stat>,
    pub final_excess_loss: Option<Stat>,
    pub avg_sq_grad_norm: Option<Stat>,
    pub tail_distance: Option<Stat>,
    pub macro_f1: Option<Stat>,
    /// Worst / best mean metric over the grid (∞ if any grid point failed).
    pub robustness_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub name: String,
    pub total_runs: usize,
    pub failed_runs: usize,
    pub methods: Vec<MethodSummary>,
    pub robustness: Vec<RobustnessRow>,
    pub checks: Vec<CheckResult>,
}

fn stat(values: &[f64]) -> Option<Stat> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(Stat { mean, std })
}

fn metric_name(runs: &[RunSummary]) -> &'static str {
    match runs.first() {
        Some(r) if !r.convex => "avg_sq_grad_norm",
        Some(r) if r.final_excess_loss.is_none() && r.status == RunStatus::Ok => "final_loss",
        _ => "final_excess_loss",
    }
}

fn robustness_rows(runs: &[RunSummary]) -> Vec<RobustnessRow> {
    let mut by_grid: BTreeMap<usize, Vec<&RunSummary>> = BTreeMap::new();
    for r in runs {
        by_grid.entry(r.grid_index).or_default().push(r);
    }
    by_grid
        .into_values()
        .map(|group| {
            let first = group[0];
            let ok: Vec<&RunSummary> = group.iter().copied().filter(|r| r.status == RunStatus::Ok).collect();
            let metric: Vec<f64> = ok.iter().filter_map(|r| r.primary_metric()).collect();
            let s = stat(&metric).unwrap_or(Stat {
                mean: f64::INFINITY,
                std: 0.0,
            });
            let mean_of = |f: &dyn Fn(&RunSummary) -> Option<f64>| {
                let v: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
                stat(&v).map(|s| s.mean)
            };
            RobustnessRow {
                grid_index: first.grid_index,
                method: first.method.clone(),
                eta: first.eta,
                beta: first.beta,
                gamma: first.gamma,
                max_delay: first.max_delay,
                mean: s.mean,
                std: s.std,
                ok_runs: ok.len(),
                failed_runs: group.len() - ok.len(),
                mean_tail_distance: mean_of(&|r| r.tail_distance),
                mean_macro_f1: mean_of(&|r| r.macro_f1),
            }
        })
        .collect()
}

/// Best grid point: smallest mean metric among fully finished grid points,
/// ties to the smaller step size, then the earlier grid index.
fn best_row<'a>(rows: &[&'a RobustnessRow]) -> Option<&'a RobustnessRow> {
    rows.iter()
        .copied()
        .filter(|r| r.complete())
        .min_by(|a, b| {
            a.mean
                .total_cmp(&b.mean)
                .then(a.eta.unwrap_or(0.0).total_cmp(&b.eta.unwrap_or(0.0)))
                .then(a.grid_index.cmp(&b.grid_index))
        })
}

fn ratio(rows: &[&RobustnessRow]) -> f64 {
    if rows.is_empty() || rows.iter().any(|r| !r.complete()) {
        return f64::INFINITY;
    }
    let best = rows.iter().map(|r| r.mean).fold(f64::INFINITY, f64::min);
    let worst = rows.iter().map(|r| r.mean).fold(0.0, f64::max);
    worst / best
}

pub fn build_summary(name: &str, runs: &[RunSummary], checks: &[Check]) -> SummaryReport {
    let robustness = robustness_rows(runs);
    let mut method_names: Vec<&str> = Vec::new();
    for r in runs {
        if !method_names.contains(&r.method.as_str()) {
            method_names.push(&r.method);
        }
    }
    let metric = metric_name(runs);
    let methods: Vec<MethodSummary> = method_names
        .iter()
        .map(|&m| {
            let rows: Vec<&RobustnessRow> = robustness.iter().filter(|r| r.method == m).collect();
            let best = best_row(&rows).cloned();
            let at_best: Vec<&RunSummary> = match &best {
                Some(b) => runs.iter().filter(|r| r.grid_index == b.grid_index).collect(),
                None => Vec::new(),
            };
            let collect = |f: &dyn Fn(&RunSummary) -> Option<f64>| {
                stat(&at_best.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
            };
            MethodSummary {
                method: m.to_string(),
                metric: metric.to_string(),
                final_loss: collect(&|r| r.final_loss),
                final_excess_loss: collect(&|r| r.final_excess_loss),
                avg_sq_grad_norm: collect(&|r| r.avg_sq_grad_norm),
                tail_distance: collect(&|r| r.tail_distance),
                macro_f1: collect(&|r| r.macro_f1),
                robustness_ratio: ratio(&rows),
                best,
            }
        })
        .collect();
    let checks = checks.iter().map(|c| evaluate(c, &methods)).collect();
    SummaryReport {
        name: name.to_string(),
        total_runs: runs.len(),
        failed_runs: runs.iter().filter(|r| r.status != RunStatus::Ok).count(),
        methods,
        robustness,
        checks,
    }
}

fn evaluate(check: &Check, methods: &[MethodSummary]) -> CheckResult {
    let find = |name: &str| methods.iter().find(|m| m.method == name);
    let (value, passed) = match check {
        Check::RobustnessAtMost { method, max_ratio } => {
            let v = find(method).map_or(f64::NAN, |m| m.robustness_ratio);
            (v, v <= *max_ratio)
        }
        Check::RobustnessAtLeast { method, min_ratio } => {
            let v = find(method).map_or(f64::NAN, |m| m.robustness_ratio);
            (v, v >= *min_ratio)
        }
        Check::DistanceRatioAtMost {
            method,
            baseline,
            max_ratio,
        } => {
            let dist = |n: &str| find(n).and_then(|m| m.tail_distance.as_ref()).map(|s| s.mean);
            let v = match (dist(method), dist(baseline)) {
                (Some(a), Some(b)) => a / b,
                _ => f64::NAN,
            };
            (v, v <= *max_ratio)
        }
    };
    CheckResult {
        check: check.clone(),
        value,
        passed,
    }
}

pub fn write_runs_csv<W: Write>(runs: &[RunSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in runs {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_runs_csv<R: Read>(reader: R) -> Result<Vec<RunSummary>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<Vec<RunSummary>, _>>()?)
}

pub fn write_robustness_csv<W: Write>(rows: &[RobustnessRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

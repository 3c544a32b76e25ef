use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{confusion_counts, convergence_metrics, f1_scores};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::simulator::RunTrace;
use crate::Vector;

use super::config::{ExperimentConfig, RunSpec};
use super::report::{
    build_summary, read_runs_csv, write_robustness_csv, write_runs_csv, SummaryReport,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    Diverged,
    Failed,
}

/// Scalar outcome of one run; one row of `runs.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub grid_index: usize,
    pub method: String,
    pub eta: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub max_delay: Option<f64>,
    pub seed: u64,
    pub status: RunStatus,
    pub convex: bool,
    pub final_loss: Option<f64>,
    pub final_excess_loss: Option<f64>,
    pub avg_sq_grad_norm: Option<f64>,
    pub final_grad_norm: Option<f64>,
    pub final_distance: Option<f64>,
    /// Distance of the tail-averaged iterate to the minimizer.
    pub tail_distance: Option<f64>,
    pub macro_f1: Option<f64>,
    pub slow_class_f1: Option<f64>,
    pub fast_class_f1: Option<f64>,
    pub mean_slow_delay: Option<f64>,
    pub mean_fast_delay: Option<f64>,
    pub diverged_at: Option<usize>,
    pub message: Option<String>,
}

impl RunSummary {
    /// Selection metric: final excess loss for convex objectives with a known
    /// optimum, else the average squared gradient norm, else the final loss.
    pub fn primary_metric(&self) -> Option<f64> {
        match self.status {
            RunStatus::Ok if self.convex => self.final_excess_loss.or(self.final_loss),
            RunStatus::Ok => self.avg_sq_grad_norm,
            _ => None,
        }
    }
}

fn hyper(spec: &RunSpec) -> (Option<f64>, Option<f64>, Option<f64>) {
    use crate::optim::MethodSpec::*;
    match &spec.grid.method {
        OrderedMomentum { beta, .. } => (*beta, None, None),
        OrderedMu2 { beta, gamma, .. } => (*beta, *gamma, None),
        NaiveMomentum { beta, .. } => (Some(*beta), None, None),
        NaiveMu2 { beta, gamma, .. } => (Some(*beta), Some(*gamma), None),
        DelayFiltered { max_delay, .. } => (None, None, Some(*max_delay)),
        _ => (None, None, None),
    }
}

fn mean_delay(trace: &RunTrace, slow: bool) -> Option<f64> {
    let taus: Vec<f64> = trace
        .records
        .iter()
        .filter(|r| (r.component == crate::delay::Component::Slow) == slow)
        .map(|r| r.tau as f64)
        .collect();
    (!taus.is_empty()).then(|| taus.iter().sum::<f64>() / taus.len() as f64)
}

/// Summarizes a finished trace.
pub fn summarize(spec: &RunSpec, objective: &Objective, trace: &RunTrace) -> Result<RunSummary> {
    let x1 = match &spec.config.initial_point {
        Some(x) => Vector::from_column_slice(x),
        None => match &spec.config.domain {
            Some(d) => Vector::from_column_slice(&d.center),
            None => Vector::zeros(objective.dim()),
        },
    };
    let constants = objective.theory_constants(&x1)?;
    let metrics = convergence_metrics(trace, &constants);
    let tail_distance = constants
        .minimizer
        .as_ref()
        .map(|xs| (Vector::from_column_slice(&trace.tail_average) - xs).norm());
    let (macro_f1, slow_class_f1, fast_class_f1) = match objective {
        Objective::Logistic(l) => {
            let conf = confusion_counts(l, &Vector::from_column_slice(&trace.final_iterate))?;
            let f1 = f1_scores(&conf.all);
            let slow_classes: Vec<usize> = (0..l.classes())
                .filter(|&c| conf.slow[c].tp + conf.slow[c].fn_ > 0)
                .collect();
            let class_mean = |keep: &dyn Fn(usize) -> bool| {
                let v: Vec<f64> = (0..l.classes()).filter(|&c| keep(c)).map(|c| f1.per_class[c]).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            (
                Some(f1.macro_f1),
                class_mean(&|c| slow_classes.contains(&c)),
                class_mean(&|c| !slow_classes.contains(&c)),
            )
        }
        _ => (None, None, None),
    };
    let (beta, gamma, max_delay) = hyper(spec);
    Ok(RunSummary {
        grid_index: spec.grid.index,
        method: spec.grid.method.name().to_string(),
        eta: spec.grid.eta,
        beta,
        gamma,
        max_delay,
        seed: spec.config.seed,
        status: RunStatus::Ok,
        convex: objective.is_convex(),
        final_loss: Some(trace.final_loss),
        final_excess_loss: metrics.final_excess_loss,
        avg_sq_grad_norm: Some(metrics.final_avg_sq_grad_norm()),
        final_grad_norm: Some(trace.final_grad_norm),
        final_distance: metrics.final_distance,
        tail_distance,
        macro_f1,
        slow_class_f1,
        fast_class_f1,
        mean_slow_delay: mean_delay(trace, true),
        mean_fast_delay: mean_delay(trace, false),
        diverged_at: None,
        message: None,
    })
}

fn failed(spec: &RunSpec, convex: bool, err: &Error) -> RunSummary {
    let (beta, gamma, max_delay) = hyper(spec);
    let (status, diverged_at) = match err {
        Error::Diverged { iteration, .. } => (RunStatus::Diverged, Some(*iteration)),
        _ => (RunStatus::Failed, None),
    };
    RunSummary {
        grid_index: spec.grid.index,
        method: spec.grid.method.name().to_string(),
        eta: spec.grid.eta,
        beta,
        gamma,
        max_delay,
        seed: spec.config.seed,
        status,
        convex,
        final_loss: None,
        final_excess_loss: None,
        avg_sq_grad_norm: None,
        final_grad_norm: None,
        final_distance: None,
        tail_distance: None,
        macro_f1: None,
        slow_class_f1: None,
        fast_class_f1: None,
        mean_slow_delay: None,
        mean_fast_delay: None,
        diverged_at,
        message: Some(err.to_string()),
    }
}

/// Runs one spec; divergence and build failures become summary rows.
pub fn execute(spec: &RunSpec) -> (RunSummary, Option<RunTrace>) {
    let result = spec.config.build().and_then(|sim| {
        let trace = sim.run()?;
        let summary = summarize(spec, &sim.objective, &trace)?;
        Ok((summary, trace))
    });
    match result {
        Ok((s, t)) => (s, Some(t)),
        Err(e) => {
            let convex = spec.config.objective.build().map(|o| o.is_convex()).unwrap_or(true);
            (failed(spec, convex, &e), None)
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Trace file name of one run.
pub fn trace_file_name(summary: &RunSummary) -> String {
    format!("{}_g{:03}_s{}.csv", summary.method, summary.grid_index, summary.seed)
}

/// What a command produced.
#[derive(Clone, Debug)]
pub struct CommandOutcome {
    pub output_dir: PathBuf,
    pub runs: Vec<RunSummary>,
    pub summary: SummaryReport,
    /// Grid points where no seed finished.
    pub fully_failed: Vec<usize>,
}

impl CommandOutcome {
    pub fn checks_passed(&self) -> bool {
        self.summary.checks.iter().all(|c| c.passed)
    }
}

fn run_all(specs: &[RunSpec], parallelism: usize) -> Result<Vec<(RunSummary, Option<RunTrace>)>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::config("sweep.parallelism", e.to_string()))?;
    Ok(pool.install(|| specs.par_iter().map(execute).collect()))
}

/// Executes every listed method (no grid expansion) for every seed and writes
/// one step CSV per run plus `runs.csv`, `robustness.csv`, `summary.json`.
///
/// A method whose seeds all failed is listed in `fully_failed`.
pub fn cmd_run(config: &ExperimentConfig) -> Result<CommandOutcome> {
    config.validate_grid(false)?;
    let specs = config.expand(false)?;
    let out = config.resolved_output_dir();
    let trace_dir = out.join("traces");
    create_dir(&trace_dir)?;
    let parallelism = config.sweep.as_ref().map_or(0, |s| s.parallelism);
    let results = run_all(&specs, parallelism)?;
    for ((summary, trace), spec) in results.iter().zip(&specs) {
        if let Some(trace) = trace {
            let mut buf = Vec::new();
            trace.write_csv(&mut buf)?;
            write_file(&trace_dir.join(trace_file_name(summary)), &buf)?;
            if config.problem.write_snapshots {
                let mut buf = Vec::new();
                trace.write_snapshots_csv(&mut buf)?;
                let name = trace_file_name(summary).replace(".csv", "_snapshots.csv");
                write_file(&trace_dir.join(name), &buf)?;
            }
        }
        debug_assert_eq!(summary.grid_index, spec.grid.index);
    }
    let runs: Vec<RunSummary> = results.into_iter().map(|(s, _)| s).collect();
    finish(config, out, runs)
}

/// Executes the full grid × seeds and writes `runs.csv`, `robustness.csv`
/// and `summary.json`. Per-run failures are recorded, not raised.
pub fn cmd_sweep(config: &ExperimentConfig) -> Result<CommandOutcome> {
    if config.sweep.is_none() {
        return Err(Error::config("sweep", "section is required for a sweep"));
    }
    let specs = config.expand(true)?;
    let out = config.resolved_output_dir();
    create_dir(&out)?;
    let parallelism = config.sweep.as_ref().map_or(0, |s| s.parallelism);
    let runs = run_all(&specs, parallelism)?
        .into_iter()
        .map(|(s, _)| s)
        .collect();
    finish(config, out, runs)
}

fn finish(config: &ExperimentConfig, out: PathBuf, runs: Vec<RunSummary>) -> Result<CommandOutcome> {
    create_dir(&out)?;
    let summary = build_summary(&config.name, &runs, &config.report.checks);
    let mut buf = Vec::new();
    write_runs_csv(&runs, &mut buf)?;
    write_file(&out.join("runs.csv"), &buf)?;
    let mut buf = Vec::new();
    write_robustness_csv(&summary.robustness, &mut buf)?;
    write_file(&out.join("robustness.csv"), &buf)?;
    write_file(
        &out.join("summary.json"),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    let mut fully_failed: Vec<usize> = runs.iter().map(|r| r.grid_index).collect();
    fully_failed.dedup();
    fully_failed.retain(|&g| {
        runs.iter()
            .filter(|r| r.grid_index == g)
            .all(|r| r.status != RunStatus::Ok)
    });
    Ok(CommandOutcome {
        output_dir: out,
        runs,
        summary,
        fully_failed,
    })
}

/// Re-aggregates `runs.csv` in `dir`, rewriting `robustness.csv` and
/// `summary.json`. Checks come from `config` when given.
pub fn cmd_report(dir: &Path, config: Option<&ExperimentConfig>) -> Result<SummaryReport> {
    let path = dir.join("runs.csv");
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let runs = read_runs_csv(file)?;
    let (name, checks) = match config {
        Some(c) => (c.name.as_str(), c.report.checks.as_slice()),
        None => ("report", &[][..]),
    };
    let summary = build_summary(name, &runs, checks);
    let mut buf = Vec::new();
    write_robustness_csv(&summary.robustness, &mut buf)?;
    write_file(&dir.join("robustness.csv"), &buf)?;
    write_file(
        &dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;
    Ok(summary)
}

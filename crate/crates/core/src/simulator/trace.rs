use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::delay::Component;
use crate::error::Result;
use crate::optim::Optimizer;
use crate::Vector;

/// Column order of the per-run CSV.
pub const CSV_HEADER: [&str; 8] = [
    "t",
    "worker_id",
    "dispatch_iteration",
    "tau",
    "component",
    "loss",
    "grad_norm",
    "pending_size",
];

/// One applied update. `loss` and `grad_norm` are measured at `x_t`, the
/// iterate the update was applied to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub worker_id: usize,
    pub dispatch_iteration: usize,
    pub tau: usize,
    pub component: Component,
    /// Integer tick count of the ticket.
    pub wait: u64,
    pub return_clock: f64,
    pub loss: f64,
    pub grad_norm: f64,
    /// `|𝒯(t)|` counted with multiplicity.
    pub pending_size: usize,
    /// `‖x_{t+1} − x_t‖`.
    pub update_norm: f64,
}

impl StepRecord {
    fn bitwise_eq(&self, other: &Self) -> bool {
        self.t == other.t
            && self.worker_id == other.worker_id
            && self.dispatch_iteration == other.dispatch_iteration
            && self.tau == other.tau
            && self.component == other.component
            && self.wait == other.wait
            && self.return_clock.to_bits() == other.return_clock.to_bits()
            && self.loss.to_bits() == other.loss.to_bits()
            && self.grad_norm.to_bits() == other.grad_norm.to_bits()
            && self.pending_size == other.pending_size
            && self.update_norm.to_bits() == other.update_norm.to_bits()
    }
}

/// Opt-in per-step payload for the analysis oracles.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDetail {
    /// Dispatch indices of the other in-flight gradients, ascending, with
    /// multiplicity (several workers can hold index 1).
    pub pending: Vec<usize>,
    pub gradient: Vector,
    pub prev_gradient: Option<Vector>,
    /// Optimizer buffer after the step.
    pub buffer: Option<Vector>,
    pub iterate_before: Vector,
    pub iterate_after: Vector,
    pub descent_after: Option<Vector>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: usize,
    pub iterate: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub method: String,
    pub seed: u64,
    pub config_hash: String,
    pub objective_fingerprint: String,
    pub workers: usize,
    pub iterations: usize,
    /// Dispatches issued per worker.
    pub dispatches: Vec<usize>,
    pub in_flight_at_end: usize,
}

#[derive(Clone, Debug)]
pub struct RunTrace {
    pub metadata: RunMetadata,
    pub records: Vec<StepRecord>,
    pub details: Option<Vec<StepDetail>>,
    /// `x_t` at `t = 1, 1 + s, 1 + 2s, …`.
    pub snapshots: Vec<Snapshot>,
    /// `x_{T+1}`.
    pub final_iterate: Vec<f64>,
    pub final_loss: f64,
    pub final_grad_norm: f64,
    /// Mean of `x_{t+1}` over the last `⌈fraction · T⌉` steps.
    pub tail_average: Vec<f64>,
    pub final_state: Optimizer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReplayOutcome {
    Identical,
    /// `first_iteration` is `T + 1` when only the final iterate differs.
    Diverged { first_iteration: usize },
}

impl ReplayOutcome {
    pub fn is_identical(self) -> bool {
        self == ReplayOutcome::Identical
    }
}

fn bits(xs: &[f64]) -> Vec<u64> {
    xs.iter().map(|x| x.to_bits()).collect()
}

impl RunTrace {
    pub fn compare(&self, other: &RunTrace) -> ReplayOutcome {
        for (a, b) in self.records.iter().zip(&other.records) {
            if !a.bitwise_eq(b) {
                return ReplayOutcome::Diverged { first_iteration: a.t };
            }
        }
        let n = self.records.len().min(other.records.len());
        if self.records.len() != other.records.len() {
            return ReplayOutcome::Diverged { first_iteration: n + 1 };
        }
        if bits(&self.final_iterate) != bits(&other.final_iterate)
            || bits(&self.tail_average) != bits(&other.tail_average)
        {
            return ReplayOutcome::Diverged { first_iteration: n + 1 };
        }
        ReplayOutcome::Identical
    }

    /// Average of `‖∇f(x_t)‖²` over all recorded steps.
    pub fn avg_sq_grad_norm(&self) -> f64 {
        self.records.iter().map(|r| r.grad_norm * r.grad_norm).sum::<f64>() / self.records.len() as f64
    }

    /// Writes the fixed-schema step CSV (see [`CSV_HEADER`]). Floats use the
    /// shortest round-trip representation.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.t.to_string(),
                r.worker_id.to_string(),
                r.dispatch_iteration.to_string(),
                r.tau.to_string(),
                r.component.as_str().to_string(),
                r.loss.to_string(),
                r.grad_norm.to_string(),
                r.pending_size.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Wide CSV of the strided iterate snapshots: `t,x0,x1,…`.
    pub fn write_snapshots_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let dim = self.final_iterate.len();
        let mut header = vec!["t".to_string()];
        header.extend((0..dim).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for s in &self.snapshots {
            let mut row = vec![s.t.to_string()];
            row.extend(s.iterate.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

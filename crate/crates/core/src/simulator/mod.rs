//! Deterministic parameter-server event loop.
//!
//! All `M` workers receive `x₁` at clock 0 with dispatch index 1. Each worker
//! draws one ticket at dispatch: its latent wait schedules the return and
//! fixes the data group, and the gradient is evaluated on the snapshot right
//! away. Returns are processed in clock order (ties by worker id); every
//! arrival is one global iteration `t`, after which the worker is re-dispatched
//! with index `t + 1`.
//!
//! A run aborts with [`Error::Diverged`] as soon as an iterate, its loss or
//! its gradient norm stops being finite.
//!
//! Two independent ChaCha streams are derived from the seed: stream 0 drives
//! the delay model, stream 1 the data samples. The arrival schedule therefore
//! depends only on the seed, so different methods under the same seed see the
//! same delays, groups and noise draws.

mod config;
mod trace;

pub use config::{RecordOptions, SimConfig};
pub use trace::{ReplayOutcome, RunMetadata, RunTrace, Snapshot, StepDetail, StepRecord, CSV_HEADER};

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::delay::{Component, DelayModel};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::optim::{DelayedGradientReport, Optimizer};
use crate::Vector;

const DELAY_STREAM: u64 = 0;
const SAMPLE_STREAM: u64 = 1;

/// A fully built simulation. Parts can be supplied directly, which lets
/// callers run optimizers or delay models that have no config form.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub objective: Objective,
    pub delay: DelayModel,
    pub optimizer: Optimizer,
    pub iterations: usize,
    pub seed: u64,
    pub snapshot_stride: usize,
    pub tail_fraction: f64,
    pub record: RecordOptions,
    pub config_hash: String,
}

#[derive(Debug)]
struct InFlight {
    clock: f64,
    worker_id: usize,
}

impl PartialEq for InFlight {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for InFlight {}
impl PartialOrd for InFlight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for InFlight {
    /// Reversed so `BinaryHeap` pops the earliest return, lowest id first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .clock
            .total_cmp(&self.clock)
            .then_with(|| other.worker_id.cmp(&self.worker_id))
    }
}

struct Job {
    dispatch_iteration: usize,
    wait: u64,
    return_clock: f64,
    component: Component,
    gradient: Vector,
    prev_gradient: Option<Vector>,
}

/// `⌈T / 1000⌉`.
pub fn default_snapshot_stride(iterations: usize) -> usize {
    iterations.div_ceil(1000).max(1)
}

impl Simulation {
    pub fn run(&self) -> Result<RunTrace> {
        let m = self.delay.num_workers();
        let t_max = self.iterations;
        if m == 0 || t_max < m {
            return Err(Error::config("iterations", format!("need T ≥ M = {m}")));
        }
        if self.optimizer.iteration() != 1 {
            return Err(Error::Precondition("optimizer must start at iteration 1".into()));
        }
        let mut delay_rng = ChaCha8Rng::seed_from_u64(self.seed);
        delay_rng.set_stream(DELAY_STREAM);
        let mut sample_rng = ChaCha8Rng::seed_from_u64(self.seed);
        sample_rng.set_stream(SAMPLE_STREAM);

        let paired = self.optimizer.needs_paired_gradient();
        let mut opt = self.optimizer.clone();
        let mut jobs: Vec<Option<Job>> = (0..m).map(|_| None).collect();
        let mut heap = BinaryHeap::with_capacity(m);
        let mut dispatches = vec![0usize; m];
        let mut in_flight_by_index: BTreeMap<usize, usize> = BTreeMap::new();

        let dispatch = |worker: usize,
                        clock: f64,
                        k: usize,
                        x: &Vector,
                        x_prev: Option<&Vector>,
                        delay_rng: &mut ChaCha8Rng,
                        sample_rng: &mut ChaCha8Rng|
         -> Result<Job> {
            let ticket = self.delay.draw(worker, delay_rng);
            let sample = self.objective.draw_sample(ticket.component, sample_rng);
            let gradient = self.objective.grad_sample(x, &sample)?;
            let prev_gradient = match (paired, x_prev) {
                (true, Some(xp)) => Some(self.objective.grad_sample(xp, &sample)?),
                _ => None,
            };
            Ok(Job {
                dispatch_iteration: k,
                wait: ticket.wait,
                return_clock: clock + ticket.latent,
                component: ticket.component,
                gradient,
                prev_gradient,
            })
        };

        for w in 0..m {
            let job = dispatch(w, 0.0, 1, opt.query_point(), None, &mut delay_rng, &mut sample_rng)?;
            heap.push(InFlight {
                clock: job.return_clock,
                worker_id: w,
            });
            *in_flight_by_index.entry(1).or_default() += 1;
            dispatches[w] += 1;
            jobs[w] = Some(job);
        }

        let mut records = Vec::with_capacity(t_max);
        let mut details = Vec::new();
        let mut snapshots = Vec::new();
        let tail_len = ((t_max as f64 * self.tail_fraction).ceil() as usize).clamp(1, t_max);
        let mut tail_sum = Vector::zeros(self.objective.dim());
        let mut processed = 0usize;

        for t in 1..=t_max {
            let InFlight { clock, worker_id } = heap.pop().expect("M ≥ 1 jobs in flight");
            let job = jobs[worker_id].take().expect("popped worker has a job");
            let k = job.dispatch_iteration;
            let count = in_flight_by_index.get_mut(&k).expect("index in flight");
            *count -= 1;
            if *count == 0 {
                in_flight_by_index.remove(&k);
            }
            processed += 1;
            debug_assert_eq!(processed + heap.len(), dispatches.iter().sum::<usize>());

            let x_t = opt.query_point().clone();
            if (t - 1) % self.snapshot_stride == 0 {
                snapshots.push(Snapshot {
                    t,
                    iterate: x_t.as_slice().to_vec(),
                });
            }
            let loss = self.objective.value(&x_t)?;
            let grad_norm = self.objective.grad_full(&x_t)?.norm();
            if !loss.is_finite() || !grad_norm.is_finite() {
                return Err(Error::Diverged {
                    iteration: t,
                    last_finite: x_t.as_slice().to_vec(),
                });
            }
            let pending: Vec<usize> = in_flight_by_index
                .iter()
                .flat_map(|(&idx, &n)| std::iter::repeat_n(idx, n))
                .collect();

            let report = DelayedGradientReport::new(worker_id, k, t - k, job.component, job.gradient)
                .with_prev_gradient(job.prev_gradient);
            let next = opt.step(&report)?;
            let x_next = next.query_point();
            if x_next.iter().any(|v| !v.is_finite())
                || next.descent_iterate().is_some_and(|w| w.iter().any(|v| !v.is_finite()))
            {
                return Err(Error::Diverged {
                    iteration: t,
                    last_finite: x_t.as_slice().to_vec(),
                });
            }
            let update_norm = (x_next - &x_t).norm();
            if t > t_max - tail_len {
                tail_sum += x_next;
            }

            records.push(StepRecord {
                t,
                worker_id,
                dispatch_iteration: k,
                tau: t - k,
                component: job.component,
                wait: job.wait,
                return_clock: clock,
                loss,
                grad_norm,
                pending_size: pending.len(),
                update_norm,
            });
            if self.record.details {
                let DelayedGradientReport {
                    gradient,
                    prev_gradient,
                    ..
                } = report;
                details.push(StepDetail {
                    pending,
                    gradient,
                    prev_gradient,
                    buffer: next.buffer().cloned(),
                    iterate_before: x_t.clone(),
                    iterate_after: x_next.clone(),
                    descent_after: next.descent_iterate().cloned(),
                });
            }

            opt = next;
            if t < t_max {
                let job = dispatch(
                    worker_id,
                    clock,
                    t + 1,
                    opt.query_point(),
                    Some(&x_t),
                    &mut delay_rng,
                    &mut sample_rng,
                )?;
                heap.push(InFlight {
                    clock: job.return_clock,
                    worker_id,
                });
                *in_flight_by_index.entry(t + 1).or_default() += 1;
                dispatches[worker_id] += 1;
                jobs[worker_id] = Some(job);
            }
        }

        let final_iterate = opt.query_point().clone();
        let final_loss = self.objective.value(&final_iterate)?;
        let final_grad_norm = self.objective.grad_full(&final_iterate)?.norm();
        if !final_loss.is_finite() || !final_grad_norm.is_finite() {
            return Err(Error::Diverged {
                iteration: t_max + 1,
                last_finite: final_iterate.as_slice().to_vec(),
            });
        }
        Ok(RunTrace {
            metadata: RunMetadata {
                method: opt.name().to_string(),
                seed: self.seed,
                config_hash: self.config_hash.clone(),
                objective_fingerprint: self.objective.fingerprint(),
                workers: m,
                iterations: t_max,
                dispatches,
                in_flight_at_end: heap.len(),
            },
            records,
            details: self.record.details.then_some(details),
            snapshots,
            final_iterate: final_iterate.as_slice().to_vec(),
            final_loss,
            final_grad_norm,
            tail_average: (tail_sum / tail_len as f64).as_slice().to_vec(),
            final_state: opt,
        })
    }
}

/// Builds and runs `config`.
pub fn run(config: &SimConfig) -> Result<RunTrace> {
    config.build()?.run()
}

/// Re-runs `config` and compares against `trace` field by field.
///
/// A trace whose config hash differs from `config` is rejected as a
/// precondition failure; the seed is not part of the hash, so a different seed
/// yields a divergence report.
pub fn replay_check(trace: &RunTrace, config: &SimConfig) -> Result<ReplayOutcome> {
    let hash = config.config_hash()?;
    if hash != trace.metadata.config_hash {
        return Err(Error::Precondition(format!(
            "config hash {hash} does not match trace hash {}",
            trace.metadata.config_hash
        )));
    }
    let fresh = run(config)?;
    Ok(trace.compare(&fresh))
}

#[cfg(test)]
mod tests;

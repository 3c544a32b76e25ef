use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{RunTrace, StepRecord};

/// `|𝒯(t)|` at every update, rebuilt from arrival records alone: index 1 is
/// issued `M` times before step 1 and index `k ≥ 2` once right after step
/// `k − 1`.
pub fn pending_sizes_from_records(records: &[StepRecord], workers: usize) -> Result<Vec<usize>> {
    let mut outstanding: BTreeMap<usize, usize> = BTreeMap::from([(1, workers)]);
    let mut total = workers;
    let mut sizes = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let t = i + 1;
        if r.t != t {
            return Err(Error::Protocol(format!("record {i} has t = {}", r.t)));
        }
        match outstanding.get_mut(&r.dispatch_iteration) {
            Some(n) if *n > 0 => *n -= 1,
            _ => {
                return Err(Error::Protocol(format!(
                    "step {t} consumed index {} which was not in flight",
                    r.dispatch_iteration
                )))
            }
        }
        total -= 1;
        sizes.push(total);
        *outstanding.entry(t + 1).or_default() += 1;
        total += 1;
    }
    Ok(sizes)
}

/// Worst-case deviations of the two anytime-averaging properties over a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnytimeCheck {
    /// max over `t` of `‖x_{t+1} − Σα_s w_s / α_{1:t+1}‖ / ‖x_{t+1}‖`.
    pub max_identity_error: f64,
    /// max over `t` of `‖x_{t+1} − x_t‖ / (α_{t+1} D / α_{1:t+1})`; at most 1.
    pub max_contraction_ratio: f64,
}

/// Re-verifies `x_{t+1} = Σ_{s≤t+1} α_s w_s / α_{1:t+1}` with `α_s = s` and
/// `‖x_{t+1} − x_t‖ ≤ α_{t+1} D / α_{1:t+1}` from recorded iterates.
pub fn anytime_checks(trace: &RunTrace, diameter: f64) -> Result<AnytimeCheck> {
    let details = trace
        .details
        .as_deref()
        .ok_or_else(|| Error::InsufficientTrace("iterate details".into()))?;
    let first = details
        .first()
        .ok_or_else(|| Error::InsufficientTrace("at least one step".into()))?;
    let mut weighted = first.iterate_before.clone();
    let mut alpha_sum = 1.0;
    let mut max_identity_error: f64 = 0.0;
    let mut max_contraction_ratio: f64 = 0.0;
    for (i, d) in details.iter().enumerate() {
        let alpha_next = (i + 2) as f64;
        let w_next = d
            .descent_after
            .as_ref()
            .ok_or_else(|| Error::InsufficientTrace("descent iterates".into()))?;
        weighted.axpy(alpha_next, w_next, 1.0);
        alpha_sum += alpha_next;
        let average = &weighted / alpha_sum;
        let err = (&d.iterate_after - &average).norm() / d.iterate_after.norm().max(1e-300);
        max_identity_error = max_identity_error.max(err);
        let bound = alpha_next * diameter / alpha_sum;
        let ratio = (&d.iterate_after - &d.iterate_before).norm() / bound;
        max_contraction_ratio = max_contraction_ratio.max(ratio);
    }
    Ok(AnytimeCheck {
        max_identity_error,
        max_contraction_ratio,
    })
}

/// Steps where `‖∇f(x_t)‖² ≤ 2L(f(x_t) − f*)` fails beyond rounding.
pub fn gradient_bound_violations(records: &[StepRecord], smoothness: f64, f_star: f64) -> Vec<usize> {
    records
        .iter()
        .filter(|r| {
            let lhs = r.grad_norm * r.grad_norm;
            let rhs = 2.0 * smoothness * (r.loss - f_star);
            lhs > rhs + 1e-9 * rhs.abs().max(lhs) + 1e-12
        })
        .map(|r| r.t)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::{Component, DelaySpec};
    use crate::objective::{DomainSpec, ObjectiveSpec, QuadraticSpec};
    use crate::optim::MethodSpec;
    use crate::simulator::{run, RecordOptions, SimConfig};

    fn record(t: usize, k: usize) -> StepRecord {
        StepRecord {
            t,
            worker_id: 0,
            dispatch_iteration: k,
            tau: t - k,
            component: Component::Fast,
            wait: 1,
            return_clock: t as f64,
            loss: 0.0,
            grad_norm: 0.0,
            pending_size: 0,
            update_norm: 0.0,
        }
    }

    #[test]
    fn rebuilt_pending_sizes() {
        let recs = vec![record(1, 1), record(2, 2), record(3, 1), record(4, 3)];
        assert_eq!(pending_sizes_from_records(&recs, 2).unwrap(), vec![1, 1, 1, 1]);
        let bad = vec![record(1, 1), record(2, 1), record(3, 1)];
        assert!(pending_sizes_from_records(&bad, 2).is_err());
    }

    #[test]
    fn simulated_runs_respect_structure() {
        let cfg = SimConfig {
            objective: ObjectiveSpec::Quadratic(QuadraticSpec {
                diagonal: Some(vec![1.0, 2.0, 0.5]),
                center: Some(vec![0.5, -0.5, 0.2]),
                noise_stddev: 1.0,
                ..Default::default()
            }),
            domain: Some(DomainSpec {
                center: vec![0.0; 3],
                radius: 1.0,
            }),
            delay: DelaySpec::new(0.1),
            method: MethodSpec::OrderedMu2 {
                eta: Some(0.05),
                beta: None,
                gamma: None,
            },
            iterations: 300,
            workers: 6,
            seed: 12,
            snapshot_stride: None,
            initial_point: None,
            tail_fraction: 0.1,
            record: RecordOptions { details: true },
        };
        let trace = run(&cfg).unwrap();
        let sizes = pending_sizes_from_records(&trace.records, 6).unwrap();
        assert!(sizes.iter().all(|&s| s <= 5));
        let sim_sizes: Vec<usize> = trace.records.iter().map(|r| r.pending_size).collect();
        assert_eq!(sizes, sim_sizes);
        let check = anytime_checks(&trace, 2.0).unwrap();
        assert!(check.max_identity_error <= 1e-9, "{check:?}");
        assert!(check.max_contraction_ratio <= 1.0 + 1e-12, "{check:?}");
        let objective = cfg.objective.build().unwrap();
        let fs = objective.theory_constants(&crate::Vector::zeros(3)).unwrap().f_star.unwrap();
        assert!(gradient_bound_violations(&trace.records, objective.smoothness(), fs).is_empty());
    }
}

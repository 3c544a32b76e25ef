use serde::{Deserialize, Serialize};

use crate::delay::Component;
use crate::error::{Error, Result};
use crate::objective::{LogisticObjective, Objective, TheoryConstants};
use crate::simulator::RunTrace;
use crate::Vector;

/// Per-step convergence series of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    /// `(1/t) Σ_{s≤t} ‖∇f(x_s)‖²`.
    pub avg_sq_grad_norm: Vec<f64>,
    /// `f(x_t) − f*`, when `f*` is known.
    pub excess_loss: Option<Vec<f64>>,
    /// `(t, ‖x_t − x*‖)` at each snapshot, when `x*` is known.
    pub distance_to_minimizer: Option<Vec<(usize, f64)>>,
    pub final_excess_loss: Option<f64>,
    pub final_distance: Option<f64>,
}

impl MetricSeries {
    pub fn final_avg_sq_grad_norm(&self) -> f64 {
        *self.avg_sq_grad_norm.last().unwrap_or(&f64::NAN)
    }

    pub fn all_finite(&self) -> bool {
        self.avg_sq_grad_norm.iter().all(|v| v.is_finite())
            && self.excess_loss.iter().flatten().all(|v| v.is_finite())
            && self
                .distance_to_minimizer
                .iter()
                .flatten()
                .all(|(_, v)| v.is_finite())
    }
}

pub fn convergence_metrics(trace: &RunTrace, constants: &TheoryConstants) -> MetricSeries {
    let mut acc = 0.0;
    let avg_sq_grad_norm = trace
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            acc += r.grad_norm * r.grad_norm;
            acc / (i + 1) as f64
        })
        .collect();
    let excess_loss = constants
        .f_star
        .map(|fs| trace.records.iter().map(|r| r.loss - fs).collect());
    let distance = |x: &[f64], xs: &Vector| (Vector::from_column_slice(x) - xs).norm();
    let distance_to_minimizer = constants.minimizer.as_ref().map(|xs| {
        trace
            .snapshots
            .iter()
            .map(|s| (s.t, distance(&s.iterate, xs)))
            .collect()
    });
    MetricSeries {
        avg_sq_grad_norm,
        excess_loss,
        distance_to_minimizer,
        final_excess_loss: constants.f_star.map(|fs| trace.final_loss - fs),
        final_distance: constants
            .minimizer
            .as_ref()
            .map(|xs| distance(&trace.final_iterate, xs)),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub per_class: Vec<f64>,
    pub macro_f1: f64,
}

/// `F1_c = 2TP/(2TP + FP + FN)` per class and their unweighted mean. A class
/// with no predictions and no members scores 0.
pub fn f1_scores(counts: &[ClassCounts]) -> F1Scores {
    let per_class: Vec<f64> = counts
        .iter()
        .map(|c| {
            let denom = 2 * c.tp + c.fp + c.fn_;
            if denom == 0 {
                0.0
            } else {
                (2 * c.tp) as f64 / denom as f64
            }
        })
        .collect();
    let macro_f1 = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().sum::<f64>() / per_class.len() as f64
    };
    F1Scores { per_class, macro_f1 }
}

/// Confusion counts over all samples and restricted to each group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupConfusion {
    pub all: Vec<ClassCounts>,
    pub slow: Vec<ClassCounts>,
    pub fast: Vec<ClassCounts>,
}

pub fn confusion_counts(objective: &LogisticObjective, x: &Vector) -> Result<GroupConfusion> {
    if x.len() != objective.dim() {
        return Err(Error::DimensionMismatch {
            expected: objective.dim(),
            actual: x.len(),
        });
    }
    let c = objective.classes();
    let mut all = vec![ClassCounts::default(); c];
    let mut slow = vec![ClassCounts::default(); c];
    let mut fast = vec![ClassCounts::default(); c];
    for i in 0..objective.num_samples() {
        let truth = objective.labels()[i];
        let pred = objective.predict(x, i);
        let group = match objective.groups()[i] {
            Component::Slow => &mut slow,
            Component::Fast => &mut fast,
        };
        for table in [&mut all, group] {
            if pred == truth {
                table[truth].tp += 1;
            } else {
                table[pred].fp += 1;
                table[truth].fn_ += 1;
            }
        }
    }
    Ok(GroupConfusion { all, slow, fast })
}

/// Distance from each trace's tail-averaged iterate to the objective's
/// minimizer. All traces must come from `objective`.
pub fn bias_experiment_gap(traces: &[&RunTrace], objective: &Objective) -> Result<Vec<f64>> {
    let fingerprint = objective.fingerprint();
    let minimizer = match objective {
        Objective::Mixture(m) => m.minimizer(),
        other => other.theory_constants(&Vector::zeros(other.dim()))?.minimizer,
    }
    .ok_or_else(|| Error::UnsupportedObjective("a closed-form minimizer".into()))?;
    traces
        .iter()
        .map(|t| {
            if t.metadata.objective_fingerprint != fingerprint {
                return Err(Error::InvalidComparison(format!(
                    "trace for {} (seed {}) used a different objective",
                    t.metadata.method, t.metadata.seed
                )));
            }
            Ok((Vector::from_column_slice(&t.tail_average) - &minimizer).norm())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::DelaySpec;
    use crate::objective::{ObjectiveSpec, QuadraticSpec, SyntheticClassification};
    use crate::optim::MethodSpec;
    use crate::simulator::{run, RecordOptions, SimConfig};
    use proptest::prelude::*;

    #[test]
    fn f1_examples() {
        let one = |tp, fp, fn_| f1_scores(&[ClassCounts { tp, fp, fn_ }]).macro_f1;
        assert_eq!(one(5, 0, 0), 1.0);
        assert!((one(3, 1, 2) - 6.0 / 9.0).abs() < 1e-15);
        assert_eq!(one(0, 0, 0), 0.0);
    }

    proptest! {
        #[test]
        fn macro_f1_is_bounded(counts in proptest::collection::vec((0u64..50, 0u64..50, 0u64..50), 1..6)) {
            let counts: Vec<ClassCounts> = counts.into_iter().map(|(tp, fp, fn_)| ClassCounts { tp, fp, fn_ }).collect();
            let f = f1_scores(&counts);
            prop_assert!((0.0..=1.0).contains(&f.macro_f1));
            let perfect = counts.iter().all(|c| c.fp == 0 && c.fn_ == 0 && c.tp > 0);
            prop_assert_eq!(f.macro_f1 == 1.0, perfect);
        }
    }

    fn quad_config(eta: f64, iterations: usize) -> SimConfig {
        SimConfig {
            objective: ObjectiveSpec::Quadratic(QuadraticSpec {
                diagonal: Some(vec![1.0, 1.0]),
                linear: Some(vec![0.0, 0.0]),
                ..Default::default()
            }),
            domain: None,
            delay: DelaySpec::new(0.1),
            method: MethodSpec::Vanilla { eta },
            iterations,
            workers: 1,
            seed: 0,
            snapshot_stride: Some(1),
            initial_point: Some(vec![1.0, 0.0]),
            tail_fraction: 1.0,
            record: RecordOptions::default(),
        }
    }

    #[test]
    fn one_deterministic_step_quarters_the_loss() {
        let cfg = quad_config(0.5, 1);
        let trace = run(&cfg).unwrap();
        let objective = cfg.objective.build().unwrap();
        let constants = objective.theory_constants(&Vector::from_vec(vec![1.0, 0.0])).unwrap();
        let metrics = convergence_metrics(&trace, &constants);
        assert!((metrics.excess_loss.as_ref().unwrap()[0] - 0.5).abs() < 1e-15);
        assert!((metrics.final_excess_loss.unwrap() - 0.125).abs() < 1e-15);
        assert!(metrics.all_finite());
    }

    #[test]
    fn iterate_at_minimizer_has_zero_gradient_average() {
        let cfg = SimConfig {
            initial_point: Some(vec![0.0, 0.0]),
            ..quad_config(0.1, 20)
        };
        let trace = run(&cfg).unwrap();
        let constants = cfg.objective.build().unwrap().theory_constants(&Vector::zeros(2)).unwrap();
        assert_eq!(convergence_metrics(&trace, &constants).final_avg_sq_grad_norm(), 0.0);
    }

    #[test]
    fn gap_rejects_mixed_objectives() {
        let a = run(&quad_config(0.1, 5)).unwrap();
        let other = ObjectiveSpec::Quadratic(QuadraticSpec {
            diagonal: Some(vec![2.0, 1.0]),
            linear: Some(vec![0.0, 0.0]),
            ..Default::default()
        });
        let b = run(&SimConfig {
            objective: other,
            ..quad_config(0.1, 5)
        })
        .unwrap();
        let objective = quad_config(0.1, 5).objective.build().unwrap();
        assert_eq!(bias_experiment_gap(&[&a], &objective).unwrap().len(), 1);
        assert!(matches!(
            bias_experiment_gap(&[&a, &b], &objective),
            Err(Error::InvalidComparison(_))
        ));
    }

    #[test]
    fn confusion_counts_are_consistent() {
        let spec = SyntheticClassification {
            samples: 200,
            features: 3,
            classes: 3,
            slow_classes: vec![0],
            slow_fraction: 0.2,
            separation: 3.0,
            l2_reg: 1e-3,
            noise_stddev: 0.0,
            data_seed: 4,
        };
        let obj = LogisticObjective::synthetic(&spec).unwrap();
        let x = Vector::zeros(obj.dim());
        let conf = confusion_counts(&obj, &x).unwrap();
        let total_tp_fn: u64 = conf.all.iter().map(|c| c.tp + c.fn_).sum();
        assert_eq!(total_tp_fn, 200);
        for c in 0..3 {
            assert_eq!(conf.all[c].tp, conf.slow[c].tp + conf.fast[c].tp);
        }
    }
}

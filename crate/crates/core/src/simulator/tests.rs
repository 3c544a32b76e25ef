use super::*;
use crate::delay::DelaySpec;
use crate::objective::{MixtureComponentSpec, ObjectiveSpec, QuadraticSpec};
use crate::optim::MethodSpec;

fn quadratic(d: usize, noise: f64) -> ObjectiveSpec {
    ObjectiveSpec::Quadratic(QuadraticSpec {
        diagonal: Some(vec![1.0; d]),
        center: Some(vec![1.0; d]),
        noise_stddev: noise,
        ..Default::default()
    })
}

fn config(workers: usize, iterations: usize, seed: u64) -> SimConfig {
    SimConfig {
        objective: quadratic(3, 1.0),
        domain: None,
        delay: DelaySpec::new(0.1),
        method: MethodSpec::Vanilla { eta: 0.01 },
        iterations,
        workers,
        seed,
        snapshot_stride: None,
        initial_point: None,
        tail_fraction: 0.1,
        record: RecordOptions::default(),
    }
}

#[test]
fn single_worker_has_no_staleness() {
    for method in [
        MethodSpec::Vanilla { eta: 0.05 },
        MethodSpec::OrderedMomentum {
            eta: Some(0.05),
            beta: Some(0.3),
        },
        MethodSpec::OrderedMu2 {
            eta: Some(0.01),
            beta: None,
            gamma: None,
        },
    ] {
        let trace = run(&SimConfig {
            method,
            ..config(1, 50, 3)
        })
        .unwrap();
        assert_eq!(trace.records.len(), 50);
        assert!(trace.records.iter().all(|r| r.tau == 0 && r.pending_size == 0));
    }
}

#[test]
fn pending_set_is_bounded_by_other_workers() {
    let trace = run(&config(4, 100, 11)).unwrap();
    assert_eq!(trace.records.len(), 100);
    assert_eq!(trace.records.iter().map(|r| r.pending_size).max(), Some(3));
    for r in &trace.records {
        assert_eq!(r.tau, r.t - r.dispatch_iteration);
    }
}

#[test]
fn every_dispatch_is_processed_once() {
    let t_max = 300;
    let trace = run(&config(5, t_max, 1)).unwrap();
    let mut seen = vec![0usize; t_max + 1];
    for r in &trace.records {
        seen[r.dispatch_iteration] += 1;
    }
    assert!((1..=5).contains(&seen[1]));
    assert!(seen[2..].iter().all(|&c| c <= 1));
    let issued: usize = trace.metadata.dispatches.iter().sum();
    assert_eq!(issued, t_max + trace.metadata.in_flight_at_end);
    assert_eq!(trace.metadata.in_flight_at_end, 4);
}

#[test]
fn slow_samples_arrive_more_stale() {
    let mut slow_ratio = Vec::new();
    for seed in 0..3 {
        let trace = run(&config(7, 10_000, seed)).unwrap();
        let mean = |c: Component| {
            let taus: Vec<f64> = trace
                .records
                .iter()
                .filter(|r| r.component == c)
                .map(|r| r.tau as f64)
                .collect();
            taus.iter().sum::<f64>() / taus.len() as f64
        };
        slow_ratio.push(mean(Component::Slow) / mean(Component::Fast));
    }
    let avg = slow_ratio.iter().sum::<f64>() / 3.0;
    assert!(avg >= 3.0, "{slow_ratio:?}");
}

#[test]
fn replay_is_bitwise_and_detects_seed_changes() {
    let cfg = SimConfig {
        method: MethodSpec::OrderedMomentum {
            eta: Some(0.05),
            beta: Some(0.2),
        },
        ..config(4, 200, 9)
    };
    let trace = run(&cfg).unwrap();
    assert_eq!(replay_check(&trace, &cfg).unwrap(), ReplayOutcome::Identical);
    assert_eq!(
        replay_check(&trace, &cfg.with_seed(10)).unwrap(),
        ReplayOutcome::Diverged { first_iteration: 1 }
    );
    let other = SimConfig {
        iterations: 201,
        ..cfg.clone()
    };
    assert!(matches!(replay_check(&trace, &other), Err(Error::Precondition(_))));
}

#[test]
fn same_seed_gives_same_schedule_across_methods() {
    let a = run(&config(4, 300, 5)).unwrap();
    let b = run(&SimConfig {
        method: MethodSpec::NaiveMomentum { eta: 0.02, beta: 0.5 },
        ..config(4, 300, 5)
    })
    .unwrap();
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!((x.worker_id, x.dispatch_iteration, x.component), (y.worker_id, y.dispatch_iteration, y.component));
    }
}

#[test]
fn blow_up_reports_last_finite_iterate() {
    let cfg = SimConfig {
        method: MethodSpec::Vanilla { eta: 50.0 },
        ..config(2, 5_000, 0)
    };
    match run(&cfg) {
        Err(Error::Diverged { iteration, last_finite }) => {
            assert!(iteration > 1);
            assert!(last_finite.iter().all(|v| v.is_finite()));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn validation_rejects_bad_configs() {
    assert!(matches!(config(4, 3, 0).build(), Err(Error::InvalidConfig { .. })));
    let mixture = ObjectiveSpec::Mixture {
        components: vec![
            MixtureComponentSpec {
                weight: 0.2,
                quadratic: QuadraticSpec {
                    diagonal: Some(vec![1.0]),
                    center: Some(vec![1.0]),
                    ..Default::default()
                },
            },
            MixtureComponentSpec {
                weight: 0.8,
                quadratic: QuadraticSpec {
                    diagonal: Some(vec![1.0]),
                    center: Some(vec![-1.0]),
                    ..Default::default()
                },
            },
        ],
    };
    let err = SimConfig {
        objective: mixture,
        ..config(2, 10, 0)
    }
    .build()
    .unwrap_err();
    assert!(matches!(err, Error::InvalidConfig { ref field, .. } if field == "delay.slow_weight"));
    let outside = SimConfig {
        domain: Some(crate::objective::DomainSpec {
            center: vec![0.0; 3],
            radius: 0.5,
        }),
        ..config(2, 10, 0)
    };
    assert!(matches!(outside.build(), Err(Error::InvalidConfig { ref field, .. }) if field == "domain"));
}

#[test]
fn snapshots_follow_stride() {
    let trace = run(&SimConfig {
        snapshot_stride: Some(7),
        ..config(3, 50, 2)
    })
    .unwrap();
    let ts: Vec<usize> = trace.snapshots.iter().map(|s| s.t).collect();
    assert_eq!(ts, vec![1, 8, 15, 22, 29, 36, 43, 50]);
    assert_eq!(default_snapshot_stride(10_000), 10);
    assert_eq!(default_snapshot_stride(10), 1);
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = config(4, 100, 1);
    let text = toml::to_string(&cfg).unwrap();
    let back: SimConfig = toml::from_str(&text).unwrap();
    assert_eq!(cfg, back);
    assert_eq!(cfg.config_hash().unwrap(), cfg.with_seed(99).config_hash().unwrap());
}

//! Determinism: a run can be replayed bit for bit from its config, its CSV
//! is byte-stable, and a different seed is reported as a divergence.

use ordered_async::delay::DelaySpec;
use ordered_async::objective::{ObjectiveSpec, QuadraticSpec};
use ordered_async::optim::MethodSpec;
use ordered_async::simulator::{replay_check, run, RecordOptions, SimConfig};

fn main() -> ordered_async::Result<()> {
    let cfg = SimConfig {
        objective: ObjectiveSpec::Quadratic(QuadraticSpec {
            diagonal: Some(vec![1.0, 0.5, 0.25]),
            center: Some(vec![1.0, 1.0, 1.0]),
            noise_stddev: 0.3,
            ..Default::default()
        }),
        domain: None,
        delay: DelaySpec::new(0.1),
        method: MethodSpec::OrderedMomentum {
            eta: Some(0.05),
            beta: Some(0.05),
        },
        iterations: 500,
        workers: 4,
        seed: 2024,
        snapshot_stride: None,
        initial_point: None,
        tail_fraction: 0.1,
        record: RecordOptions::default(),
    };
    let trace = run(&cfg)?;
    println!("config hash {}", trace.metadata.config_hash);
    println!("replay with the same seed: {:?}", replay_check(&trace, &cfg)?);
    println!("replay with seed + 1:      {:?}", replay_check(&trace, &cfg.with_seed(cfg.seed + 1))?);

    let mut a = Vec::new();
    let mut b = Vec::new();
    trace.write_csv(&mut a)?;
    run(&cfg)?.write_csv(&mut b)?;
    println!("CSV byte-identical across runs: {}", a == b);
    let text = String::from_utf8(a).expect("CSV is UTF-8");
    for line in text.lines().take(4) {
        println!("  {line}");
    }

    let mut other = cfg.clone();
    other.workers = 5;
    match replay_check(&trace, &other) {
        Err(e) => println!("replay against a different config: {e}"),
        Ok(outcome) => println!("unexpected outcome {outcome:?}"),
    }
    Ok(())
}

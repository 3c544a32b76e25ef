//! Ordered momentum on a nonconvex objective, checked against the direct-sum
//! oracle, with the delay bias of a few steps.

use ordered_async::analysis::{
    convergence_metrics, relative_error, unrolled_momentum, virtual_momentum_and_bias,
};
use ordered_async::delay::DelaySpec;
use ordered_async::objective::{ObjectiveSpec, QuadraticSpec};
use ordered_async::optim::MethodSpec;
use ordered_async::simulator::{RecordOptions, SimConfig};
use ordered_async::Vector;

fn main() -> ordered_async::Result<()> {
    let cfg = SimConfig {
        objective: ObjectiveSpec::Nonconvex {
            base: QuadraticSpec {
                diagonal: Some(vec![0.1, 0.05]),
                center: Some(vec![0.0, 0.0]),
                noise_stddev: 1.0,
                ..Default::default()
            },
            squash_scale: 0.45,
        },
        domain: None,
        delay: DelaySpec::new(0.1),
        // Omitted β and η come from the nonconvex theory.
        method: MethodSpec::OrderedMomentum { eta: None, beta: None },
        iterations: 2_000,
        workers: 4,
        seed: 7,
        snapshot_stride: None,
        initial_point: Some(vec![1.955, 1.955]),
        tail_fraction: 0.1,
        record: RecordOptions { details: true },
    };
    let sim = cfg.build()?;
    let beta = match &sim.optimizer {
        ordered_async::optim::Optimizer::OrderedMomentum(s) => s.momentum_param(),
        _ => unreachable!(),
    };
    let trace = sim.run()?;
    let constants = sim.objective.theory_constants(&Vector::from_vec(vec![1.955, 1.955]))?;
    let metrics = convergence_metrics(&trace, &constants);
    println!("beta = {beta:.5}, f(x1) - f* = {:.4}", constants.delta_gap()?);
    for t in [1, 10, 100, 1000, 2000] {
        println!("t = {t:>5}: avg ‖∇f‖² = {:.5}", metrics.avg_sq_grad_norm[t - 1]);
    }

    let unrolled = unrolled_momentum(&trace, beta)?;
    let worst = unrolled
        .iter()
        .zip(trace.details.as_ref().unwrap())
        .map(|(u, d)| relative_error(d.buffer.as_ref().unwrap(), u, 1e-300))
        .fold(0.0, f64::max);
    println!("recursive vs direct-sum momentum: max relative error {worst:.2e}");

    for t in [50, 500, 1500] {
        let e = virtual_momentum_and_bias(&trace, &sim.objective, beta, t)?;
        println!(
            "t = {t}: missing {:?}, ‖b_t‖ = {:.2e}, ‖ε̂_t‖ = {:.2e}",
            e.missing,
            e.bias.norm(),
            e.epsilon_hat.norm()
        );
    }
    Ok(())
}

//! Ordered μ²-SGD on a ball: the convex step-size window, the final excess
//! loss at its ends, and the anytime-averaging identities on the trace.

use ordered_async::analysis::anytime_checks;
use ordered_async::delay::DelaySpec;
use ordered_async::objective::{DomainSpec, ObjectiveSpec, QuadraticSpec};
use ordered_async::optim::{theorem2_step_window, MethodSpec};
use ordered_async::simulator::{run, RecordOptions, SimConfig};
use ordered_async::Vector;

fn main() -> ordered_async::Result<()> {
    let (t, m, radius, sigma) = (10_000, 4, 1.0, 2.0);
    let objective = ObjectiveSpec::Quadratic(QuadraticSpec {
        diagonal: Some(vec![1.0, 0.8, 0.6, 0.4, 0.2]),
        center: Some(vec![0.27, -0.27, 0.27, -0.27, 0.27]),
        noise_stddev: sigma,
        ..Default::default()
    });
    let built = objective.build()?;
    let window = theorem2_step_window(built.smoothness(), sigma, 0.0, 2.0 * radius, t, m, 1.0)?;
    println!("window [{:.3e}, {:.3e}], ratio {:.1}", window.eta_min, window.eta_max, window.ratio());
    let f_star = built.theory_constants(&Vector::zeros(5))?.f_star()?;

    for eta in [window.eta_min, window.eta_max] {
        let cfg = SimConfig {
            objective: objective.clone(),
            domain: Some(DomainSpec {
                center: vec![0.0; 5],
                radius,
            }),
            delay: DelaySpec::new(0.1),
            method: MethodSpec::OrderedMu2 {
                eta: Some(eta),
                beta: None,
                gamma: None,
            },
            iterations: t,
            workers: m,
            seed: 3,
            snapshot_stride: None,
            initial_point: None,
            tail_fraction: 0.1,
            record: RecordOptions { details: true },
        };
        let trace = run(&cfg)?;
        let check = anytime_checks(&trace, 2.0 * radius)?;
        println!(
            "eta {eta:.3e}: f(x_T) - f* = {:.3e}, identity error {:.1e}, contraction ratio {:.3}",
            trace.final_loss - f_star,
            check.max_identity_error,
            check.max_contraction_ratio
        );
    }
    Ok(())
}

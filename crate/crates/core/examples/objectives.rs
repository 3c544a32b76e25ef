//! Closed-form constants and stochastic gradients of every objective family.

use ordered_async::delay::Component;
use ordered_async::objective::{
    MixtureComponentSpec, ObjectiveSpec, QuadraticSpec, SyntheticClassification,
};
use ordered_async::Vector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ordered_async::Result<()> {
    let specs = [
        ObjectiveSpec::Quadratic(QuadraticSpec {
            matrix: Some(vec![vec![2.0, 0.5], vec![0.5, 1.0]]),
            center: Some(vec![1.0, -1.0]),
            noise_stddev: 0.5,
            ..Default::default()
        }),
        ObjectiveSpec::Mixture {
            components: vec![
                MixtureComponentSpec {
                    weight: 0.1,
                    quadratic: QuadraticSpec {
                        diagonal: Some(vec![1.0, 1.0]),
                        center: Some(vec![1.0, 0.0]),
                        noise_stddev: 1.0,
                        ..Default::default()
                    },
                },
                MixtureComponentSpec {
                    weight: 0.9,
                    quadratic: QuadraticSpec {
                        diagonal: Some(vec![1.0, 1.0]),
                        center: Some(vec![-1.0, 0.0]),
                        noise_stddev: 1.0,
                        ..Default::default()
                    },
                },
            ],
        },
        ObjectiveSpec::Nonconvex {
            base: QuadraticSpec {
                diagonal: Some(vec![0.1, 0.05]),
                center: Some(vec![0.0, 0.0]),
                noise_stddev: 1.0,
                ..Default::default()
            },
            squash_scale: 0.45,
        },
        ObjectiveSpec::Logistic(SyntheticClassification {
            samples: 300,
            features: 4,
            classes: 3,
            slow_classes: vec![0],
            slow_fraction: 0.1,
            separation: 2.0,
            l2_reg: 1e-3,
            noise_stddev: 0.0,
            data_seed: 1,
        }),
    ];

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for spec in &specs {
        let objective = spec.build()?;
        let x1 = Vector::zeros(objective.dim());
        let c = objective.theory_constants(&x1)?;
        println!("{} (d = {}, convex = {})", objective.kind(), objective.dim(), objective.is_convex());
        println!("  L = {:.4}", c.smoothness);
        if let (Some(fs), Some(xs)) = (c.f_star, &c.minimizer) {
            println!("  f* = {fs:.4} at x* = {:?}", xs.as_slice());
        }
        if let Some(sigma) = c.sigma {
            println!("  sigma = {sigma:.4}, f(x1) - f* = {:.4}", c.delta_gap.unwrap_or(f64::NAN));
        }
        if let Some(w) = objective.group_weights() {
            println!("  group weights (slow, fast) = {w:?}");
        }
        let slow = objective.draw_sample(Component::Slow, &mut rng);
        let g = objective.grad_sample(&x1, &slow)?;
        println!("  slow-group gradient at x1 = {:.3?}", g.as_slice());
        println!("  full gradient at x1       = {:.3?}", objective.grad_full(&x1)?.as_slice());
    }
    Ok(())
}

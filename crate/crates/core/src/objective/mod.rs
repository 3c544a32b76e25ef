//! Synthetic stochastic objectives with closed-form constants.
//!
//! Every family exposes the exact full gradient, a sample-based stochastic
//! gradient, and (where available) the smoothness constant, minimizer and
//! optimal value needed by theory-driven step sizes and convergence metrics.
//!
//! Stochastic gradients are evaluated from an explicit [`SampleDraw`]. The same
//! draw evaluated at two points reuses the same component and the same noise
//! vector, so `∇f(x; z) − ∇f(y; z)` depends only on the component curvature.

mod domain;
mod logistic;
mod mixture;
mod nonconvex;
mod quadratic;
mod spec;

pub use domain::BallDomain;
pub use logistic::{LogisticObjective, SyntheticClassification};
pub use mixture::MixtureObjective;
pub use nonconvex::NonconvexObjective;
pub use quadratic::QuadraticObjective;
pub use spec::{DomainSpec, MixtureComponentSpec, ObjectiveSpec, QuadraticSpec};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::delay::Component;
use crate::error::{Error, Result};
use crate::Vector;

pub(crate) fn check_dim(expected: usize, x: &Vector) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: x.len(),
        });
    }
    Ok(())
}

/// One stochastic sample `z`: which component it came from, an optional data
/// index (logistic family), and a standard-normal noise vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleDraw {
    pub component: usize,
    pub sample_index: Option<usize>,
    pub noise: Vector,
}

/// Constants consumed by step-size formulas and metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct TheoryConstants {
    /// Smoothness constant `L` (an upper bound for the logistic family).
    pub smoothness: f64,
    /// Gradient-noise standard deviation `σ`.
    pub sigma: Option<f64>,
    /// Smoothness variance `σ_L` under shared-sample evaluation.
    pub sigma_smoothness: Option<f64>,
    /// `Δ = f(x₁) − f*`.
    pub delta_gap: Option<f64>,
    pub minimizer: Option<Vector>,
    pub f_star: Option<f64>,
}

impl TheoryConstants {
    pub fn sigma(&self) -> Result<f64> {
        self.sigma
            .ok_or_else(|| Error::UnsupportedObjective("a closed-form noise level".into()))
    }

    pub fn delta_gap(&self) -> Result<f64> {
        self.delta_gap
            .ok_or_else(|| Error::UnsupportedObjective("a closed-form optimality gap".into()))
    }

    pub fn f_star(&self) -> Result<f64> {
        self.f_star
            .ok_or_else(|| Error::UnsupportedObjective("a closed-form optimal value".into()))
    }

    pub fn minimizer(&self) -> Result<&Vector> {
        self.minimizer
            .as_ref()
            .ok_or_else(|| Error::UnsupportedObjective("a closed-form minimizer".into()))
    }
}

#[derive(Clone, Debug)]
pub enum Objective {
    Quadratic(QuadraticObjective),
    Mixture(MixtureObjective),
    Nonconvex(NonconvexObjective),
    Logistic(LogisticObjective),
}

impl Objective {
    pub fn dim(&self) -> usize {
        match self {
            Objective::Quadratic(q) => q.dim(),
            Objective::Mixture(m) => m.dim(),
            Objective::Nonconvex(n) => n.dim(),
            Objective::Logistic(l) => l.dim(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Objective::Quadratic(_) => "quadratic",
            Objective::Mixture(_) => "mixture",
            Objective::Nonconvex(_) => "nonconvex",
            Objective::Logistic(_) => "logistic",
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            Objective::Nonconvex(n) => n.is_convex(),
            _ => true,
        }
    }

    pub fn value(&self, x: &Vector) -> Result<f64> {
        match self {
            Objective::Quadratic(q) => q.value(x),
            Objective::Mixture(m) => m.value(x),
            Objective::Nonconvex(n) => n.value(x),
            Objective::Logistic(l) => l.value(x),
        }
    }

    /// Exact gradient of the deterministic objective.
    pub fn grad_full(&self, x: &Vector) -> Result<Vector> {
        match self {
            Objective::Quadratic(q) => q.gradient(x),
            Objective::Mixture(m) => m.gradient(x),
            Objective::Nonconvex(n) => n.gradient(x),
            Objective::Logistic(l) => l.gradient(x),
        }
    }

    pub fn smoothness(&self) -> f64 {
        match self {
            Objective::Quadratic(q) => q.smoothness(),
            Objective::Mixture(m) => m.smoothness(),
            Objective::Nonconvex(n) => n.smoothness(),
            Objective::Logistic(l) => l.smoothness(),
        }
    }

    /// Sampling weights of the slow and fast groups when the objective is a
    /// two-group distribution that the delay model can route; `None` when the
    /// group tag does not change the sample distribution.
    pub fn group_weights(&self) -> Option<Vec<f64>> {
        match self {
            Objective::Mixture(m) if m.weights().len() == 2 => Some(m.weights().to_vec()),
            Objective::Logistic(l) => Some(l.group_weights().to_vec()),
            _ => None,
        }
    }

    fn component_noise(&self, component: usize) -> f64 {
        let sigma = match self {
            Objective::Quadratic(q) => q.noise_stddev(),
            Objective::Mixture(m) => m.components()[component].noise_stddev(),
            Objective::Nonconvex(n) => n.base().noise_stddev(),
            Objective::Logistic(l) => l.noise_stddev(),
        };
        sigma / (self.dim() as f64).sqrt()
    }

    fn draw_noise<R: Rng + ?Sized>(&self, component: usize, rng: &mut R) -> Vector {
        if self.component_noise(component) == 0.0 {
            Vector::zeros(self.dim())
        } else {
            Vector::from_fn(self.dim(), |_, _| StandardNormal.sample(rng))
        }
    }

    /// Draws a sample from the group selected by the delay model.
    ///
    /// Mixtures with more than two components ignore the tag and pick a
    /// component by weight.
    pub fn draw_sample<R: Rng + ?Sized>(&self, group: Component, rng: &mut R) -> SampleDraw {
        let (component, sample_index) = match self {
            Objective::Mixture(m) if m.weights().len() == 2 => (group.index(), None),
            Objective::Mixture(m) => (pick_weighted(m.weights(), rng), None),
            Objective::Logistic(l) => {
                let pool = l.group_indices(group);
                (group.index(), Some(pool[rng.random_range(0..pool.len())]))
            }
            _ => (0, None),
        };
        let noise = self.draw_noise(component, rng);
        SampleDraw {
            component,
            sample_index,
            noise,
        }
    }

    /// Draws a sample directly from the full distribution, independent of any
    /// delay coupling.
    pub fn draw_sample_iid<R: Rng + ?Sized>(&self, rng: &mut R) -> SampleDraw {
        let (component, sample_index) = match self {
            Objective::Mixture(m) => (pick_weighted(m.weights(), rng), None),
            Objective::Logistic(l) => {
                let i = rng.random_range(0..l.num_samples());
                (l.groups()[i].index(), Some(i))
            }
            _ => (0, None),
        };
        let noise = self.draw_noise(component, rng);
        SampleDraw {
            component,
            sample_index,
            noise,
        }
    }

    /// `∇f(x; z)` for a fixed sample `z`.
    pub fn grad_sample(&self, x: &Vector, sample: &SampleDraw) -> Result<Vector> {
        check_dim(self.dim(), x)?;
        check_dim(self.dim(), &sample.noise)?;
        let mut g = match self {
            Objective::Quadratic(q) => q.gradient(x)?,
            Objective::Nonconvex(n) => n.gradient(x)?,
            Objective::Mixture(m) => m
                .components()
                .get(sample.component)
                .ok_or_else(|| Error::Protocol(format!("no component {}", sample.component)))?
                .gradient(x)?,
            Objective::Logistic(l) => {
                let i = sample
                    .sample_index
                    .ok_or_else(|| Error::Protocol("logistic sample without index".into()))?;
                l.sample_gradient(x, i)?
            }
        };
        let scale = self.component_noise(sample.component);
        if scale != 0.0 {
            g.axpy(scale, &sample.noise, 1.0);
        }
        Ok(g)
    }

    /// Unbiased stochastic gradient from an independent draw.
    pub fn grad_stochastic<R: Rng + ?Sized>(&self, x: &Vector, rng: &mut R) -> Result<Vector> {
        let sample = self.draw_sample_iid(rng);
        self.grad_sample(x, &sample)
    }

    pub fn theory_constants(&self, x1: &Vector) -> Result<TheoryConstants> {
        check_dim(self.dim(), x1)?;
        let smoothness = self.smoothness();
        let constants = match self {
            Objective::Quadratic(q) => {
                let minimizer = q.minimizer();
                let f_star = minimizer.as_ref().map(|m| q.value(m)).transpose()?;
                TheoryConstants {
                    smoothness,
                    sigma: Some(q.noise_stddev()),
                    sigma_smoothness: Some(0.0),
                    delta_gap: f_star.map(|fs| q.value(x1).map(|f1| f1 - fs)).transpose()?,
                    minimizer,
                    f_star,
                }
            }
            Objective::Mixture(m) => {
                let minimizer = m.minimizer();
                let f_star = minimizer.as_ref().map(|x| m.value(x)).transpose()?;
                let sigma = minimizer.as_ref().map(|x| m.noise_stddev_at(x)).transpose()?;
                TheoryConstants {
                    smoothness,
                    sigma,
                    sigma_smoothness: Some(m.smoothness_variance()),
                    delta_gap: f_star.map(|fs| m.value(x1).map(|f1| f1 - fs)).transpose()?,
                    minimizer,
                    f_star,
                }
            }
            Objective::Nonconvex(n) => {
                let f_star = n.f_star();
                TheoryConstants {
                    smoothness,
                    sigma: Some(n.base().noise_stddev()),
                    sigma_smoothness: Some(0.0),
                    delta_gap: Some(n.value(x1)? - f_star),
                    minimizer: Some(n.minimizer().clone()),
                    f_star: Some(f_star),
                }
            }
            Objective::Logistic(_) => TheoryConstants {
                smoothness,
                sigma: None,
                sigma_smoothness: None,
                delta_gap: None,
                minimizer: None,
                f_star: None,
            },
        };
        Ok(constants)
    }

    /// Hex digest of every numeric parameter; equal digests mean identical
    /// objectives.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.kind().as_bytes());
        let mut put = |xs: &mut dyn Iterator<Item = f64>| {
            for x in xs {
                h.update(x.to_bits().to_le_bytes());
            }
        };
        fn quad(q: &QuadraticObjective) -> impl Iterator<Item = f64> + '_ {
            q.curvature()
                .iter()
                .copied()
                .chain(q.linear().iter().copied())
                .chain(std::iter::once(q.noise_stddev()))
        }
        match self {
            Objective::Quadratic(q) => put(&mut quad(q)),
            Objective::Mixture(m) => {
                for (c, w) in m.components().iter().zip(m.weights()) {
                    put(&mut quad(c).chain(std::iter::once(*w)));
                }
            }
            Objective::Nonconvex(n) => {
                put(&mut quad(n.base()).chain(std::iter::once(n.squash_scale())))
            }
            Objective::Logistic(l) => {
                put(&mut l.features().iter().copied());
                put(&mut l.labels().iter().map(|&y| y as f64));
                put(&mut l.groups().iter().map(|g| g.index() as f64));
                put(&mut [l.l2_reg(), l.noise_stddev(), l.classes() as f64].into_iter());
            }
        }
        hex::encode(h.finalize())
    }
}

fn pick_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn noiseless_single_component_matches_full_gradient() {
        let obj = Objective::Quadratic(
            QuadraticObjective::diagonal(&[1.0, 3.0], v(&[0.5, -1.0]), 0.0).unwrap(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = v(&[0.2, 0.4]);
        for _ in 0..5 {
            assert_eq!(
                obj.grad_stochastic(&x, &mut rng).unwrap(),
                obj.grad_full(&x).unwrap()
            );
        }
    }

    #[test]
    fn monte_carlo_mean_matches_full_gradient() {
        let obj = Objective::Quadratic(QuadraticObjective::isotropic(v(&[0.3]), 1.0).unwrap());
        let x = v(&[1.7]);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| obj.grad_stochastic(&x, &mut rng).unwrap()[0])
            .sum::<f64>()
            / n as f64;
        let exact = obj.grad_full(&x).unwrap()[0];
        assert!((mean - exact).abs() <= 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn mixture_sampling_frequency() {
        let m = MixtureObjective::isotropic(&[v(&[0.0]), v(&[2.0])], &[0.1, 0.9], 0.0).unwrap();
        let obj = Objective::Mixture(m);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let slow = (0..n)
            .filter(|_| obj.draw_sample_iid(&mut rng).component == 0)
            .count();
        let freq = slow as f64 / n as f64;
        assert!((0.096..=0.104).contains(&freq), "{freq}");
    }

    #[test]
    fn shared_sample_difference_is_curvature_times_displacement() {
        let m = MixtureObjective::isotropic(&[v(&[0.0, 1.0]), v(&[2.0, 0.0])], &[0.3, 0.7], 2.0)
            .unwrap();
        let obj = Objective::Mixture(m);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = obj.draw_sample(Component::Slow, &mut rng);
        let (x, y) = (v(&[0.5, 0.5]), v(&[-1.0, 2.0]));
        let diff = obj.grad_sample(&x, &s).unwrap() - obj.grad_sample(&y, &s).unwrap();
        assert!((diff - (&x - &y)).norm() < 1e-12);
    }

    #[test]
    fn theory_constants_for_quadratic() {
        let obj = Objective::Quadratic(QuadraticObjective::isotropic(v(&[1.0, 1.0]), 0.0).unwrap());
        let c = obj.theory_constants(&v(&[0.0, 0.0])).unwrap();
        assert_eq!(c.f_star, Some(-1.0));
        assert_eq!(c.delta_gap, Some(1.0));
        assert_eq!(c.smoothness, 1.0);
        let d = Objective::Quadratic(
            QuadraticObjective::diagonal(&[1.0, 4.0], v(&[0.0, 0.0]), 0.0).unwrap(),
        );
        assert!((d.theory_constants(&v(&[0.0, 0.0])).unwrap().smoothness - 4.0).abs() < 1e-12);
    }

    #[test]
    fn logistic_lacks_closed_form_optimum() {
        let l = LogisticObjective::synthetic(&SyntheticClassification {
            samples: 20,
            features: 2,
            classes: 2,
            slow_classes: vec![1],
            slow_fraction: 0.25,
            separation: 2.0,
            l2_reg: 1e-3,
            noise_stddev: 0.0,
            data_seed: 0,
        })
        .unwrap();
        let obj = Objective::Logistic(l);
        let c = obj.theory_constants(&Vector::zeros(obj.dim())).unwrap();
        assert!(c.smoothness > 0.0);
        assert!(matches!(c.f_star(), Err(Error::UnsupportedObjective(_))));
    }

    #[test]
    fn fingerprint_distinguishes_parameters() {
        let a = Objective::Quadratic(QuadraticObjective::isotropic(v(&[1.0]), 0.0).unwrap());
        let b = Objective::Quadratic(QuadraticObjective::isotropic(v(&[1.0]), 0.1).unwrap());
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}

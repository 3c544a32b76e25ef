use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::Vector;

use super::quadratic::{solve_psd, QuadraticObjective};
use super::check_dim;

/// Weighted mixture of quadratic components, `f = Σ q_c f_c`.
///
/// Component 0 plays the role of the slow (long-delay) distribution when the
/// mixture is driven by the delay model.
#[derive(Clone, Debug)]
pub struct MixtureObjective {
    components: Vec<QuadraticObjective>,
    weights: Vec<f64>,
    mean_curvature: DMatrix<f64>,
    mean_linear: Vector,
    smoothness: f64,
}

impl MixtureObjective {
    pub fn new(components: Vec<(QuadraticObjective, f64)>) -> Result<Self> {
        if components.len() < 2 {
            return Err(Error::config(
                "objective.components",
                "a mixture needs at least two components",
            ));
        }
        let d = components[0].0.dim();
        for (i, (c, w)) in components.iter().enumerate() {
            if c.dim() != d {
                return Err(Error::config(
                    format!("objective.components[{i}]"),
                    format!("dimension {} differs from {d}", c.dim()),
                ));
            }
            if !(*w > 0.0 && *w < 1.0) {
                return Err(Error::config(
                    format!("objective.components[{i}].weight"),
                    "must lie in (0, 1)",
                ));
            }
        }
        let total: f64 = components.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(
                "objective.components",
                format!("weights sum to {total}, expected 1"),
            ));
        }
        let mut mean_curvature = DMatrix::zeros(d, d);
        let mut mean_linear = Vector::zeros(d);
        for (c, w) in &components {
            mean_curvature += c.curvature() * *w;
            mean_linear += c.linear() * *w;
        }
        let smoothness = SymmetricEigen::new(mean_curvature.clone()).eigenvalues.max();
        let (components, weights) = components.into_iter().unzip();
        Ok(Self {
            components,
            weights,
            mean_curvature,
            mean_linear,
            smoothness,
        })
    }

    /// Mixture of `½‖x − c_k‖²` terms.
    pub fn isotropic(centers: &[Vector], weights: &[f64], noise_stddev: f64) -> Result<Self> {
        if centers.len() != weights.len() {
            return Err(Error::config(
                "objective.components",
                "centers and weights differ in length",
            ));
        }
        let comps = centers
            .iter()
            .zip(weights)
            .map(|(c, w)| Ok((QuadraticObjective::isotropic(c.clone(), noise_stddev)?, *w)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    pub fn dim(&self) -> usize {
        self.mean_linear.len()
    }

    pub fn components(&self) -> &[QuadraticObjective] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x)?;
        Ok(0.5 * x.dot(&(&self.mean_curvature * x)) - self.mean_linear.dot(x))
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x)?;
        Ok(&self.mean_curvature * x - &self.mean_linear)
    }

    /// Solves `Σ q_c A_c x = Σ q_c b_c`.
    pub fn minimizer(&self) -> Option<Vector> {
        solve_psd(&self.mean_curvature, &self.mean_linear)
    }

    /// Total gradient-noise standard deviation at `x`: component spread plus
    /// the additive noise of each component.
    pub fn noise_stddev_at(&self, x: &Vector) -> Result<f64> {
        let full = self.gradient(x)?;
        let mut var = 0.0;
        for (c, w) in self.components.iter().zip(&self.weights) {
            let spread = c.gradient(x)? - &full;
            var += w * (spread.norm_squared() + c.noise_stddev().powi(2));
        }
        Ok(var.sqrt())
    }

    /// Smallest `σ_L` with `E‖(∇f_c(x) − ∇f(x)) − (∇f_c(y) − ∇f(y))‖² ≤ σ_L²‖x−y‖²`
    /// under shared-sample evaluation.
    pub fn smoothness_variance(&self) -> f64 {
        let d = self.dim();
        let mut second = DMatrix::zeros(d, d);
        for (c, w) in self.components.iter().zip(&self.weights) {
            let dev = c.curvature() - &self.mean_curvature;
            second += (&dev * &dev) * *w;
        }
        SymmetricEigen::new(second).eigenvalues.max().max(0.0).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn isotropic_mixture_gradient_is_weighted_mean() {
        let c1 = v(&[1.0, 2.0]);
        let c2 = v(&[-3.0, 0.5]);
        let m = MixtureObjective::isotropic(&[c1.clone(), c2.clone()], &[0.1, 0.9], 0.0).unwrap();
        let g = m.gradient(&v(&[0.0, 0.0])).unwrap();
        let expected = -(c1 * 0.1 + c2 * 0.9);
        assert!((g - expected).norm() < 1e-15);
    }

    #[test]
    fn full_gradient_is_weighted_component_sum() {
        let a1 = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let a2 = DMatrix::from_row_slice(2, 2, &[0.5, -0.1, -0.1, 3.0]);
        let q1 = QuadraticObjective::new(a1, v(&[1.0, -1.0]), 0.0).unwrap();
        let q2 = QuadraticObjective::new(a2, v(&[0.2, 0.7]), 0.0).unwrap();
        let m = MixtureObjective::new(vec![(q1.clone(), 0.3), (q2.clone(), 0.7)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = v(&[rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]);
            let direct = q1.gradient(&x).unwrap() * 0.3 + q2.gradient(&x).unwrap() * 0.7;
            assert!((m.gradient(&x).unwrap() - direct).norm() <= 1e-12);
        }
        let xs = m.minimizer().unwrap();
        assert!(m.gradient(&xs).unwrap().norm() <= 1e-9);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let r = MixtureObjective::isotropic(&[v(&[0.0]), v(&[1.0])], &[0.2, 0.7], 0.0);
        assert!(matches!(r, Err(Error::InvalidConfig { .. })));
    }

    #[test]
    fn equal_curvature_has_zero_smoothness_variance() {
        let m = MixtureObjective::isotropic(&[v(&[0.0]), v(&[2.0])], &[0.1, 0.9], 0.5).unwrap();
        assert_eq!(m.smoothness_variance(), 0.0);
        // spread 0.1*0.9*4 plus noise 0.25
        let s = m.noise_stddev_at(&v(&[0.7])).unwrap();
        assert!((s * s - (0.36 + 0.25)).abs() < 1e-12);
    }
}

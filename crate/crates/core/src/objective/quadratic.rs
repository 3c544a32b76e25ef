use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::Vector;

use super::check_dim;

/// `f(x) = ½ xᵀAx − bᵀx` with additive Gaussian gradient noise of total
/// standard deviation `noise_stddev`.
#[derive(Clone, Debug)]
pub struct QuadraticObjective {
    curvature: DMatrix<f64>,
    linear: Vector,
    noise_stddev: f64,
    smoothness: f64,
    min_eigenvalue: f64,
}

impl QuadraticObjective {
    pub fn new(curvature: DMatrix<f64>, linear: Vector, noise_stddev: f64) -> Result<Self> {
        let d = linear.len();
        if d == 0 {
            return Err(Error::config("objective.linear", "dimension must be at least 1"));
        }
        if curvature.nrows() != d || curvature.ncols() != d {
            return Err(Error::config(
                "objective.curvature",
                format!("expected {d}x{d}, got {}x{}", curvature.nrows(), curvature.ncols()),
            ));
        }
        if curvature.iter().chain(linear.iter()).any(|v| !v.is_finite()) {
            return Err(Error::config("objective", "coefficients must be finite"));
        }
        for i in 0..d {
            for j in 0..i {
                if (curvature[(i, j)] - curvature[(j, i)]).abs() > 1e-12 {
                    return Err(Error::config(
                        "objective.curvature",
                        format!("not symmetric at ({i}, {j})"),
                    ));
                }
            }
        }
        if !(noise_stddev >= 0.0) || !noise_stddev.is_finite() {
            return Err(Error::config("objective.noise_stddev", "must be nonnegative"));
        }
        let eig = SymmetricEigen::new(curvature.clone()).eigenvalues;
        let smoothness = eig.max();
        let min_eigenvalue = eig.min();
        if min_eigenvalue < -1e-12 * smoothness.abs().max(1.0) {
            return Err(Error::config(
                "objective.curvature",
                format!("not positive semidefinite (eigenvalue {min_eigenvalue})"),
            ));
        }
        Ok(Self {
            curvature,
            linear,
            noise_stddev,
            smoothness,
            min_eigenvalue,
        })
    }

    pub fn diagonal(diag: &[f64], linear: Vector, noise_stddev: f64) -> Result<Self> {
        let a = DMatrix::from_diagonal(&Vector::from_column_slice(diag));
        Self::new(a, linear, noise_stddev)
    }

    /// `½‖x − center‖²` up to an additive constant.
    pub fn isotropic(center: Vector, noise_stddev: f64) -> Result<Self> {
        let d = center.len();
        Self::new(DMatrix::identity(d, d), center, noise_stddev)
    }

    /// Builds `½ (x−c)ᵀA(x−c)` up to a constant, i.e. `b = A c`.
    pub fn centered(curvature: DMatrix<f64>, center: &Vector, noise_stddev: f64) -> Result<Self> {
        if curvature.ncols() != center.len() {
            return Err(Error::config(
                "objective.center",
                format!("expected length {}, got {}", curvature.ncols(), center.len()),
            ));
        }
        let b = &curvature * center;
        Self::new(curvature, b, noise_stddev)
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn curvature(&self) -> &DMatrix<f64> {
        &self.curvature
    }

    pub fn linear(&self) -> &Vector {
        &self.linear
    }

    pub fn noise_stddev(&self) -> f64 {
        self.noise_stddev
    }

    /// Largest eigenvalue of the curvature matrix.
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x)?;
        Ok(0.5 * x.dot(&(&self.curvature * x)) - self.linear.dot(x))
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x)?;
        Ok(&self.curvature * x - &self.linear)
    }

    /// Solution of `A x = b`, or `None` when `b` is outside the range of a
    /// singular `A` (the objective is then unbounded below).
    pub fn minimizer(&self) -> Option<Vector> {
        solve_psd(&self.curvature, &self.linear)
    }
}

pub(crate) fn solve_psd(a: &DMatrix<f64>, b: &Vector) -> Option<Vector> {
    if let Some(chol) = a.clone().cholesky() {
        return Some(chol.solve(b));
    }
    let svd = a.clone().svd(true, true);
    let scale = svd.singular_values.max().max(1.0);
    let x = svd.solve(b, 1e-12 * scale).ok()?;
    let residual = (a * &x - b).norm();
    (residual <= 1e-9 * b.norm().max(1.0)).then_some(x)
}

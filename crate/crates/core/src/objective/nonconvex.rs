use crate::error::{Error, Result};
use crate::Vector;

use super::check_dim;
use super::quadratic::QuadraticObjective;

/// Quadratic plus a bounded coordinatewise bump centered on its minimizer:
///
/// `f(x) = q(x) + κ Σ_i φ(x_i − x*_i)`, with `φ(u) = u²/(1+u²)`.
///
/// `φ'' ∈ [−1/2, 2]` with the maximum at `u = 0`, so the Hessian satisfies
/// `A − κ/2 ≼ ∇²f ≼ A + 2κ` and the smoothness constant is exactly
/// `λ_max(A) + 2κ`. Both terms are minimized at `x*`, hence `f* = q(x*)`.
/// The landscape is nonconvex whenever `λ_min(A) < κ/2`.
#[derive(Clone, Debug)]
pub struct NonconvexObjective {
    base: QuadraticObjective,
    squash_scale: f64,
    anchor: Vector,
}

impl NonconvexObjective {
    pub fn new(base: QuadraticObjective, squash_scale: f64) -> Result<Self> {
        if !(squash_scale > 0.0) || !squash_scale.is_finite() {
            return Err(Error::config("objective.squash_scale", "must be positive"));
        }
        if base.min_eigenvalue() <= 0.0 {
            return Err(Error::config(
                "objective.base",
                "curvature must be positive definite",
            ));
        }
        let anchor = base
            .minimizer()
            .ok_or_else(|| Error::config("objective.base", "no minimizer"))?;
        Ok(Self {
            base,
            squash_scale,
            anchor,
        })
    }

    pub fn base(&self) -> &QuadraticObjective {
        &self.base
    }

    pub fn squash_scale(&self) -> f64 {
        self.squash_scale
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn minimizer(&self) -> &Vector {
        &self.anchor
    }

    pub fn smoothness(&self) -> f64 {
        self.base.smoothness() + 2.0 * self.squash_scale
    }

    pub fn is_convex(&self) -> bool {
        self.base.min_eigenvalue() >= 0.5 * self.squash_scale
    }

    pub fn value(&self, x: &Vector) -> Result<f64> {
        let q = self.base.value(x)?;
        let bump: f64 = x
            .iter()
            .zip(self.anchor.iter())
            .map(|(xi, ai)| {
                let u = xi - ai;
                u * u / (1.0 + u * u)
            })
            .sum();
        Ok(q + self.squash_scale * bump)
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x)?;
        let mut g = self.base.gradient(x)?;
        for (gi, (xi, ai)) in g.iter_mut().zip(x.iter().zip(self.anchor.iter())) {
            let u = xi - ai;
            let s = 1.0 + u * u;
            *gi += self.squash_scale * 2.0 * u / (s * s);
        }
        Ok(g)
    }

    pub fn f_star(&self) -> f64 {
        self.base.value(&self.anchor).expect("anchor has base dimension")
    }
}

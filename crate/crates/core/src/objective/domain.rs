use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vector;

/// Euclidean ball used as the feasible set for projected updates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallDomain {
    center: Vector,
    radius: f64,
}

impl BallDomain {
    pub fn new(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::config("domain.radius", "must be positive and finite"));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::config("domain.center", "must be finite"));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        (x - &self.center).norm() <= self.radius + tol
    }

    /// Closest point of the ball to `x`.
    pub fn project(&self, x: &Vector) -> Vector {
        let offset = x - &self.center;
        let dist = offset.norm();
        if dist <= self.radius {
            x.clone()
        } else {
            &self.center + offset * (self.radius / dist)
        }
    }
}

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::delay::Component;
use crate::error::{Error, Result};
use crate::Vector;

use super::check_dim;

/// Multinomial logistic regression over a fixed sample set with an L2 term.
///
/// Parameters are laid out class-major: entry `c * d + j` is the weight of
/// feature `j` for class `c`. Every sample carries a group tag; the slow
/// group is the one whose samples are routed through long delays.
#[derive(Clone, Debug)]
pub struct LogisticObjective {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    groups: Vec<Component>,
    classes: usize,
    l2_reg: f64,
    noise_stddev: f64,
    slow_indices: Vec<usize>,
    fast_indices: Vec<usize>,
    smoothness: f64,
}

/// Gaussian class clusters; the listed classes form the slow group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticClassification {
    pub samples: usize,
    pub features: usize,
    pub classes: usize,
    pub slow_classes: Vec<usize>,
    /// Fraction of samples drawn from slow classes.
    pub slow_fraction: f64,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_l2")]
    pub l2_reg: f64,
    #[serde(default)]
    pub noise_stddev: f64,
    #[serde(default)]
    pub data_seed: u64,
}

fn default_separation() -> f64 {
    2.0
}

fn default_l2() -> f64 {
    1e-3
}

impl LogisticObjective {
    pub fn new(
        features: DMatrix<f64>,
        labels: Vec<usize>,
        groups: Vec<Component>,
        classes: usize,
        l2_reg: f64,
        noise_stddev: f64,
    ) -> Result<Self> {
        let n = features.nrows();
        if n == 0 || features.ncols() == 0 {
            return Err(Error::config("objective.features", "must be non-empty"));
        }
        if labels.len() != n || groups.len() != n {
            return Err(Error::config(
                "objective.labels",
                "labels and groups must have one entry per sample",
            ));
        }
        if classes < 2 {
            return Err(Error::config("objective.classes", "need at least two classes"));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::config(
                "objective.labels",
                format!("label {bad} out of range for {classes} classes"),
            ));
        }
        if !(l2_reg >= 0.0) || !(noise_stddev >= 0.0) {
            return Err(Error::config("objective", "l2_reg and noise_stddev must be nonnegative"));
        }
        let slow_indices: Vec<usize> = (0..n).filter(|&i| groups[i] == Component::Slow).collect();
        let fast_indices: Vec<usize> = (0..n).filter(|&i| groups[i] == Component::Fast).collect();
        if slow_indices.is_empty() || fast_indices.is_empty() {
            return Err(Error::config(
                "objective.groups",
                "both slow and fast groups must be non-empty",
            ));
        }
        let gram = features.transpose() * &features / n as f64;
        let top = SymmetricEigen::new(gram).eigenvalues.max();
        Ok(Self {
            features,
            labels,
            groups,
            classes,
            l2_reg,
            noise_stddev,
            slow_indices,
            fast_indices,
            smoothness: 0.5 * top + l2_reg,
        })
    }

    pub fn synthetic(spec: &SyntheticClassification) -> Result<Self> {
        let &SyntheticClassification {
            samples: n,
            features: d,
            classes,
            separation,
            slow_fraction,
            ..
        } = spec;
        if spec.slow_classes.is_empty() || spec.slow_classes.len() >= classes {
            return Err(Error::config(
                "objective.slow_classes",
                "must name at least one but not all classes",
            ));
        }
        if let Some(bad) = spec.slow_classes.iter().find(|&&c| c >= classes) {
            return Err(Error::config(
                "objective.slow_classes",
                format!("class {bad} out of range"),
            ));
        }
        if !(slow_fraction > 0.0 && slow_fraction < 1.0) {
            return Err(Error::config("objective.slow_fraction", "must lie in (0, 1)"));
        }
        if d == 0 || n < classes {
            return Err(Error::config("objective.samples", "too few samples or features"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.data_seed);
        let means: Vec<Vector> = (0..classes)
            .map(|_| {
                let dir = Vector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                dir.normalize() * separation
            })
            .collect();
        let fast_classes: Vec<usize> = (0..classes)
            .filter(|c| !spec.slow_classes.contains(c))
            .collect();
        let n_slow = ((slow_fraction * n as f64).round() as usize).clamp(1, n - 1);
        let mut labels = Vec::with_capacity(n);
        let mut groups = Vec::with_capacity(n);
        for i in 0..n {
            if i < n_slow {
                labels.push(spec.slow_classes[i % spec.slow_classes.len()]);
                groups.push(Component::Slow);
            } else {
                labels.push(fast_classes[(i - n_slow) % fast_classes.len()]);
                groups.push(Component::Fast);
            }
        }
        let features = DMatrix::from_fn(n, d, |i, j| {
            let z: f64 = StandardNormal.sample(&mut rng);
            means[labels[i]][j] + z
        });
        Self::new(features, labels, groups, classes, spec.l2_reg, spec.noise_stddev)
    }

    pub fn num_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.num_features() * self.classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn groups(&self) -> &[Component] {
        &self.groups
    }

    pub fn noise_stddev(&self) -> f64 {
        self.noise_stddev
    }

    pub fn l2_reg(&self) -> f64 {
        self.l2_reg
    }

    pub(crate) fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    /// Fractions of samples in the slow and fast groups.
    pub fn group_weights(&self) -> [f64; 2] {
        let n = self.num_samples() as f64;
        [
            self.slow_indices.len() as f64 / n,
            self.fast_indices.len() as f64 / n,
        ]
    }

    pub(crate) fn group_indices(&self, group: Component) -> &[usize] {
        match group {
            Component::Slow => &self.slow_indices,
            Component::Fast => &self.fast_indices,
        }
    }

    /// Upper bound `½ λ_max(XᵀX/n) + λ` from the softmax Hessian bound
    /// `diag(p) − ppᵀ ≼ ½ I`.
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn logits(&self, x: &Vector, i: usize) -> Vec<f64> {
        let d = self.num_features();
        let row = self.features.row(i);
        (0..self.classes)
            .map(|c| row.iter().zip(x.rows(c * d, d).iter()).map(|(a, w)| a * w).sum())
            .collect()
    }

    fn sample_loss(&self, x: &Vector, i: usize) -> f64 {
        let z = self.logits(x, i);
        let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = zmax + z.iter().map(|v| (v - zmax).exp()).sum::<f64>().ln();
        lse - z[self.labels[i]]
    }

    fn accumulate_sample_gradient(&self, x: &Vector, i: usize, scale: f64, out: &mut Vector) {
        let d = self.num_features();
        let z = self.logits(x, i);
        let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
        let total: f64 = exps.iter().sum();
        let row = self.features.row(i);
        for c in 0..self.classes {
            let mut coef = exps[c] / total;
            if c == self.labels[i] {
                coef -= 1.0;
            }
            let coef = coef * scale;
            for j in 0..d {
                out[c * d + j] += coef * row[j];
            }
        }
    }

    pub fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x)?;
        let n = self.num_samples();
        let data: f64 = (0..n).map(|i| self.sample_loss(x, i)).sum::<f64>() / n as f64;
        Ok(data + 0.5 * self.l2_reg * x.norm_squared())
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x)?;
        let n = self.num_samples();
        let mut g = x * self.l2_reg;
        for i in 0..n {
            self.accumulate_sample_gradient(x, i, 1.0 / n as f64, &mut g);
        }
        Ok(g)
    }

    pub fn sample_gradient(&self, x: &Vector, i: usize) -> Result<Vector> {
        check_dim(self.dim(), x)?;
        if i >= self.num_samples() {
            return Err(Error::Protocol(format!("sample index {i} out of range")));
        }
        let mut g = x * self.l2_reg;
        self.accumulate_sample_gradient(x, i, 1.0, &mut g);
        Ok(g)
    }

    pub fn predict(&self, x: &Vector, i: usize) -> usize {
        let z = self.logits(x, i);
        let mut best = 0;
        for c in 1..z.len() {
            if z[c] > z[best] {
                best = c;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small() -> LogisticObjective {
        LogisticObjective::synthetic(&SyntheticClassification {
            samples: 60,
            features: 3,
            classes: 3,
            slow_classes: vec![2],
            slow_fraction: 0.2,
            separation: 2.0,
            l2_reg: 1e-2,
            noise_stddev: 0.0,
            data_seed: 11,
        })
        .unwrap()
    }

    #[test]
    fn group_weights_follow_slow_fraction() {
        let f = small();
        assert_eq!(f.group_weights(), [0.2, 0.8]);
        assert!(f
            .labels()
            .iter()
            .zip(f.groups())
            .all(|(&y, &g)| (y == 2) == (g == Component::Slow)));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let f = small();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x = Vector::from_fn(f.dim(), |_, _| rng.random_range(-1.0..1.0));
            let g = f.gradient(&x).unwrap();
            let h = 1e-6;
            let fd = Vector::from_fn(f.dim(), |k, _| {
                let mut e = Vector::zeros(f.dim());
                e[k] = h;
                (f.value(&(&x + &e)).unwrap() - f.value(&(&x - &e)).unwrap()) / (2.0 * h)
            });
            assert!((&g - &fd).norm() <= 1e-6 * g.norm().max(1.0));
        }
    }

    #[test]
    fn loss_is_finite_for_large_parameters() {
        let f = small();
        let x = Vector::from_element(f.dim(), 1e3);
        assert!(f.value(&x).unwrap().is_finite());
        assert!(f.gradient(&x).unwrap().iter().all(|g| g.is_finite()));
    }

    #[test]
    fn smoothness_bound_dominates_finite_difference_hessian() {
        let f = small();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-4;
        for _ in 0..10 {
            let x = Vector::from_fn(f.dim(), |_, _| rng.random_range(-2.0..2.0));
            let u = Vector::from_fn(f.dim(), |_, _| rng.random_range(-1.0..1.0)).normalize();
            let hv = (f.gradient(&(&x + &u * h)).unwrap() - f.gradient(&(&x - &u * h)).unwrap())
                / (2.0 * h);
            assert!(hv.norm() <= f.smoothness() + 1e-6);
        }
    }
}

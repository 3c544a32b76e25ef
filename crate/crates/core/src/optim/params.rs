use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight `β(1−β)^τ` that a gradient computed `τ` iterations ago carries in
/// the delay-free exponential moving average.
pub fn ordered_weight(beta: f64, delay: usize) -> f64 {
    beta * (1.0 - beta).powi(delay.min(i32::MAX as usize) as i32)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentumParams {
    pub beta: f64,
    pub eta: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(name, "must be positive and finite"))
    }
}

/// Momentum and step size for the ordered-momentum method:
///
/// `β = min{1/(16(M−1)), √(5LΔ)/(σ√T)}`,
/// `η = min{1/(32√2 L(M−1)), √(5Δ)/(2σ√(2LT))}`.
///
/// With a single worker the `M − 1` branches do not apply and `β` is capped at 1.
pub fn theorem1_params(
    smoothness: f64,
    delta_gap: f64,
    sigma: f64,
    horizon: usize,
    workers: usize,
) -> Result<MomentumParams> {
    positive("smoothness", smoothness)?;
    positive("delta_gap", delta_gap)?;
    positive("sigma", sigma)?;
    if horizon == 0 {
        return Err(Error::config("iterations", "must be at least 1"));
    }
    if workers == 0 {
        return Err(Error::config("workers", "must be at least 1"));
    }
    let t = horizon as f64;
    let mut beta = (5.0 * smoothness * delta_gap).sqrt() / (sigma * t.sqrt());
    let mut eta = (5.0 * delta_gap).sqrt() / (2.0 * sigma * (2.0 * smoothness * t).sqrt());
    if workers > 1 {
        let pending = (workers - 1) as f64;
        beta = beta.min(1.0 / (16.0 * pending));
        eta = eta.min(1.0 / (32.0 * std::f64::consts::SQRT_2 * smoothness * pending));
    } else {
        beta = beta.min(1.0);
    }
    Ok(MomentumParams { beta, eta })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepWindow {
    pub eta_min: f64,
    pub eta_max: f64,
}

impl StepWindow {
    pub fn ratio(&self) -> f64 {
        self.eta_max / self.eta_min
    }

    /// `n` log-spaced step sizes from `eta_min` to `eta_max` inclusive.
    pub fn log_grid(&self, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![self.eta_max],
            _ => {
                let (lo, hi) = (self.eta_min.ln(), self.eta_max.ln());
                (0..n)
                    .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
                    .collect()
            }
        }
    }
}

/// Admissible step sizes for ordered μ²-SGD with `α_t = t`:
/// `η_max = 1/(4LT)` and `η_min = 1/(T·c·((σ/D + σ_L)√T + LM))`, where `c`
/// stands in for the unspecified constant (1 by default).
pub fn theorem2_step_window(
    smoothness: f64,
    sigma: f64,
    sigma_smoothness: f64,
    diameter: f64,
    horizon: usize,
    workers: usize,
    constant: f64,
) -> Result<StepWindow> {
    positive("smoothness", smoothness)?;
    positive("diameter", diameter)?;
    positive("window_constant", constant)?;
    if !(sigma >= 0.0) || !(sigma_smoothness >= 0.0) {
        return Err(Error::config("sigma", "must be nonnegative"));
    }
    if horizon == 0 || workers == 0 {
        return Err(Error::config("iterations", "horizon and workers must be positive"));
    }
    let t = horizon as f64;
    let eta_max = 1.0 / (4.0 * smoothness * t);
    let inner = (sigma / diameter + sigma_smoothness) * t.sqrt() + smoothness * workers as f64;
    let eta_min = 1.0 / (t * constant * inner);
    Ok(StepWindow { eta_min, eta_max })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_weight_values() {
        assert_eq!(ordered_weight(0.5, 0), 0.5);
        assert!((ordered_weight(0.1, 2) - 0.081).abs() < 1e-15);
        // 0.1 * 0.9^50 with 40-digit arithmetic
        assert!((ordered_weight(0.1, 50) - 5.153_775_207_320_113e-4).abs() < 1e-18);
    }

    #[test]
    fn theorem1_branches() {
        let p = theorem1_params(1.0, 1.0, 1.0, 10, 2).unwrap();
        assert_eq!(p.beta, 1.0 / 16.0);
        let p = theorem1_params(1.0, 1.0, 1.0, 5, 1000).unwrap();
        assert_eq!(p.beta, 1.0 / (16.0 * 999.0));
        let p = theorem1_params(1.0, 1.0, 1.0, 1_000_000, 2).unwrap();
        assert!((p.beta - 2.236_067_977_499_79e-3).abs() < 1e-15);
        let p = theorem1_params(1.0, 1.0, 1.0, 2000, 4).unwrap();
        assert!((p.eta - 7.365_695_637_359_87e-3).abs() < 1e-15);
        assert!(theorem1_params(0.0, 1.0, 1.0, 10, 2).is_err());
        assert!(theorem1_params(1.0, -1.0, 1.0, 10, 2).is_err());
    }

    #[test]
    fn theorem1_single_worker_uses_noise_branch() {
        let p = theorem1_params(1.0, 1.0, 1.0, 10_000, 1).unwrap();
        assert!((p.beta - 5f64.sqrt() / 100.0).abs() < 1e-15);
        assert!((p.eta - 5f64.sqrt() / (2.0 * 20_000f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn theorem2_window_values() {
        let w = theorem2_step_window(1.0, 0.0, 0.0, 1.0, 100, 1, 1.0).unwrap();
        assert_eq!(w.eta_max, 0.0025);
        assert!((w.eta_min - 0.01).abs() < 1e-15);
        let w = theorem2_step_window(1.0, 1.0, 0.0, 1.0, 10_000, 4, 1.0).unwrap();
        assert!((w.eta_min - 9.615_384_615_384_615e-7).abs() < 1e-20);
        let grid = w.log_grid(5);
        assert!((grid[0] - w.eta_min).abs() < 1e-20);
        assert!((grid[4] - w.eta_max).abs() < 1e-18);
        assert!(grid.windows(2).all(|p| p[0] < p[1]));
    }
}

//! Data-dependent delay model.
//!
//! Worker `i` returns after a geometric number of clock ticks with parameter
//! `p_i`. The same waiting time decides which data group the worker sampled
//! from: waits longer than the worker's threshold `τ_i` draw from the slow
//! group, so slow samples arrive stale while `P(slow) = q₁` is preserved for
//! every worker.
//!
//! The wait is realized as an exponential latent time `E` with rate
//! `−ln(1 − p_i)`; its ceiling is exactly `Geometric(p_i)` on `{1, 2, …}` and
//! `P(E > τ) = (1 − p_i)^τ` holds for real `τ`, which the integer wait alone
//! only satisfies at integer thresholds.

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Exp, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Data group of a sample. `Slow` is the long-delay distribution `𝒟₁`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Component {
    Slow,
    Fast,
}

impl Component {
    pub fn index(self) -> usize {
        match self {
            Component::Slow => 0,
            Component::Fast => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Component::Slow => "slow",
            Component::Fast => "fast",
        }
    }
}

/// `p_i = i / Σ_j j` for workers `i = 1..=M`.
pub fn default_arrival_probs(num_workers: usize) -> Result<Vec<f64>> {
    if num_workers == 0 {
        return Err(Error::config("workers", "need at least one worker"));
    }
    let total = (num_workers * (num_workers + 1) / 2) as f64;
    Ok((1..=num_workers).map(|i| i as f64 / total).collect())
}

/// Threshold `τ` with `(1 − p)^τ = q₁`.
pub fn delay_threshold(slow_weight: f64, p: f64) -> Result<f64> {
    if !(slow_weight > 0.0 && slow_weight < 1.0) {
        return Err(Error::config("delay.slow_weight", "must lie in (0, 1)"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::config("delay.arrival_probs", "must lie in (0, 1)"));
    }
    Ok(slow_weight.ln() / (-p).ln_1p())
}

/// Geometric waiting time on `{1, 2, …}`; `p = 1` always returns 1.
pub fn draw_waiting_time<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    Geometric::new(p)
        .expect("arrival probability in (0, 1]")
        .sample(rng)
        + 1
}

/// Slow iff the wait strictly exceeds the threshold.
pub fn assign_component(wait: f64, threshold: f64) -> Component {
    if wait > threshold {
        Component::Slow
    } else {
        Component::Fast
    }
}

#[derive(Clone, Debug)]
pub struct DelayModel {
    arrival_probs: Vec<f64>,
    slow_weight: f64,
    /// `None` for a worker with `p_i = 1`: its wait is always 1 and carries
    /// no information, so its group is drawn independently with probability `q₁`.
    thresholds: Vec<Option<f64>>,
    /// `None` for `p_i = 1`.
    latent: Vec<Option<Exp<f64>>>,
    coin: Bernoulli,
}

/// One worker's draw: real waiting time, its integer tick count and the
/// data group it implies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ticket {
    /// Latent waiting time; `wait = ⌈latent⌉`.
    pub latent: f64,
    pub wait: u64,
    pub component: Component,
}

impl DelayModel {
    /// Index-proportional arrival probabilities with thresholds solving
    /// `(1 − p_i)^{τ_i} = q₁`.
    pub fn standard(num_workers: usize, slow_weight: f64) -> Result<Self> {
        Self::with_arrival_probs(default_arrival_probs(num_workers)?, slow_weight)
    }

    pub fn with_arrival_probs(arrival_probs: Vec<f64>, slow_weight: f64) -> Result<Self> {
        let thresholds = arrival_probs
            .iter()
            .map(|&p| {
                if p == 1.0 {
                    Ok(None)
                } else {
                    delay_threshold(slow_weight, p).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::build(arrival_probs, slow_weight, thresholds)
    }

    /// Model with caller-chosen thresholds, which need not preserve `q₁`.
    pub fn from_parts(arrival_probs: Vec<f64>, slow_weight: f64, thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.len() != arrival_probs.len() {
            return Err(Error::config(
                "delay.thresholds",
                format!("expected {} entries", arrival_probs.len()),
            ));
        }
        if thresholds.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::config("delay.thresholds", "must be nonnegative"));
        }
        Self::build(arrival_probs, slow_weight, thresholds.into_iter().map(Some).collect())
    }

    fn build(arrival_probs: Vec<f64>, slow_weight: f64, thresholds: Vec<Option<f64>>) -> Result<Self> {
        if arrival_probs.is_empty() {
            return Err(Error::config("delay.arrival_probs", "need at least one worker"));
        }
        if !(slow_weight > 0.0 && slow_weight < 1.0) {
            return Err(Error::config("delay.slow_weight", "must lie in (0, 1)"));
        }
        if arrival_probs.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) {
            return Err(Error::config("delay.arrival_probs", "must lie in (0, 1]"));
        }
        let total: f64 = arrival_probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(
                "delay.arrival_probs",
                format!("sum to {total}, expected 1"),
            ));
        }
        let latent = arrival_probs
            .iter()
            .map(|&p| (p < 1.0).then(|| Exp::new(-(-p).ln_1p()).expect("validated")))
            .collect();
        Ok(Self {
            arrival_probs,
            slow_weight,
            thresholds,
            latent,
            coin: Bernoulli::new(slow_weight).expect("validated"),
        })
    }

    pub fn num_workers(&self) -> usize {
        self.arrival_probs.len()
    }

    pub fn arrival_probs(&self) -> &[f64] {
        &self.arrival_probs
    }

    pub fn slow_weight(&self) -> f64 {
        self.slow_weight
    }

    pub fn thresholds(&self) -> &[Option<f64>] {
        &self.thresholds
    }

    /// Draws a waiting time for `worker` and the group it implies.
    pub fn draw<R: Rng + ?Sized>(&self, worker: usize, rng: &mut R) -> Ticket {
        let latent = match &self.latent[worker] {
            // Exp has no atom at 0, but guard the f64 underflow anyway.
            Some(exp) => exp.sample(rng).max(f64::MIN_POSITIVE),
            None => 1.0,
        };
        let component = match self.thresholds[worker] {
            Some(threshold) => assign_component(latent, threshold),
            None if self.coin.sample(rng) => Component::Slow,
            None => Component::Fast,
        };
        Ticket {
            latent,
            wait: latent.ceil() as u64,
            component,
        }
    }
}

/// Config-file description of the delay model. Arrival probabilities default
/// to the index-proportional rule; thresholds default to the `q₁`-preserving
/// values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySpec {
    pub slow_weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival_probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<f64>>,
}

impl DelaySpec {
    pub fn new(slow_weight: f64) -> Self {
        Self {
            slow_weight,
            arrival_probs: None,
            thresholds: None,
        }
    }

    pub fn build(&self, num_workers: usize) -> Result<DelayModel> {
        let probs = match &self.arrival_probs {
            Some(p) if p.len() != num_workers => {
                return Err(Error::config(
                    "delay.arrival_probs",
                    format!("expected {num_workers} entries, got {}", p.len()),
                ))
            }
            Some(p) => p.clone(),
            None => default_arrival_probs(num_workers)?,
        };
        match &self.thresholds {
            Some(t) => DelayModel::from_parts(probs, self.slow_weight, t.clone()),
            None => DelayModel::with_arrival_probs(probs, self.slow_weight),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn arrival_probs_are_index_proportional() {
        let p = default_arrival_probs(3).unwrap();
        assert_eq!(p, vec![1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]);
        assert_eq!(default_arrival_probs(1).unwrap(), vec![1.0]);
        let p4 = default_arrival_probs(4).unwrap();
        for (a, b) in p4.iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(default_arrival_probs(0).is_err());
        let p7 = default_arrival_probs(7).unwrap();
        assert!(p7.windows(2).all(|w| w[0] < w[1]));
        assert!((p7.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn threshold_values() {
        assert!((delay_threshold(0.5, 0.5).unwrap() - 1.0).abs() < 1e-15);
        // ln(0.1)/ln(0.75) evaluated with extended precision
        assert!((delay_threshold(0.1, 0.25).unwrap() - 8.003_922_779_651_094).abs() < 1e-12);
        assert!(delay_threshold(1.0 - 1e-15, 0.3).unwrap().abs() < 1e-12);
        assert!(delay_threshold(0.1, 0.0).is_err());
        assert!(delay_threshold(0.1, 1.0).is_err());
        assert!(delay_threshold(1.2, 0.5).is_err());
    }

    #[test]
    fn threshold_solves_survival_equation() {
        let model = DelayModel::standard(7, 0.1).unwrap();
        for (p, t) in model.arrival_probs().iter().zip(model.thresholds()) {
            assert!(((1.0 - p).powf(t.unwrap()) - 0.1).abs() < 1e-9);
        }
    }

    #[test]
    fn waiting_time_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000;
        let draws: Vec<u64> = (0..n).map(|_| draw_waiting_time(0.5, &mut rng)).collect();
        assert!(draws.iter().all(|&w| w >= 1));
        let mean = draws.iter().sum::<u64>() as f64 / n as f64;
        assert!((1.97..=2.03).contains(&mean), "{mean}");
        let tail = draws.iter().filter(|&&w| w > 1).count() as f64 / n as f64;
        assert!((0.494..=0.506).contains(&tail), "{tail}");
        assert!((0..100).all(|_| draw_waiting_time(1.0, &mut rng) == 1));
    }

    #[test]
    fn component_rule() {
        assert_eq!(assign_component(9.0, 8.004), Component::Slow);
        assert_eq!(assign_component(1.0, 8.004), Component::Fast);
        assert_eq!(assign_component(8.0, 8.004), Component::Fast);
    }

    #[test]
    fn pooled_slow_fraction_is_preserved() {
        let model = DelayModel::standard(7, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let slow = (0..n)
            .filter(|i| model.draw(i % 7, &mut rng).component == Component::Slow)
            .count();
        let frac = slow as f64 / n as f64;
        assert!((0.096..=0.104).contains(&frac), "{frac}");
    }

    #[test]
    fn per_worker_slow_fraction_and_geometric_wait() {
        let model = DelayModel::standard(4, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 50_000;
        for (i, &p) in model.arrival_probs().iter().enumerate() {
            let tickets: Vec<Ticket> = (0..n).map(|_| model.draw(i, &mut rng)).collect();
            let slow = tickets.iter().filter(|t| t.component == Component::Slow).count() as f64 / n as f64;
            assert!((slow - 0.1).abs() < 4.0 * (0.09f64 / n as f64).sqrt(), "worker {i}: {slow}");
            assert!(tickets.iter().all(|t| t.wait >= 1 && t.wait as f64 >= t.latent));
            // Integer ticks stay Geometric(p): P(wait > 1) = 1 − p.
            let tail = tickets.iter().filter(|t| t.wait > 1).count() as f64 / n as f64;
            assert!((tail - (1.0 - p)).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
            let slow_implies_long = tickets
                .iter()
                .filter(|t| t.component == Component::Slow)
                .all(|t| t.wait as f64 > model.thresholds()[i].unwrap());
            assert!(slow_implies_long);
        }
    }

    #[test]
    fn single_worker_draws_group_independently() {
        let model = DelayModel::standard(1, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 40_000;
        let slow = (0..n)
            .filter(|_| {
                let ticket = model.draw(0, &mut rng);
                assert_eq!(ticket.wait, 1);
                ticket.component == Component::Slow
            })
            .count();
        let frac = slow as f64 / n as f64;
        assert!((frac - 0.25).abs() < 4.0 * (0.25f64 * 0.75 / n as f64).sqrt());
    }

    #[test]
    fn identical_seeds_give_identical_tickets() {
        let model = DelayModel::standard(5, 0.2).unwrap();
        let stream = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..500).map(|i| model.draw(i % 5, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(stream(3), stream(3));
        assert_ne!(stream(3), stream(4));
    }

    #[test]
    fn spec_validation() {
        assert!(DelaySpec::new(1.2).build(3).is_err());
        let spec = DelaySpec {
            slow_weight: 0.1,
            arrival_probs: Some(vec![0.5, 0.5]),
            thresholds: None,
        };
        assert!(spec.build(3).is_err());
        assert_eq!(spec.build(2).unwrap().num_workers(), 2);
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::BallDomain;
use crate::Vector;

use super::DelayedGradientReport;

/// How ordered μ²-SGD weights gradients and averages iterates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "weighting", rename_all = "kebab-case")]
pub enum Mu2Weighting {
    /// Importance weights `α_t = t`; the buffer is `q_t = α_t d_t` and the
    /// query point is the `α`-weighted average of the descent iterates.
    Anytime,
    /// Constant STORM momentum `β` with query averaging `x ← γw + (1−γ)x`.
    Constant { beta: f64, gamma: f64 },
}

/// Server state for ordered μ²-SGD (Anytime averaging combined with an
/// ordered STORM estimator).
///
/// Each worker report carries the pair `g = ∇f(x_k; z)` and
/// `g̃ = ∇f(x_{k−1}; z)` computed on the same sample.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderedMu2State {
    descent_iterate: Vector,
    averaged_iterate: Vector,
    buffer: Vector,
    step_size: f64,
    domain: Option<BallDomain>,
    weighting: Mu2Weighting,
    iteration: usize,
    first_index_consumed: bool,
}

impl OrderedMu2State {
    pub fn new(
        initial: Vector,
        step_size: f64,
        weighting: Mu2Weighting,
        domain: Option<BallDomain>,
    ) -> Result<Self> {
        if !(step_size > 0.0) || !step_size.is_finite() {
            return Err(Error::config("method.eta", "must be positive"));
        }
        if let Mu2Weighting::Constant { beta, gamma } = weighting {
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(Error::config("method.beta", "must lie in (0, 1]"));
            }
            if !(gamma > 0.0 && gamma <= 1.0) {
                return Err(Error::config("method.gamma", "must lie in (0, 1]"));
            }
        }
        if let Some(dom) = &domain {
            if dom.dim() != initial.len() {
                return Err(Error::DimensionMismatch {
                    expected: initial.len(),
                    actual: dom.dim(),
                });
            }
            if !dom.contains(&initial, 1e-12) {
                return Err(Error::config("initial_point", "must lie inside the domain"));
            }
        }
        let d = initial.len();
        Ok(Self {
            descent_iterate: initial.clone(),
            averaged_iterate: initial,
            buffer: Vector::zeros(d),
            step_size,
            domain,
            weighting,
            iteration: 1,
            first_index_consumed: false,
        })
    }

    pub fn descent_iterate(&self) -> &Vector {
        &self.descent_iterate
    }

    pub fn averaged_iterate(&self) -> &Vector {
        &self.averaged_iterate
    }

    /// `q_t = α_t d_t` for the anytime weighting, `d_t` for the constant one.
    pub fn weighted_momentum(&self) -> &Vector {
        &self.buffer
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn weighting(&self) -> Mu2Weighting {
        self.weighting
    }

    pub fn domain(&self) -> Option<&BallDomain> {
        self.domain.as_ref()
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// `α_t = t`, with `α_0 = 0`.
    pub fn alpha(t: usize) -> f64 {
        t as f64
    }

    fn project(&self, w: Vector) -> Vector {
        match &self.domain {
            Some(d) => d.project(&w),
            None => w,
        }
    }

    pub fn step(&self, report: &DelayedGradientReport) -> Result<Self> {
        let t = self.iteration;
        let d = self.averaged_iterate.len();
        report.check(t, d)?;
        let k = report.dispatch_iteration;
        let duplicate_first = k == 1 && (t > 1 || self.first_index_consumed);
        let paired = || -> Result<Option<&Vector>> {
            if k == 1 {
                return Ok(None);
            }
            let g = report.prev_gradient.as_ref().ok_or_else(|| {
                Error::Protocol(format!(
                    "report for dispatch {k} lacks the previous-iterate gradient"
                ))
            })?;
            if g.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: g.len(),
                });
            }
            Ok(Some(g))
        };
        let mut next = self.clone();
        match self.weighting {
            Mu2Weighting::Anytime => {
                // s_k = α_k g_k − α_{k−1} g̃_{k−1}
                if !duplicate_first {
                    next.buffer.axpy(Self::alpha(k), &report.gradient, 1.0);
                    if let Some(prev) = paired()? {
                        next.buffer.axpy(-Self::alpha(k - 1), prev, 1.0);
                    }
                }
                let w = &self.descent_iterate - &next.buffer * self.step_size;
                next.descent_iterate = self.project(w);
                let a_next = Self::alpha(t + 1);
                let a_sum = (t + 1) as f64 * (t + 2) as f64 / 2.0;
                let blend = a_next / a_sum;
                next.averaged_iterate = &self.averaged_iterate
                    + (&next.descent_iterate - &self.averaged_iterate) * blend;
            }
            Mu2Weighting::Constant { beta, gamma } => {
                next.buffer *= 1.0 - beta;
                if !duplicate_first {
                    let decay = (1.0 - beta).powi(report.delay as i32);
                    next.buffer.axpy(decay, &report.gradient, 1.0);
                    if let Some(prev) = paired()? {
                        next.buffer.axpy(-decay * (1.0 - beta), prev, 1.0);
                    }
                }
                let w = &self.descent_iterate - &next.buffer * self.step_size;
                next.descent_iterate = self.project(w);
                next.averaged_iterate =
                    &next.descent_iterate * gamma + &self.averaged_iterate * (1.0 - gamma);
            }
        }
        if k == 1 {
            next.first_index_consumed = true;
        }
        next.iteration = t + 1;
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::Component;

    fn v(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    fn paired(k: usize, delay: usize, g: f64, prev: Option<f64>) -> DelayedGradientReport {
        DelayedGradientReport::new(0, k, delay, Component::Fast, v(g)).with_prev_gradient(prev.map(v))
    }

    #[test]
    fn first_arrival_uses_plain_gradient() {
        let s = OrderedMu2State::new(v(0.0), 0.1, Mu2Weighting::Anytime, None).unwrap();
        let s = s.step(&paired(1, 0, 2.0, None)).unwrap();
        assert_eq!(s.weighted_momentum()[0], 2.0);
    }

    #[test]
    fn missing_pair_is_a_protocol_error() {
        let s = OrderedMu2State::new(v(0.0), 0.1, Mu2Weighting::Anytime, None).unwrap();
        let s = s.step(&paired(1, 0, 2.0, None)).unwrap();
        assert!(matches!(s.step(&paired(2, 0, 1.0, None)), Err(Error::Protocol(_))));
    }

    #[test]
    fn averaged_iterate_is_alpha_weighted_mean() {
        let mut s = OrderedMu2State::new(v(0.3), 0.05, Mu2Weighting::Anytime, None).unwrap();
        let mut ws = vec![s.descent_iterate()[0]];
        s = s.step(&paired(1, 0, 1.0, None)).unwrap();
        ws.push(s.descent_iterate()[0]);
        s = s.step(&paired(2, 0, -0.5, Some(0.7))).unwrap();
        ws.push(s.descent_iterate()[0]);
        let expected = (ws[0] + 2.0 * ws[1] + 3.0 * ws[2]) / 6.0;
        assert!((s.averaged_iterate()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn descent_iterate_stays_in_domain() {
        let dom = BallDomain::new(Vector::zeros(1), 1.0).unwrap();
        let mut s = OrderedMu2State::new(v(0.0), 10.0, Mu2Weighting::Anytime, Some(dom)).unwrap();
        s = s.step(&paired(1, 0, -5.0, None)).unwrap();
        assert_eq!(s.descent_iterate()[0], 1.0);
        assert!(s.averaged_iterate()[0] <= 1.0);
    }

    #[test]
    fn constant_weighting_matches_storm_recursion() {
        let (beta, gamma, eta) = (0.2, 0.9, 0.1);
        let mut s = OrderedMu2State::new(
            v(1.0),
            eta,
            Mu2Weighting::Constant { beta, gamma },
            None,
        )
        .unwrap();
        let (mut d, mut w, mut x) = (0.0f64, 1.0f64, 1.0f64);
        let mut prev_x = x;
        for t in 1..=50usize {
            let g = 2.0 * x + 0.1;
            let gt = 2.0 * prev_x + 0.1;
            let pair = (t > 1).then_some(gt);
            s = s.step(&paired(t, 0, g, pair)).unwrap();
            d = g + (1.0 - beta) * (d - pair.unwrap_or(0.0));
            w -= eta * d;
            prev_x = x;
            x = gamma * w + (1.0 - gamma) * x;
            assert!((s.averaged_iterate()[0] - x).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_initial_point_outside_domain() {
        let dom = BallDomain::new(Vector::zeros(1), 1.0).unwrap();
        assert!(OrderedMu2State::new(v(2.0), 0.1, Mu2Weighting::Anytime, Some(dom)).is_err());
    }
}

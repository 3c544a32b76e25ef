use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::simulator::{RunTrace, StepDetail};
use crate::Vector;

/// Decomposition `ε_t = ε̂_t + b_t` of the delayed-momentum error at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorDecomposition {
    pub t: usize,
    /// `m_t`, taken from the optimizer buffer.
    pub momentum: Vector,
    /// `m̂_t`: arrived gradients plus `β(1−β)^{t−k}∇f(x_t)` for each missing `k`.
    pub virtual_momentum: Vector,
    pub full_gradient: Vector,
    /// `m_t − ∇f(x_t)`.
    pub epsilon: Vector,
    /// `m̂_t − ∇f(x_t)`.
    pub epsilon_hat: Vector,
    /// `m_t − m̂_t`.
    pub bias: Vector,
    pub missing: Vec<usize>,
}

fn details(trace: &RunTrace) -> Result<&[StepDetail]> {
    trace
        .details
        .as_deref()
        .ok_or_else(|| Error::InsufficientTrace("raw gradients (enable record.details)".into()))
}

/// Distinct dispatch indices whose gradients are still missing at step `t`.
/// Index 1 is never missing once the first arrival has been applied.
pub fn missing_indices(pending: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = pending.iter().copied().filter(|&k| k > 1).collect();
    out.dedup();
    out
}

/// `g_k` for every dispatch index, keeping the first arrival of index 1.
fn gradients_by_index(trace: &RunTrace, details: &[StepDetail]) -> BTreeMap<usize, Vector> {
    let mut out = BTreeMap::new();
    for (r, d) in trace.records.iter().zip(details) {
        out.entry(r.dispatch_iteration).or_insert_with(|| d.gradient.clone());
    }
    out
}

fn weight(beta: f64, t: usize, k: usize) -> f64 {
    beta * (1.0 - beta).powi((t - k) as i32)
}

/// Direct sum `m_t = Σ_{k∈[t]∖𝒯(t)} β(1−β)^{t−k} g_k` for every step.
pub fn unrolled_momentum(trace: &RunTrace, beta: f64) -> Result<Vec<Vector>> {
    let details = details(trace)?;
    let grads = gradients_by_index(trace, details);
    let dim = trace.final_iterate.len();
    trace
        .records
        .iter()
        .zip(details)
        .map(|(r, d)| {
            let t = r.t;
            let missing = missing_indices(&d.pending);
            let mut m = Vector::zeros(dim);
            for k in 1..=t {
                if missing.binary_search(&k).is_ok() {
                    continue;
                }
                let g = grads.get(&k).ok_or_else(|| {
                    Error::InsufficientTrace(format!("gradient for dispatch index {k} at step {t}"))
                })?;
                m.axpy(weight(beta, t, k), g, 1.0);
            }
            Ok(m)
        })
        .collect()
}

/// `b_t = −Σ_{k∈𝒯(t)} β(1−β)^{t−k} ∇f(x_t)`.
pub fn bias_closed_form(missing: &[usize], beta: f64, t: usize, full_gradient: &Vector) -> Vector {
    let total: f64 = missing.iter().map(|&k| weight(beta, t, k)).sum();
    full_gradient * (-total)
}

/// Error decomposition at step `t` (1-based) of an ordered-momentum trace.
pub fn virtual_momentum_and_bias(
    trace: &RunTrace,
    objective: &Objective,
    beta: f64,
    t: usize,
) -> Result<ErrorDecomposition> {
    let details = details(trace)?;
    if t == 0 || t > details.len() {
        return Err(Error::Precondition(format!("step {t} outside 1..={}", details.len())));
    }
    let d = &details[t - 1];
    let momentum = d
        .buffer
        .clone()
        .ok_or_else(|| Error::InsufficientTrace("momentum buffer".into()))?;
    let grads = gradients_by_index(trace, details);
    let full_gradient = objective.grad_full(&d.iterate_before)?;
    let missing = missing_indices(&d.pending);
    let mut virtual_momentum = Vector::zeros(momentum.len());
    for k in 1..=t {
        let w = weight(beta, t, k);
        if missing.binary_search(&k).is_ok() {
            virtual_momentum.axpy(w, &full_gradient, 1.0);
        } else {
            let g = grads
                .get(&k)
                .ok_or_else(|| Error::InsufficientTrace(format!("gradient for index {k}")))?;
            virtual_momentum.axpy(w, g, 1.0);
        }
    }
    let epsilon = &momentum - &full_gradient;
    let epsilon_hat = &virtual_momentum - &full_gradient;
    let bias = &momentum - &virtual_momentum;
    Ok(ErrorDecomposition {
        t,
        momentum,
        virtual_momentum,
        full_gradient,
        epsilon,
        epsilon_hat,
        bias,
        missing,
    })
}

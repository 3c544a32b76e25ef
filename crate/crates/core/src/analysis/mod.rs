//! Oracles and metrics computed from finished traces.
//!
//! Everything here recomputes quantities from recorded data rather than
//! trusting optimizer internals: the momentum oracle sums the recorded raw
//! gradients directly, and the pending-set bound is rebuilt from arrival
//! records alone.

mod fit;
mod metrics;
mod momentum;
mod structure;

pub use fit::{geometric_chi_square, ChiSquareFit};
pub use metrics::{
    bias_experiment_gap, confusion_counts, convergence_metrics, f1_scores, ClassCounts,
    F1Scores, GroupConfusion, MetricSeries,
};
pub use momentum::{
    bias_closed_form, missing_indices, unrolled_momentum, virtual_momentum_and_bias,
    ErrorDecomposition,
};
pub use structure::{
    anytime_checks, gradient_bound_violations, pending_sizes_from_records, AnytimeCheck,
};

/// `|a − b| / max(|b|, floor)` in the Euclidean norm.
pub fn relative_error(a: &crate::Vector, b: &crate::Vector, floor: f64) -> f64 {
    (a - b).norm() / b.norm().max(floor)
}

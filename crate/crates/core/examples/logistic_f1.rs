//! Multiclass logistic regression with a class that only slow workers see.
//! Prints per-class F1 of the final iterate for each method.

use ordered_async::analysis::{confusion_counts, f1_scores};
use ordered_async::experiment::ExperimentConfig;
use ordered_async::objective::Objective;
use ordered_async::simulator::run;
use ordered_async::Vector;

const CONFIG: &str = include_str!("../configs/classification.toml");

fn main() -> ordered_async::Result<()> {
    let mut cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    cfg.problem.seeds = 1;
    let Objective::Logistic(logistic) = cfg.objective.build()? else {
        unreachable!("config describes a logistic objective")
    };
    for spec in cfg.expand(false)? {
        let trace = run(&spec.config)?;
        let x = Vector::from_vec(trace.final_iterate.clone());
        let confusion = confusion_counts(&logistic, &x)?;
        let all = f1_scores(&confusion.all);
        let per_class: Vec<String> = all.per_class.iter().map(|f| format!("{f:.3}")).collect();
        println!(
            "{:<18} macro F1 {:.4}  per class [{}]  (class 0 is slow-only)",
            spec.grid.method.name(),
            all.macro_f1,
            per_class.join(", ")
        );
    }
    Ok(())
}

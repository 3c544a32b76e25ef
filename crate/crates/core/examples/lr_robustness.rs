//! Step-size sweep on a constrained quadratic, written to a temporary
//! directory, then re-aggregated from `runs.csv` alone.

use ordered_async::experiment::{cmd_report, cmd_sweep, ExperimentConfig};

const CONFIG: &str = include_str!("../configs/lr_robustness.toml");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    let dir = tempfile::tempdir()?;
    cfg.output_dir = dir.path().to_path_buf();

    let outcome = cmd_sweep(&cfg)?;
    println!("{} runs", outcome.runs.len());
    println!("method        eta (grid)   mean excess loss   failed");
    for row in &outcome.summary.robustness {
        println!(
            "{:<12}  {:>10.3e}   {:>16.4e}   {}",
            row.method,
            row.eta.unwrap_or(f64::NAN),
            row.mean,
            row.failed_runs
        );
    }
    for m in &outcome.summary.methods {
        println!("{}: worst / best = {:.2}", m.method, m.robustness_ratio);
    }

    let again = cmd_report(dir.path(), Some(&cfg))?;
    assert_eq!(again.checks, outcome.summary.checks);
    for c in &again.checks {
        println!("{} {:?}", if c.passed { "PASS" } else { "FAIL" }, c.check);
    }
    Ok(())
}

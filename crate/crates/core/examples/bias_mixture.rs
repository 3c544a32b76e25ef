//! The rare mixture component is computed only by slow workers. Compare how
//! far each method's tail average ends up from the mixture minimizer and from
//! the fast component's minimizer.

use ordered_async::analysis::bias_experiment_gap;
use ordered_async::experiment::ExperimentConfig;
use ordered_async::simulator::run;

const CONFIG: &str = include_str!("../configs/bias_mixture.toml");

fn main() -> ordered_async::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    let objective = cfg.objective.build()?;
    let fast_minimizer = [-1.0, 0.0];
    println!("method             gap to x*   gap to fast minimizer");
    for method in &cfg.methods {
        let traces = cfg
            .expand(false)?
            .into_iter()
            .filter(|r| &r.grid.method == method)
            .map(|r| run(&r.config))
            .collect::<ordered_async::Result<Vec<_>>>()?;
        let refs: Vec<_> = traces.iter().collect();
        let gaps = bias_experiment_gap(&refs, &objective)?;
        let to_fast: f64 = traces
            .iter()
            .map(|t| {
                let d: f64 = t.tail_average.iter().zip(fast_minimizer).map(|(a, b)| (a - b).powi(2)).sum();
                d.sqrt()
            })
            .sum::<f64>()
            / traces.len() as f64;
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        println!("{:<18} {mean:>9.4}   {to_fast:>9.4}", method.name());
    }
    Ok(())
}

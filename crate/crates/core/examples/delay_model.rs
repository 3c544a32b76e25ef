//! Worker heterogeneity and the data-dependent group assignment.

use ordered_async::analysis::geometric_chi_square;
use ordered_async::delay::{Component, DelayModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ordered_async::Result<()> {
    let model = DelayModel::standard(7, 0.1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    println!("worker      p_i    tau_i  slow frac  mean wait  chi2 p");
    let mut pooled = 0usize;
    let n = 10_000;
    for (i, (&p, tau)) in model.arrival_probs().iter().zip(model.thresholds()).enumerate() {
        let tickets: Vec<_> = (0..n).map(|_| model.draw(i, &mut rng)).collect();
        let slow = tickets.iter().filter(|t| t.component == Component::Slow).count();
        pooled += slow;
        let waits: Vec<u64> = tickets.iter().map(|t| t.wait).collect();
        let mean = waits.iter().sum::<u64>() as f64 / n as f64;
        let fit = geometric_chi_square(&waits, p);
        println!(
            "{i:>6}  {p:>7.4}  {:>7.2}  {:>9.4}  {mean:>9.2}  {:>6.3}",
            tau.unwrap_or(f64::NAN),
            slow as f64 / n as f64,
            fit.p_value
        );
    }
    println!("pooled slow fraction: {:.4}", pooled as f64 / (7 * n) as f64);
    Ok(())
}

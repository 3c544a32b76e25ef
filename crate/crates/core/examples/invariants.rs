//! The invariant suite behind `ordered-async validate`, once on the real
//! implementation and once with a deliberately broken staleness weight.

use ordered_async::experiment::{invariant_suite, Mutation};

fn main() -> ordered_async::Result<()> {
    for mutation in [Mutation::None, Mutation::OrderedWeight] {
        println!("mutation {mutation:?}");
        for r in invariant_suite(mutation)? {
            println!("  {} {:<36} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        }
    }
    Ok(())
}

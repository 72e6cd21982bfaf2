//! Two-round fast phase estimation with default plans, next to the Kitaev
//! repetitions that reach the same word success.
//!
//! `cargo run --release --example fast -- [trials] [seed]`

use fastpe::experiment::kitaev_matched_budget;
use fastpe::fast::{self, default_plan};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let trials: u64 = arg(0, "100").parse()?;
    let seed: u64 = arg(1, "1").parse()?;

    for m in [64usize, 256, 1024] {
        let plan = default_plan(m, 2)?;
        let err = fast::word_error_rate(m, &plan, trials, seed, "fast-demo")?;
        println!(
            "m = {m:5}: s = {:?}, S = {:?}, C = {}, word error {err:.3}, measurements {}",
            plan.s,
            plan.densities,
            plan.c,
            plan.measurement_count(m)
        );
    }

    let m = 256;
    let plan = default_plan(m, 2)?;
    print!(
        "m = {m}: fast default {} measurements; ",
        plan.measurement_count(m)
    );
    match kitaev_matched_budget(m, trials, 0.9, seed)? {
        Some(k) => println!(
            "kitaev reaches 0.9 at s = {} with {}",
            k.repetitions, k.measurements
        ),
        None => println!("kitaev does not reach 0.9 in the scanned range"),
    }
    Ok(())
}

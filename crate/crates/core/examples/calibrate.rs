//! Reruns the fast-PE calibration: the round-one repetition constant `ν`
//! for a word-error target at a fixed word length.
//!
//! `cargo run --release --example calibrate -- [m] [target] [trials] [seed]`

use fastpe::fast::{self, DEFAULT_CALIBRATION, STRICT_C};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let m: usize = arg(0, "256").parse()?;
    let target: f64 = arg(1, "0.05").parse()?;
    let trials: u64 = arg(2, "200").parse()?;
    let seed: u64 = arg(3, "1").parse()?;

    println!("worst-case C for σ within 1/32 w.p. 7/8: {STRICT_C}");
    let cal = fast::calibrate_nu(m, target, trials, seed, &DEFAULT_CALIBRATION)?;
    let plan = fast::default_plan_with(m, 2, &cal)?;
    println!("nu = {:.4}  (shipped {})", cal.nu, DEFAULT_CALIBRATION.nu);
    println!(
        "plan at m = {m}: s = {:?}, S = {:?}, C = {}",
        plan.s, plan.densities, plan.c
    );
    for m in [64, 256, 1024, 4096] {
        let plan = fast::default_plan_with(m, 2, &cal)?;
        let err = fast::word_error_rate(m, &plan, 100, seed + 1, "check")?;
        println!(
            "m = {m:5}: s = {:?}, S = {:?}, word error {err:.3}, measurements {}",
            plan.s,
            plan.densities,
            plan.measurement_count(m)
        );
    }
    Ok(())
}

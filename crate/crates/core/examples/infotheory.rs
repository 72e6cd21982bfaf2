//! Maximum-likelihood phase estimation with random multiples and angles,
//! against the overlap-based lower bound.
//!
//! `cargo run --release --example infotheory -- [t] [trials] [seed]`

use fastpe::infotheory::{max_bhattacharyya, run_trial_with, theorem1_bound, ThetaMode};
use fastpe::stream::derive_stream;
use rand::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let t: u64 = arg(0, "1000").parse()?;
    let trials: u64 = arg(1, "200").parse()?;
    let seed: u64 = arg(2, "1").parse()?;

    let c = max_bhattacharyya(t, ThetaMode::Uniform)?;
    println!("t = {t}, max overlap c = {c:.4}");
    println!("{:>4} {:>8} {:>8}", "s", "success", "fail <=");
    for s in [5usize, 10, 20, 40, 80] {
        let wins = (0..trials)
            .filter(|&i| {
                let mut rng = derive_stream(seed, "infotheory", i);
                let k = rng.gen_range(0..t);
                run_trial_with(t, k, s, ThetaMode::Uniform, &mut rng)
                    .map(|o| o.success)
                    .unwrap_or(false)
            })
            .count();
        let bound = theorem1_bound(t, c, s)?;
        println!(
            "{s:>4} {:>8.3} {:>8.3}",
            wins as f64 / trials as f64,
            bound.min(1.0)
        );
    }
    Ok(())
}

//! Kitaev's octant-consistency algorithm on random m-bit phases.
//!
//! `cargo run --release --example kitaev -- [m] [trials] [seed]`

use fastpe::kitaev::{bit_and_word_error_rates, run};
use fastpe::phase::DyadicPhase;
use fastpe::stream::derive_stream;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let m: usize = arg(0, "64").parse()?;
    let trials: usize = arg(1, "200").parse()?;
    let seed: u64 = arg(2, "1").parse()?;

    let mut rng = derive_stream(seed, "kitaev-demo", 0);
    let phase = DyadicPhase::random(12, &mut rng)?;
    let alpha = run(&phase, 12, 24, &mut rng)?;
    println!("φ  = {:?}", phase.bits());
    println!("α  = {:?}", alpha.bits());

    println!(
        "m = {m}: {:>4} {:>10} {:>10} {:>12}",
        "s", "bit err", "word err", "measurements"
    );
    for s in [4u64, 8, 16, 32] {
        let mut rng = derive_stream(seed, "kitaev-rates", s);
        let r = bit_and_word_error_rates(m, s, trials, &mut rng)?;
        println!(
            "{:>11} {:>10.4} {:>10.3} {:>12}",
            s,
            r.bit_rate,
            r.word_rate,
            2 * m as u64 * s
        );
    }
    Ok(())
}

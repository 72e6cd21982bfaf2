//! Exact recovery of a K-sparse signal from single-shot measurements by
//! maximum likelihood over every candidate.
//!
//! `cargo run --release --example sparse -- [trials] [seed]`

use fastpe::sparse::{fit_c0, recovery_trial, theorem2_bound, AmplitudeAlphabet};
use fastpe::stream::derive_stream;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let trials: u64 = arg(0, "100").parse()?;
    let seed: u64 = arg(1, "1").parse()?;

    let (t, k) = (64, 2);
    let alphabet = AmplitudeAlphabet::parse("1,-1", k)?;
    let n = alphabet.n_choices(t);
    let c0 = fit_c0(128)? / (alphabet.a_max() * alphabet.a_max());
    println!("t = {t}, K = {k}, alphabet {alphabet}: {n} candidates");
    println!("{:>4} {:>9} {:>9}", "s", "recovery", "fail <=");
    for s in [25usize, 50, 75, 100, 150] {
        let wins = (0..trials)
            .filter(|&i| {
                let mut rng = derive_stream(seed, &format!("sparse-{s}"), i);
                recovery_trial(t, &alphabet, s, &mut rng).unwrap_or(false)
            })
            .count();
        let bound = theorem2_bound(n as f64, c0, alphabet.d_min(), alphabet.a_max(), s as u64)?;
        println!(
            "{s:>4} {:>9.3} {:>9.3}",
            wins as f64 / trials as f64,
            bound.min(1.0)
        );
    }
    Ok(())
}

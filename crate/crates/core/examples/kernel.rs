//! The basic measurement: outcome probabilities, exact phase reduction,
//! and octant rounding.
//!
//! `cargo run --example kernel`

use fastpe::phase::{
    outcome_probabilities, reduce_rational, round_to_octant, Angle, Device, DyadicMultiple,
    DyadicPhase, Multiple, RationalPhase,
};
use fastpe::stream::derive_stream;

fn main() -> fastpe::Result<()> {
    let phase = RationalPhase::new(3, 10)?;
    for m in [1u64, 7, 1_000_000_007] {
        let x = reduce_rational(&phase, &Multiple::Integer(m))?;
        let (p0, p1) = outcome_probabilities(x, Angle::Cos);
        println!("k/t = 3/10, M = {m:>10}: Mφ mod 1 = {x}, P(0) = {p0:.4}, P(1) = {p1:.4}");
    }

    let word = DyadicPhase::parse("1011001")?;
    let mut rng = derive_stream(1, "kernel", 0);
    let mut device = Device::new(&word, &mut rng);
    let multiple = DyadicMultiple::power_of_two(2);
    let cos = device.measure_counts(&multiple, Angle::Cos, 1000);
    let sin = device.measure_counts(&multiple, Angle::Sin, 1000);
    let (rho, _) = fastpe::kitaev::rho_from_counts(cos, sin);
    println!(
        "φ = .1011001, M = 4: counts cos {cos:?} sin {sin:?}, estimate {rho}, octant {}",
        round_to_octant(rho).octant()
    );
    Ok(())
}

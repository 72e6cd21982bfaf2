//! Depth, width and size of Kitaev and fast circuits in the sequential,
//! parallel and cluster models, plus a small emitted gate list.
//!
//! `cargo run --example resources -- [m]`

use fastpe::kitaev::measurement_schedule;
use fastpe::resources::{emit_sequential_circuit, profile, Algorithm, CostConstants, Model};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m: u64 = std::env::args().nth(1).map_or(Ok(1000), |a| a.parse())?;
    let constants = CostConstants::default();
    println!(
        "{:<7} {:<11} {:>4} {:>10} {:>10} {:>12}",
        "alg", "model", "s", "depth", "width", "size"
    );
    for algorithm in [Algorithm::Kitaev, Algorithm::Fast] {
        for model in [Model::Sequential, Model::Parallel, Model::Cluster] {
            let p = profile(algorithm, model, m, &constants)?;
            println!(
                "{:<7} {:<11} {:>4} {:>10} {:>10} {:>12}  {}",
                algorithm.to_string(),
                model.to_string(),
                p.s,
                p.depth,
                p.width,
                p.size,
                p.classes.join(" ")
            );
        }
    }

    let circuit = emit_sequential_circuit(3, 2, &measurement_schedule(3, 1))?;
    println!("\nsequential circuit, m = 3, s = 1 (cos and sin per position):\n{circuit}");
    Ok(())
}

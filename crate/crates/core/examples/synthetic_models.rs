//! Writes the seeded synthetic forests used by the benches to a directory.
//!
//! `cargo run --example synthetic_models -- data/`

use std::path::PathBuf;

use packed_forest::synth::{self, MICRO_MODELS};

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(dir.join("micro"))?;

    let income = synth::income_like(2026);
    std::fs::write(dir.join("income_like.forest"), income.to_string())?;
    let props = income.props();
    println!(
        "income_like: {} trees, b={} d={} K={} q={}",
        income.trees().len(),
        props.branching,
        props.depth,
        props.max_multiplicity,
        props.quantized_branching
    );

    for spec in &MICRO_MODELS {
        let forest = spec.build(1);
        let props = forest.props();
        std::fs::write(
            dir.join("micro").join(format!("{}.forest", spec.name)),
            forest.to_string(),
        )?;
        println!(
            "{:<9} b={:>2} d={} p={:>2} trees={}",
            spec.name,
            props.branching,
            props.depth,
            spec.precision,
            forest.trees().len()
        );
    }
    Ok(())
}

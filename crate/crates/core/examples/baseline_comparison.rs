//! Packed pipeline against per-tree path polynomials on a wide forest.

use packed_forest::cost::bench;
use packed_forest::runtime::PartyConfig;
use packed_forest::staging::Quantizer;
use packed_forest::synth;

fn main() {
    let forest = synth::income_like(2026);
    let props = forest.props();
    println!(
        "{} trees, b={}, d={}",
        forest.trees().len(),
        props.branching,
        props.depth
    );

    let r = bench(
        &forest,
        Quantizer::new(16, 0).unwrap(),
        &PartyConfig::default(),
        9,
        3,
        true,
    )
    .unwrap();
    let baseline = r.baseline.unwrap();
    println!("packed   {}", r.packed);
    println!("baseline {baseline}");
    println!(
        "multiplications: baseline/packed = {:.1}, labels agree on all {} queries: {}",
        baseline.counts.multiply() as f64 / r.packed.counts.multiply() as f64,
        r.reps,
        r.baseline_agrees == Some(true)
    );
}

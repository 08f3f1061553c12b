//! Prints every staged artifact of the demo forest: the padded threshold
//! vector, the reshuffle matrix, and the level matrices with their masks.

use packed_forest::bits::Bits;
use packed_forest::forest::demo_forest;
use packed_forest::staging::{compile, slot_layout, Quantizer};

fn print_dense(rows: &[Bits]) {
    for row in rows {
        println!("    {row}");
    }
}

fn main() {
    let forest = demo_forest();
    let props = forest.props();
    println!(
        "b={} d={} multiplicities={:?} K={} q={}",
        props.branching,
        props.depth,
        props.multiplicity,
        props.max_multiplicity,
        props.quantized_branching
    );
    println!("levels {:?}", props.level);

    let model = compile(&forest, Quantizer::new(8, 0).unwrap()).unwrap();
    let layout: Vec<String> = slot_layout(&props, model.meta.group_width)
        .iter()
        .map(|s| s.map_or("S".to_string(), |b| format!("d{b}")))
        .collect();
    println!("slots  {layout:?}");
    println!("values {:?}", model.thresholds.values());

    println!(
        "reshuffle ({} x {}):",
        model.reshuffle.rows, model.reshuffle.cols
    );
    print_dense(&model.reshuffle.to_dense());
    for (i, (m, mask)) in model.levels.iter().zip(&model.masks).enumerate() {
        println!("level {} mask {mask}:", i + 1);
        print_dense(&m.to_dense());
    }
}

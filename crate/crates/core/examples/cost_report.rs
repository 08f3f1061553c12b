//! Measured operation counts against the closed forms, for one model and
//! across the micro-model sweep.

use packed_forest::cost::{self, report};
use packed_forest::runtime::{encode_features, infer, ModelMode, PartyConfig};
use packed_forest::staging::{compile, Quantizer};
use packed_forest::synth;

fn main() {
    let spec = synth::micro_model("depth5").unwrap();
    let forest = spec.build(1);
    let q = Quantizer::new(spec.precision, 0).unwrap();
    let model = compile(&forest, q).unwrap();
    let values = synth::random_query(&mut synth::rng(1), &forest, spec.precision);
    let query =
        encode_features(&values, model.meta.num_features, q, model.meta.group_width).unwrap();
    let r = infer(&model, &query, &PartyConfig::default()).unwrap();
    print!("{}", report(&r));

    println!();
    let rows = cost::micro_sweep(1, ModelMode::Encrypted).unwrap();
    for row in &rows {
        println!(
            "{:<9} b={:<2} d={} p={:<2} comparison={:<3} levels={:<3} depth {}/{}",
            row.name,
            row.b,
            row.d,
            row.p,
            row.comparison_mults,
            row.level_mults,
            row.depth,
            row.depth_bound
        );
    }
    for t in cost::trend_checks(&rows) {
        println!("{}: {} ({})", t.name, t.holds, t.detail);
    }
}

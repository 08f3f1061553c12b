//! The same query with the model encrypted by its owner and with the model
//! held in the clear by the evaluator.

use packed_forest::runtime::{encode_features, infer, ModelMode, PartyConfig, Phase};
use packed_forest::staging::{compile, Quantizer};
use packed_forest::synth;

fn main() {
    let forest = synth::income_like(7);
    let q = Quantizer::new(16, 0).unwrap();
    let model = compile(&forest, q).unwrap();
    let values = synth::income_query(&mut synth::rng(7));
    let query =
        encode_features(&values, model.meta.num_features, q, model.meta.group_width).unwrap();

    for mode in [ModelMode::Encrypted, ModelMode::Plaintext] {
        let r = infer(&model, &query, &PartyConfig::new(mode)).unwrap();
        println!("{mode:>9}: {}", r.ledger);
        for phase in [Phase::Comparison, Phase::Reshuffle, Phase::Levels] {
            let c = r.phase(phase).unwrap();
            println!(
                "           {:<11} ct*ct={:<4} ct*pt={:<4} depth={}",
                phase.name(),
                c.counts.mult_ct_ct,
                c.counts.mult_ct_pt,
                c.output_depth
            );
        }
        println!("           result {}", r.labels.peek());
    }
}

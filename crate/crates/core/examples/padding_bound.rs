//! Revealing only an upper bound on the maximum multiplicity: the result is
//! unchanged while comparison and reshuffle work grows with the bound.

use packed_forest::forest::demo_forest;
use packed_forest::runtime::{encode_features, infer, PartyConfig, Phase};
use packed_forest::staging::{compile, Quantizer};

fn main() {
    let q = Quantizer::new(8, 0).unwrap();
    let model = compile(&demo_forest(), q).unwrap();
    let k = model.meta.max_multiplicity;
    for declared in [k, k + 1, k + 3, k + 6] {
        let cfg = PartyConfig::default().with_k_declared(declared);
        let query = encode_features(&[0.0, 5.0], 2, q, declared).unwrap();
        let r = infer(&model, &query, &cfg).unwrap();
        let reshuffle = r.phase(Phase::Reshuffle).unwrap().counts;
        println!(
            "K_declared={declared:<2} q={:<3} result={} reshuffle rotate={} mult={}",
            r.meta.quantized_branching,
            r.labels.peek(),
            reshuffle.rotate,
            reshuffle.multiply()
        );
    }
    let too_small = model.with_group_width(k - 1);
    println!("K_declared={}: {}", k - 1, too_small.unwrap_err());
}

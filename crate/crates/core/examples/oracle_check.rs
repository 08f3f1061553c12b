//! Seeded random forests checked against plain tree traversal.
//!
//! `cargo run --example oracle_check -- 100 7` checks 100 forests from seed 7.

use packed_forest::runtime::{count_mismatches, PartyConfig};
use packed_forest::staging::compile;
use packed_forest::synth;

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(50, |a| a.parse().expect("forest count"));
    let seed: u64 = args.next().map_or(7, |a| a.parse().expect("seed"));

    let mut matched = 0;
    for i in 0..n {
        let (forest, quantizer, mut rng) = packed_forest::cli::random_case(seed, i);
        let model = compile(&forest, quantizer).unwrap();
        let queries: Vec<Vec<f64>> = (0..20)
            .map(|_| synth::random_query(&mut rng, &forest, quantizer.precision))
            .collect();
        let bad = count_mismatches(&forest, &model, &PartyConfig::default(), &queries).unwrap();
        if bad == 0 {
            matched += 1;
        } else {
            println!("forest {i}: {bad} mismatches\n{forest}");
        }
    }
    println!("{matched}/{n} forests match the traversal oracle");
}

//! Parse a forest, stage it, and classify one encrypted query.

use packed_forest::forest::demo_forest;
use packed_forest::runtime::{decode, encode_features, infer, PartyConfig};
use packed_forest::staging::{compile, Quantizer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let forest = demo_forest();
    print!("{forest}");

    let quantizer = Quantizer::new(8, 0)?;
    let model = compile(&forest, quantizer)?;

    // the data owner replicates (x, y) = (0, 5) once per slot of each feature group
    let query = encode_features(
        &[0.0, 5.0],
        model.meta.num_features,
        quantizer,
        model.meta.group_width,
    )?;
    let result = infer(&model, &query, &PartyConfig::default())?;

    let decoded = decode(result.labels.peek(), &model.codebook)?;
    println!("result slots  {}", result.labels.peek());
    println!("tree labels   {:?}", decoded.label_names(&model.codebook));
    println!("ledger        {}", result.ledger);
    Ok(())
}

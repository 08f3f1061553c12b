//! Saves a staged model as a `.copse` manifest and loads it back.

use packed_forest::forest::demo_forest;
use packed_forest::manifest;
use packed_forest::staging::{compile, Quantizer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = compile(&demo_forest(), Quantizer::new(8, 0)?)?;
    let path = std::env::temp_dir().join("demo.copse");
    manifest::write(&path, &model)?;
    let text = std::fs::read_to_string(&path)?;
    print!("{text}");

    let back = manifest::read(&path)?;
    assert_eq!(back, model);
    println!("# round trip ok: {}", path.display());

    let broken = text.replacen("rows = 5", "rows = 4", 1);
    println!(
        "# edited manifest: {}",
        manifest::from_str(&broken).unwrap_err()
    );
    Ok(())
}

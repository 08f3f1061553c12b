//! `.copse` manifests: a staged model saved as versioned TOML.
//!
//! Bitvectors are written as `0`/`1` strings, so a manifest can be read and
//! diffed by hand. Output is deterministic for a given model.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::staging::CompiledModel;

pub const FORMAT_VERSION: u32 = 1;
pub const EXTENSION: &str = "copse";

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed manifest: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported manifest version {found} (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("inconsistent manifest: {0}")]
    Invalid(String),
}

#[derive(Serialize, Deserialize)]
struct Document<M> {
    format_version: u32,
    #[serde(flatten)]
    model: M,
}

pub fn to_string(model: &CompiledModel) -> String {
    toml::to_string(&Document {
        format_version: FORMAT_VERSION,
        model,
    })
    .expect("model serializes")
}

pub fn from_str(text: &str) -> Result<CompiledModel, ManifestError> {
    #[derive(Deserialize)]
    struct Header {
        format_version: u32,
    }
    let header: Header = toml::from_str(text)?;
    if header.format_version != FORMAT_VERSION {
        return Err(ManifestError::Version {
            found: header.format_version,
        });
    }
    let doc: Document<CompiledModel> = toml::from_str(text)?;
    validate(&doc.model)?;
    Ok(doc.model)
}

pub fn write(path: impl AsRef<Path>, model: &CompiledModel) -> Result<(), ManifestError> {
    fs::write(path, to_string(model))?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<CompiledModel, ManifestError> {
    from_str(&fs::read_to_string(path)?)
}

/// Checks that every artifact has the shape its metadata claims.
pub fn validate(model: &CompiledModel) -> Result<(), ManifestError> {
    let m = &model.meta;
    let fail = |what: String| Err(ManifestError::Invalid(what));
    if m.group_width < m.max_multiplicity {
        return fail(format!(
            "group width {} is below max multiplicity {}",
            m.group_width, m.max_multiplicity
        ));
    }
    if m.quantized_branching != m.group_width * m.num_features {
        return fail(format!(
            "q = {} but group width {} x {} features",
            m.quantized_branching, m.group_width, m.num_features
        ));
    }
    let t = &model.thresholds;
    if t.precision != m.precision || t.planes.len() != m.precision as usize {
        return fail(format!(
            "{} threshold planes for precision {}",
            t.planes.len(),
            m.precision
        ));
    }
    if t.planes.iter().any(|p| p.len() != m.quantized_branching) {
        return fail(format!(
            "threshold planes must have {} slots",
            m.quantized_branching
        ));
    }
    let r = &model.reshuffle;
    if !r.is_well_formed() || r.rows != m.branching || r.cols != m.quantized_branching {
        return fail(format!(
            "reshuffle matrix must be {} x {}",
            m.branching, m.quantized_branching
        ));
    }
    if model.levels.len() != m.depth || model.masks.len() != m.depth {
        return fail(format!(
            "{} level matrices and {} masks for depth {}",
            model.levels.len(),
            model.masks.len(),
            m.depth
        ));
    }
    for (i, (level, mask)) in model.levels.iter().zip(&model.masks).enumerate() {
        if !level.is_well_formed() || level.rows != m.num_leaves || level.cols != m.branching {
            return fail(format!(
                "level {} matrix must be {} x {}",
                i + 1,
                m.num_leaves,
                m.branching
            ));
        }
        if mask.len() != m.num_leaves {
            return fail(format!(
                "level {} mask must have {} slots",
                i + 1,
                m.num_leaves
            ));
        }
    }
    let c = &model.codebook;
    if c.leaf_labels.len() != m.num_leaves || c.tree_leaves.len() != m.num_trees {
        return fail("codebook does not match leaf or tree count".into());
    }
    if let Some(&bad) = c.leaf_labels.iter().find(|&&l| l >= c.labels.len()) {
        return fail(format!("leaf label {bad} out of range"));
    }
    let mut next = 0;
    for &(start, end) in &c.tree_leaves {
        if start != next || end <= start {
            return fail("tree leaf spans must tile the leaves".into());
        }
        next = end;
    }
    if next != m.num_leaves {
        return fail("tree leaf spans must tile the leaves".into());
    }
    Ok(())
}

//! Staging: turns a [`Forest`] into the packed artifacts the runtime evaluates.
//!
//! * the padded threshold vector, as transposed fixed-point bit-planes, with
//!   thresholds grouped by feature and each group padded to the same width;
//! * the reshuffle matrix mapping comparison slots back to preorder branches
//!   and dropping the padding slots;
//! * one level matrix and one level mask per level, counted up from the
//!   leaves.

mod layout;
mod quant;

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::forest::{Forest, ForestProps};

pub use layout::{BitPlanes, DiagMatrix};
pub use quant::{QuantizeError, Quantizer, MAX_PRECISION};

/// Filler threshold for padding slots.
pub const SENTINEL: u64 = 0;

/// Comparison convention shared by the compiler, runtime and oracle.
pub const DIRECTION: &str = "feature-gt-threshold-routes-right";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StageError {
    #[error(transparent)]
    Quantize(#[from] QuantizeError),
    #[error(
        "threshold {threshold} of branch {branch} does not fit the fixed-point range: {source}"
    )]
    ThresholdOverflow {
        branch: usize,
        threshold: f64,
        source: QuantizeError,
    },
    #[error(
        "declared padding bound {declared} is below the model's maximum multiplicity {required}"
    )]
    PaddingTooSmall { declared: usize, required: usize },
}

/// Model shape recorded alongside the staged artifacts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub precision: u32,
    pub frac_bits: u32,
    /// `b`: number of branches.
    pub branching: usize,
    /// `d`: number of levels.
    pub depth: usize,
    /// `K`: true maximum multiplicity.
    pub max_multiplicity: usize,
    /// Slots per feature group in the packed threshold vector (`K` unless padded further).
    pub group_width: usize,
    pub num_features: usize,
    /// `q`: packed comparison slots, `group_width * num_features`.
    pub quantized_branching: usize,
    pub num_leaves: usize,
    pub num_trees: usize,
    pub direction: String,
}

/// Maps leaf slots back to label names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codebook {
    pub labels: Vec<String>,
    /// Label index of every leaf, in leaf preorder.
    pub leaf_labels: Vec<usize>,
    /// `[start, end)` leaf span of every tree.
    pub tree_leaves: Vec<(usize, usize)>,
}

impl Codebook {
    pub fn from_props(forest: &Forest, props: &ForestProps) -> Codebook {
        Codebook {
            labels: forest.labels().to_vec(),
            leaf_labels: props.leaf_labels.clone(),
            tree_leaves: props.tree_leaves.iter().map(|r| (r.start, r.end)).collect(),
        }
    }

    pub fn leaf_label(&self, leaf: usize) -> &str {
        &self.labels[self.leaf_labels[leaf]]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompiledModel {
    pub meta: ModelMeta,
    pub thresholds: BitPlanes,
    pub reshuffle: DiagMatrix,
    pub levels: Vec<DiagMatrix>,
    pub masks: Vec<Bits>,
    pub codebook: Codebook,
}

/// Slot owner of each packed comparison slot (`None` for padding), with
/// `group_width` slots per feature and branches in ascending preorder within
/// a group.
pub fn slot_layout(props: &ForestProps, group_width: usize) -> Vec<Option<usize>> {
    let mut layout = vec![None; group_width * props.num_features];
    let mut fill = vec![0usize; props.num_features];
    for (branch, &feature) in props.features.iter().enumerate() {
        layout[feature * group_width + fill[feature]] = Some(branch);
        fill[feature] += 1;
    }
    layout
}

pub fn build_threshold_vector(
    props: &ForestProps,
    quantizer: &Quantizer,
) -> Result<BitPlanes, StageError> {
    build_threshold_vector_padded(props, quantizer, props.max_multiplicity)
}

fn build_threshold_vector_padded(
    props: &ForestProps,
    quantizer: &Quantizer,
    group_width: usize,
) -> Result<BitPlanes, StageError> {
    let values = slot_layout(props, group_width)
        .into_iter()
        .map(|slot| match slot {
            None => Ok(SENTINEL),
            Some(branch) => {
                let threshold = props.thresholds[branch];
                quantizer
                    .quantize(threshold)
                    .map_err(|source| StageError::ThresholdOverflow {
                        branch,
                        threshold,
                        source,
                    })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BitPlanes::from_values(&values, quantizer.precision))
}

/// `b x q` matrix with a 1 at `(branch, slot)` when `slot` holds that branch's threshold.
pub fn build_reshuffle(props: &ForestProps) -> DiagMatrix {
    build_reshuffle_padded(props, props.max_multiplicity)
}

fn build_reshuffle_padded(props: &ForestProps, group_width: usize) -> DiagMatrix {
    let layout = slot_layout(props, group_width);
    let mut rows = vec![Bits::zeros(layout.len()); props.branching];
    for (slot, owner) in layout.iter().enumerate() {
        if let Some(branch) = owner {
            rows[*branch].set(slot, true);
        }
    }
    DiagMatrix::from_dense(&rows, layout.len())
}

/// Branch whose decision leaf `leaf` consults at `level`.
///
/// The ancestor at exactly `level` if there is one; otherwise the ancestor
/// with the highest level below it; otherwise (every ancestor sits above
/// `level`) the leaf's parent. `None` only for a leaf with no ancestors.
pub fn select_level_branch(props: &ForestProps, leaf: usize, level: usize) -> Option<usize> {
    let path = &props.leaf_ancestors[leaf];
    let mut best_below: Option<usize> = None;
    for a in path {
        let l = props.level[a.branch];
        if l == level {
            return Some(a.branch);
        }
        if l < level && best_below.is_none_or(|b| props.level[b] < l) {
            best_below = Some(a.branch);
        }
    }
    best_below.or_else(|| path.last().map(|a| a.branch))
}

/// Level matrices (`leaves x b`) and masks for levels `1..=d`.
///
/// Mask bit `i` is 0 when leaf `i` is under the true child of its selected
/// branch and 1 otherwise; leaves of single-leaf trees get an all-zero row and
/// mask bit 1 so they are always feasible.
pub fn build_levels(props: &ForestProps) -> (Vec<DiagMatrix>, Vec<Bits>) {
    let n_leaves = props.num_leaves;
    let mut mats = Vec::with_capacity(props.depth);
    let mut masks = Vec::with_capacity(props.depth);
    for level in 1..=props.depth {
        let mut rows = vec![Bits::zeros(props.branching); n_leaves];
        let mut mask = Bits::ones(n_leaves);
        for (leaf, row) in rows.iter_mut().enumerate() {
            if let Some(branch) = select_level_branch(props, leaf, level) {
                row.set(branch, true);
                if props.true_downstream[branch].contains(&leaf) {
                    mask.set(leaf, false);
                }
            }
        }
        mats.push(DiagMatrix::from_dense(&rows, props.branching));
        masks.push(mask);
    }
    (mats, masks)
}

/// Stages `forest` at the given fixed-point encoding.
///
/// A forest with no branches compiles to empty artifacts; the runtime then
/// returns the constant result.
pub fn compile(forest: &Forest, quantizer: Quantizer) -> Result<CompiledModel, StageError> {
    let props = forest.props();
    let thresholds = build_threshold_vector(&props, &quantizer)?;
    let reshuffle = build_reshuffle(&props);
    let (levels, masks) = build_levels(&props);
    Ok(CompiledModel {
        meta: ModelMeta {
            precision: quantizer.precision,
            frac_bits: quantizer.frac_bits,
            branching: props.branching,
            depth: props.depth,
            max_multiplicity: props.max_multiplicity,
            group_width: props.max_multiplicity,
            num_features: props.num_features,
            quantized_branching: props.quantized_branching,
            num_leaves: props.num_leaves,
            num_trees: forest.trees().len(),
            direction: DIRECTION.to_string(),
        },
        thresholds,
        reshuffle,
        levels,
        masks,
        codebook: Codebook::from_props(forest, &props),
    })
}

impl CompiledModel {
    pub fn quantizer(&self) -> Quantizer {
        Quantizer {
            precision: self.meta.precision,
            frac_bits: self.meta.frac_bits,
        }
    }

    /// Re-pads every feature group to `group_width` slots with sentinels.
    ///
    /// Only the threshold planes and the reshuffle columns change; padding
    /// slots get sentinel thresholds and all-zero reshuffle columns.
    pub fn with_group_width(&self, group_width: usize) -> Result<CompiledModel, StageError> {
        if group_width < self.meta.max_multiplicity {
            return Err(StageError::PaddingTooSmall {
                declared: group_width,
                required: self.meta.max_multiplicity,
            });
        }
        let old_w = self.meta.group_width;
        if group_width == old_w {
            return Ok(self.clone());
        }
        let n_features = self.meta.num_features;
        let q = group_width * n_features;
        // new slot -> old slot, for slots that carried over
        let source = |slot: usize| {
            let (f, k) = (slot / group_width, slot % group_width);
            (k < old_w).then_some(f * old_w + k)
        };

        let values = self.thresholds.values();
        let padded: Vec<u64> = (0..q)
            .map(|s| source(s).map_or(SENTINEL, |o| values[o]))
            .collect();
        let old_rows = self.reshuffle.to_dense();
        let rows: Vec<Bits> = old_rows
            .iter()
            .map(|row| Bits::from_fn(q, |s| source(s).is_some_and(|o| row.get(o))))
            .collect();

        let mut out = self.clone();
        out.thresholds = BitPlanes::from_values(&padded, self.meta.precision);
        out.reshuffle = DiagMatrix::from_dense(&rows, q);
        out.meta.group_width = group_width;
        out.meta.quantized_branching = q;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{demo_forest, parse_forest};

    fn q8() -> Quantizer {
        Quantizer::new(8, 0).unwrap()
    }

    #[test]
    fn demo_threshold_layout() {
        let props = demo_forest().props();
        // x group: d1, d3, sentinel; y group: d0, d2, d4
        assert_eq!(
            slot_layout(&props, 3),
            vec![Some(1), Some(3), None, Some(0), Some(2), Some(4)]
        );
        let planes = build_threshold_vector(&props, &q8()).unwrap();
        assert_eq!(planes.values(), vec![2, 6, SENTINEL, 3, 4, 7]);
        assert_eq!(planes.planes.len(), 8);
    }

    #[test]
    fn full_multiplicity_needs_no_padding() {
        let forest =
            parse_forest("labels A B\nbranch 0 1 branch 1 2 leaf 0 leaf 1 leaf 0\n").unwrap();
        let props = forest.props();
        assert_eq!(props.quantized_branching, props.branching);
        assert!(slot_layout(&props, props.max_multiplicity)
            .iter()
            .all(Option::is_some));
        let r = build_reshuffle(&props).to_dense();
        for c in 0..2 {
            assert_eq!(r.iter().filter(|row| row.get(c)).count(), 1);
        }
    }

    #[test]
    fn demo_reshuffle_rows() {
        let props = demo_forest().props();
        let r = build_reshuffle(&props);
        assert_eq!((r.rows, r.cols), (5, 6));
        // d0's threshold sits in slot 3
        assert_eq!(r.to_dense()[0].to_string(), "000100");
        assert_eq!(r.col_weight(2), 0);
        for row in 0..5 {
            assert_eq!(r.row_weight(row), 1);
        }
    }

    #[test]
    fn demo_level_masks() {
        let props = demo_forest().props();
        let (mats, masks) = build_levels(&props);
        assert_eq!(mats.len(), 3);
        // level 1: L0, L2, L4 on the false side
        assert_eq!(masks[0].to_string(), "101010");
        let level1: Vec<usize> = (0..6)
            .map(|leaf| mats[0].to_dense()[leaf].ones_positions().next().unwrap())
            .collect();
        assert_eq!(level1, vec![2, 2, 3, 3, 4, 4]);
        // level 2: d4 stands in for the missing level-2 branch above L4, L5
        let level2: Vec<usize> = (0..6)
            .map(|leaf| mats[1].to_dense()[leaf].ones_positions().next().unwrap())
            .collect();
        assert_eq!(level2, vec![1, 1, 1, 1, 4, 4]);
        assert_eq!(masks[1].to_string(), "110010");
        assert_eq!(masks[2].to_string(), "111100");
    }

    #[test]
    fn one_branch_forest_levels() {
        let props = parse_forest("labels A B\nbranch 0 1 leaf 0 leaf 1\n")
            .unwrap()
            .props();
        let (mats, masks) = build_levels(&props);
        assert_eq!(mats.len(), 1);
        assert_eq!(mats[0].to_dense(), vec![Bits::ones(1), Bits::ones(1)]);
        assert_eq!(masks[0].to_string(), "10");
    }

    #[test]
    fn overflow_is_reported() {
        let forest = parse_forest("labels A B\nbranch 0 300 leaf 0 leaf 1\n").unwrap();
        let err = compile(&forest, q8()).unwrap_err();
        assert!(matches!(
            err,
            StageError::ThresholdOverflow { branch: 0, .. }
        ));
    }

    #[test]
    fn padding_keeps_rows_and_adds_sentinels() {
        let model = compile(&demo_forest(), q8()).unwrap();
        let padded = model.with_group_width(5).unwrap();
        assert_eq!(padded.meta.quantized_branching, 10);
        assert_eq!(
            padded.thresholds.values(),
            vec![2, 6, 0, 0, 0, 3, 4, 7, 0, 0]
        );
        assert_eq!(padded.reshuffle.to_dense()[0].to_string(), "0000010000");
        assert!(matches!(
            model.with_group_width(2),
            Err(StageError::PaddingTooSmall {
                declared: 2,
                required: 3
            })
        ));
    }

    #[test]
    fn compile_is_deterministic() {
        let a = compile(&demo_forest(), q8()).unwrap();
        let b = compile(&demo_forest(), q8()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.meta.quantized_branching, 6);
        assert_eq!(a.meta.max_multiplicity, 3);
    }
}

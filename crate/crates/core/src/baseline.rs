//! Non-vectorized baseline: every tree as a sum of path products.
//!
//! Each leaf contributes `label_bits * prod(literals on its path)` where a
//! literal is a branch decision or its complement. Exactly one path per tree
//! is satisfied, so the XOR of the terms is the chosen label in binary.
//! Comparisons run one branch at a time on `w`-slot vectors holding the
//! feature value broadcast to every slot, `w` being the label width in bits.

use serde::Serialize;

use crate::bits::Bits;
use crate::forest::{Forest, Node};
use crate::kernels::{self, load_planes, KernelError};
use crate::runtime::{ModelMode, RuntimeError};
use crate::staging::{BitPlanes, Quantizer, StageError};
use crate::vm::{Kind, LedgerSnapshot, PackedVec, Vm};

/// One satisfied-path term: branch literals (`true` = decision taken) and the
/// label reached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub literals: Vec<(usize, bool)>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyForest {
    /// `(feature, quantized threshold)` per branch, preorder.
    pub branches: Vec<(usize, u64)>,
    pub trees: Vec<Vec<Term>>,
    pub num_features: usize,
    pub num_labels: usize,
    /// Slots per vector: bits needed for a label index, at least one.
    pub label_width: usize,
    pub quantizer: Quantizer,
}

pub fn poly_compile(forest: &Forest, quantizer: Quantizer) -> Result<PolyForest, StageError> {
    let branches = forest
        .branches()
        .iter()
        .enumerate()
        .map(|(i, b)| {
            quantizer
                .quantize(b.threshold)
                .map(|t| (b.feature, t))
                .map_err(|source| StageError::ThresholdOverflow {
                    branch: i,
                    threshold: b.threshold,
                    source,
                })
        })
        .collect::<Result<_, _>>()?;
    let mut next_branch = 0;
    let trees = forest
        .trees()
        .iter()
        .map(|tree| {
            let mut terms = Vec::new();
            collect_terms(tree, &mut next_branch, &mut Vec::new(), &mut terms);
            terms
        })
        .collect();
    let num_labels = forest.labels().len();
    Ok(PolyForest {
        branches,
        trees,
        num_features: forest.num_features(),
        num_labels,
        label_width: label_width(num_labels),
        quantizer,
    })
}

fn label_width(num_labels: usize) -> usize {
    (usize::BITS - num_labels.saturating_sub(1).leading_zeros()).max(1) as usize
}

fn collect_terms(
    node: &Node,
    next_branch: &mut usize,
    path: &mut Vec<(usize, bool)>,
    out: &mut Vec<Term>,
) {
    match node {
        Node::Leaf { label } => out.push(Term {
            literals: path.clone(),
            label: *label,
        }),
        Node::Branch { left, right, .. } => {
            let id = *next_branch;
            *next_branch += 1;
            path.push((id, false));
            collect_terms(left, next_branch, path, out);
            path.pop();
            path.push((id, true));
            collect_terms(right, next_branch, path, out);
            path.pop();
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PolyResult {
    /// Label index chosen by each tree.
    pub labels: Vec<usize>,
    pub ledger: LedgerSnapshot,
}

/// Evaluates the baseline on one query.
pub fn poly_eval(
    vm: &Vm,
    poly: &PolyForest,
    values: &[f64],
    mode: ModelMode,
) -> Result<PolyResult, RuntimeError> {
    if values.len() != poly.num_features {
        return Err(RuntimeError::MissingFeature(
            values.len().min(poly.num_features),
        ));
    }
    let w = poly.label_width;
    let p = poly.quantizer.precision;
    let kind = mode.kind();
    let load = |bits: &Bits| match kind {
        Kind::Ciphertext => vm.encrypt(bits),
        Kind::Plaintext => vm.plaintext(bits),
    };

    let features: Vec<Vec<PackedVec>> = values
        .iter()
        .map(|&v| {
            let q = poly.quantizer.quantize(v)?;
            Ok(load_planes(
                vm,
                &BitPlanes::from_values(&vec![q; w], p),
                Kind::Ciphertext,
            ))
        })
        .collect::<Result<_, RuntimeError>>()?;
    let ones = vm.plaintext(&Bits::ones(w));

    let decisions: Vec<(PackedVec, PackedVec)> = poly
        .branches
        .iter()
        .map(|&(feature, threshold)| {
            let t = load_planes(vm, &BitPlanes::from_values(&vec![threshold; w], p), kind);
            let taken = kernels::sec_comp(vm, &features[feature], &t)?;
            let not_taken = vm.add(&taken, &ones).map_err(KernelError::from)?;
            Ok((not_taken, taken))
        })
        .collect::<Result<_, RuntimeError>>()?;

    let mut labels = Vec::with_capacity(poly.trees.len());
    for terms in &poly.trees {
        let mut acc: Option<PackedVec> = None;
        for term in terms {
            let literals: Vec<PackedVec> = term
                .literals
                .iter()
                .map(|&(branch, taken)| {
                    let (no, yes) = &decisions[branch];
                    if taken {
                        yes.clone()
                    } else {
                        no.clone()
                    }
                })
                .collect();
            let path = if literals.is_empty() {
                ones.clone()
            } else {
                kernels::mult_all(vm, &literals)?
            };
            let code = load(&Bits::from_fn(w, |j| term.label >> j & 1 == 1));
            let contribution = vm.mult(&path, &code).map_err(KernelError::from)?;
            acc = Some(match acc {
                None => contribution,
                Some(sum) => vm.add(&sum, &contribution).map_err(KernelError::from)?,
            });
        }
        let bits = vm.decrypt(&acc.expect("a tree has at least one leaf"));
        labels.push((0..w).filter(|&j| bits.get(j)).map(|j| 1 << j).sum());
    }
    Ok(PolyResult {
        labels,
        ledger: vm.snapshot(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{demo_forest, parse_forest};

    fn q8() -> Quantizer {
        Quantizer::new(8, 0).unwrap()
    }

    #[test]
    fn label_widths() {
        assert_eq!(label_width(1), 1);
        assert_eq!(label_width(2), 1);
        assert_eq!(label_width(3), 2);
        assert_eq!(label_width(6), 3);
        assert_eq!(label_width(8), 3);
        assert_eq!(label_width(9), 4);
    }

    #[test]
    fn demo_terms() {
        let poly = poly_compile(&demo_forest(), q8()).unwrap();
        assert_eq!(poly.trees.len(), 1);
        assert_eq!(poly.trees[0].len(), 6);
        assert_eq!(poly.trees[0][4].literals, vec![(0, true), (4, false)]);
        assert_eq!(poly.branches[0], (1, 3));
    }

    #[test]
    fn demo_query_in_both_modes() {
        let poly = poly_compile(&demo_forest(), q8()).unwrap();
        for mode in [ModelMode::Encrypted, ModelMode::Plaintext] {
            let r = poly_eval(&Vm::new(), &poly, &[0.0, 5.0], mode).unwrap();
            assert_eq!(r.labels, vec![4]);
        }
    }

    #[test]
    fn single_leaf_tree() {
        let forest = parse_forest("labels A B C\nleaf 2\nbranch 0 1 leaf 0 leaf 1\n").unwrap();
        let poly = poly_compile(&forest, q8()).unwrap();
        let r = poly_eval(&Vm::new(), &poly, &[3.0], ModelMode::Encrypted).unwrap();
        assert_eq!(r.labels, vec![2, 1]);
    }
}

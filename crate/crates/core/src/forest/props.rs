use std::ops::Range;

use super::{Forest, Node};

/// A branch above a leaf, and which side of it the leaf sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ancestor {
    pub branch: usize,
    /// The leaf is under the right ("true") child.
    pub on_true_side: bool,
}

/// Structural properties of a forest, indexed by preorder branch/leaf number.
///
/// Leaf indices reachable from a branch are contiguous in preorder, so the
/// downstream set of each branch is stored as a range, and so is the part of
/// it that hangs under the true child.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestProps {
    /// Number of branches.
    pub branching: usize,
    /// Maximum level over all nodes.
    pub depth: usize,
    /// Branch count per feature.
    pub multiplicity: Vec<usize>,
    pub max_multiplicity: usize,
    pub num_features: usize,
    /// `max_multiplicity * num_features`.
    pub quantized_branching: usize,
    pub num_leaves: usize,
    pub level: Vec<usize>,
    pub downstream: Vec<Range<usize>>,
    pub true_downstream: Vec<Range<usize>>,
    /// Feature tested by each branch.
    pub features: Vec<usize>,
    /// Threshold of each branch.
    pub thresholds: Vec<f64>,
    /// Root-to-leaf branch path for every leaf, root first.
    pub leaf_ancestors: Vec<Vec<Ancestor>>,
    pub leaf_labels: Vec<usize>,
    pub tree_leaves: Vec<Range<usize>>,
}

impl ForestProps {
    pub fn compute(forest: &Forest) -> ForestProps {
        let b = forest.num_branches();
        let mut walk = Walk {
            level: vec![0; b],
            downstream: vec![0..0; b],
            true_downstream: vec![0..0; b],
            leaf_ancestors: Vec::with_capacity(forest.num_leaves()),
            stack: Vec::new(),
            next_branch: 0,
        };
        for tree in forest.trees() {
            walk.visit(tree);
        }

        let num_features = forest.num_features();
        let mut multiplicity = vec![0; num_features];
        for br in forest.branches() {
            multiplicity[br.feature] += 1;
        }
        let max_multiplicity = multiplicity.iter().copied().max().unwrap_or(0);

        ForestProps {
            branching: b,
            depth: walk.level.iter().copied().max().unwrap_or(0),
            quantized_branching: max_multiplicity * num_features,
            multiplicity,
            max_multiplicity,
            num_features,
            num_leaves: forest.num_leaves(),
            level: walk.level,
            downstream: walk.downstream,
            true_downstream: walk.true_downstream,
            features: forest.branches().iter().map(|b| b.feature).collect(),
            thresholds: forest.branches().iter().map(|b| b.threshold).collect(),
            leaf_ancestors: walk.leaf_ancestors,
            leaf_labels: forest.leaves().iter().map(|l| l.label).collect(),
            tree_leaves: forest.tree_leaves().to_vec(),
        }
    }

    pub fn width(&self, branch: usize) -> usize {
        self.downstream[branch].len()
    }
}

struct Walk {
    level: Vec<usize>,
    downstream: Vec<Range<usize>>,
    true_downstream: Vec<Range<usize>>,
    leaf_ancestors: Vec<Vec<Ancestor>>,
    stack: Vec<Ancestor>,
    next_branch: usize,
}

impl Walk {
    /// Returns the node's level.
    fn visit(&mut self, node: &Node) -> usize {
        match node {
            Node::Leaf { .. } => {
                self.leaf_ancestors.push(self.stack.clone());
                0
            }
            Node::Branch { left, right, .. } => {
                let id = self.next_branch;
                self.next_branch += 1;
                let start = self.leaf_ancestors.len();

                self.stack.push(Ancestor {
                    branch: id,
                    on_true_side: false,
                });
                let left_level = self.visit(left);
                let mid = self.leaf_ancestors.len();
                self.stack.last_mut().expect("pushed above").on_true_side = true;
                let right_level = self.visit(right);
                self.stack.pop();

                let end = self.leaf_ancestors.len();
                let level = 1 + left_level.max(right_level);
                self.level[id] = level;
                self.downstream[id] = start..end;
                self.true_downstream[id] = mid..end;
                level
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::forest::{demo_forest, parse_forest};

    #[test]
    fn demo_multiplicities() {
        let props = demo_forest().props();
        assert_eq!(props.multiplicity, vec![2, 3]);
        assert_eq!(props.max_multiplicity, 3);
        assert_eq!(props.branching, 5);
        assert_eq!(props.quantized_branching, 6);
        assert_eq!(props.depth, 3);
        assert_eq!(props.level, vec![3, 2, 1, 1, 1]);
    }

    #[test]
    fn demo_downstream_sets() {
        let props = demo_forest().props();
        assert_eq!(props.downstream, vec![0..6, 0..4, 0..2, 2..4, 4..6]);
        assert_eq!(props.true_downstream, vec![4..6, 2..4, 1..2, 3..4, 5..6]);
        let widths: Vec<_> = (0..5).map(|j| props.width(j)).collect();
        assert_eq!(widths, vec![6, 4, 2, 2, 2]);
        let path: Vec<_> = props.leaf_ancestors[4].iter().map(|a| a.branch).collect();
        assert_eq!(path, vec![0, 4]);
    }

    #[test]
    fn single_leaf_has_no_structure() {
        let props = parse_forest("labels A\nleaf 0\n").unwrap().props();
        assert_eq!(
            (
                props.branching,
                props.depth,
                props.max_multiplicity,
                props.quantized_branching
            ),
            (0, 0, 0, 0)
        );
        assert!(props.leaf_ancestors[0].is_empty());
    }

    #[test]
    fn unused_feature_still_counts_toward_q() {
        let props = parse_forest("labels A B\nbranch 2 1 leaf 0 leaf 1\n")
            .unwrap()
            .props();
        assert_eq!(props.num_features, 3);
        assert_eq!(props.multiplicity, vec![0, 0, 1]);
        assert_eq!(props.quantized_branching, 3);
    }
}

//! Decision-forest IR.
//!
//! A [`Forest`] is a list of binary trees over dense feature indices plus the
//! label names their leaves refer to. Branches and leaves are each numbered in
//! preorder across the whole forest, tree after tree, without restarting.
//!
//! A branch tests `feature > threshold`; the result `true` routes to the right
//! child, `false` to the left child.

mod parse;
mod props;

use std::fmt;
use std::ops::Range;

pub use parse::{parse_forest, ParseError};
pub use props::{Ancestor, ForestProps};

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Branch {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        label: usize,
    },
}

impl Node {
    pub fn leaf(label: usize) -> Node {
        Node::Leaf { label }
    }

    pub fn branch(feature: usize, threshold: f64, left: Node, right: Node) -> Node {
        Node::Branch {
            feature,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn num_branches(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Branch { left, right, .. } => 1 + left.num_branches() + right.num_branches(),
        }
    }

    pub fn num_leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Branch { left, right, .. } => left.num_leaves() + right.num_leaves(),
        }
    }

    /// Level of the node: branches on the longest path down to a leaf.
    pub fn level(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Branch { left, right, .. } => 1 + left.level().max(right.level()),
        }
    }

    fn max_label(&self) -> Option<usize> {
        match self {
            Node::Leaf { label } => Some(*label),
            Node::Branch { left, right, .. } => left.max_label().max(right.max_label()),
        }
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            Node::Leaf { .. } => None,
            Node::Branch {
                feature,
                left,
                right,
                ..
            } => Some(*feature)
                .max(left.max_feature())
                .max(right.max_feature()),
        }
    }
}

/// One branch in forest-wide preorder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchEntry {
    pub tree: usize,
    pub feature: usize,
    pub threshold: f64,
}

/// One leaf in forest-wide preorder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeafEntry {
    pub tree: usize,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ForestError {
    #[error("forest has no trees")]
    NoTrees,
    #[error("forest declares no labels")]
    NoLabels,
    #[error("leaf label index {index} out of range for {declared} declared labels")]
    LabelOutOfRange { index: usize, declared: usize },
    #[error("threshold {0} is not a finite number")]
    NonFiniteThreshold(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    labels: Vec<String>,
    trees: Vec<Node>,
    branches: Vec<BranchEntry>,
    leaves: Vec<LeafEntry>,
    tree_leaves: Vec<Range<usize>>,
}

impl Forest {
    pub fn new(labels: Vec<String>, trees: Vec<Node>) -> Result<Forest, ForestError> {
        if labels.is_empty() {
            return Err(ForestError::NoLabels);
        }
        if trees.is_empty() {
            return Err(ForestError::NoTrees);
        }
        for tree in &trees {
            if let Some(index) = tree.max_label() {
                if index >= labels.len() {
                    return Err(ForestError::LabelOutOfRange {
                        index,
                        declared: labels.len(),
                    });
                }
            }
        }
        let mut branches = Vec::new();
        let mut leaves = Vec::new();
        let mut tree_leaves = Vec::with_capacity(trees.len());
        for (t, tree) in trees.iter().enumerate() {
            let start = leaves.len();
            enumerate(tree, t, &mut branches, &mut leaves)?;
            tree_leaves.push(start..leaves.len());
        }
        Ok(Forest {
            labels,
            trees,
            branches,
            leaves,
            tree_leaves,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn trees(&self) -> &[Node] {
        &self.trees
    }

    /// Branches in preorder; position is the branch index.
    pub fn branches(&self) -> &[BranchEntry] {
        &self.branches
    }

    /// Leaves in preorder; position is the leaf index.
    pub fn leaves(&self) -> &[LeafEntry] {
        &self.leaves
    }

    /// Leaf-index span owned by each tree.
    pub fn tree_leaves(&self) -> &[Range<usize>] {
        &self.tree_leaves
    }

    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Dense feature count: one more than the largest feature index used.
    pub fn num_features(&self) -> usize {
        self.trees
            .iter()
            .filter_map(Node::max_feature)
            .max()
            .map_or(0, |m| m + 1)
    }

    pub fn props(&self) -> ForestProps {
        ForestProps::compute(self)
    }
}

fn enumerate(
    node: &Node,
    tree: usize,
    branches: &mut Vec<BranchEntry>,
    leaves: &mut Vec<LeafEntry>,
) -> Result<(), ForestError> {
    match node {
        Node::Leaf { label } => leaves.push(LeafEntry {
            tree,
            label: *label,
        }),
        Node::Branch {
            feature,
            threshold,
            left,
            right,
        } => {
            if !threshold.is_finite() {
                return Err(ForestError::NonFiniteThreshold(*threshold));
            }
            branches.push(BranchEntry {
                tree,
                feature: *feature,
                threshold: *threshold,
            });
            enumerate(left, tree, branches, leaves)?;
            enumerate(right, tree, branches, leaves)?;
        }
    }
    Ok(())
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node) -> fmt::Result {
    match node {
        Node::Leaf { label } => write!(f, "leaf {label}"),
        Node::Branch {
            feature,
            threshold,
            left,
            right,
        } => {
            write!(f, "branch {feature} {threshold} ")?;
            write_node(f, left)?;
            f.write_str(" ")?;
            write_node(f, right)
        }
    }
}

/// Canonical `.forest` text: single spaces, one tree per line, trailing newline.
impl fmt::Display for Forest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("labels")?;
        for label in &self.labels {
            write!(f, " {label}")?;
        }
        f.write_str("\n")?;
        for tree in &self.trees {
            write_node(f, tree)?;
            f.write_str("\n")?;
        }
        Ok(())
    }
}

/// The six-leaf, two-feature demo tree used throughout the docs and examples.
///
/// Branches `d0..d4` in preorder test `d0:y d1:x d2:y d3:x d4:y`, so feature
/// `x` (index 0) has multiplicity 2 and `y` (index 1) multiplicity 3. `d0` is
/// the root at level 3, `d4` sits at level 1 directly above `L4` and `L5`. The
/// query `(x, y) = (0, 5)` lands on `L4`.
pub const DEMO_FOREST: &str = "labels L0 L1 L2 L3 L4 L5
branch 1 3 branch 0 2 branch 1 4 leaf 0 leaf 1 branch 0 6 leaf 2 leaf 3 branch 1 7 leaf 4 leaf 5
";

pub fn demo_forest() -> Forest {
    parse_forest(DEMO_FOREST).expect("demo forest parses")
}

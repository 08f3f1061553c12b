//! Seeded synthetic forests and queries.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::forest::{Forest, Node};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Bounds for [`random_forest`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestShape {
    pub max_trees: usize,
    /// Longest root-to-leaf path, in branches.
    pub max_depth: usize,
    pub max_branches: usize,
    pub max_features: usize,
    pub max_labels: usize,
    /// Thresholds are integers in `0..2^precision`.
    pub precision: u32,
}

impl Default for ForestShape {
    fn default() -> Self {
        ForestShape {
            max_trees: 5,
            max_depth: 8,
            max_branches: 64,
            max_features: 4,
            max_labels: 5,
            precision: 8,
        }
    }
}

impl ForestShape {
    pub fn with_precision(mut self, precision: u32) -> Self {
        self.precision = precision;
        self
    }

    fn max_value(&self) -> u64 {
        (1u64 << self.precision) - 1
    }
}

pub fn random_forest(rng: &mut impl Rng, shape: &ForestShape) -> Forest {
    let n_trees = rng.gen_range(1..=shape.max_trees);
    let n_features = rng.gen_range(1..=shape.max_features);
    let n_labels = rng.gen_range(2..=shape.max_labels);
    let mut budget = rng.gen_range(0..=shape.max_branches);
    let split = rng.gen_range(0.55..0.95);
    let trees = (0..n_trees)
        .map(|_| {
            let depth = rng.gen_range(0..=shape.max_depth);
            grow(rng, shape, depth, split, &mut budget, n_features, n_labels)
        })
        .collect();
    Forest::new(label_names(n_labels), trees).expect("generated forest is valid")
}

fn grow(
    rng: &mut impl Rng,
    shape: &ForestShape,
    depth: usize,
    split: f64,
    budget: &mut usize,
    n_features: usize,
    n_labels: usize,
) -> Node {
    if depth == 0 || *budget == 0 || !rng.gen_bool(split) {
        return Node::leaf(rng.gen_range(0..n_labels));
    }
    *budget -= 1;
    let feature = rng.gen_range(0..n_features);
    let threshold = rng.gen_range(0..=shape.max_value()) as f64;
    let left = grow(rng, shape, depth - 1, split, budget, n_features, n_labels);
    let right = grow(rng, shape, depth - 1, split, budget, n_features, n_labels);
    Node::branch(feature, threshold, left, right)
}

/// A query over every feature of `forest`. About a quarter of the features
/// take the exact value of some threshold on that feature, so ties get
/// exercised.
pub fn random_query(rng: &mut impl Rng, forest: &Forest, precision: u32) -> Vec<f64> {
    let max = (1u64 << precision) - 1;
    (0..forest.num_features())
        .map(|f| {
            let on_feature: Vec<f64> = forest
                .branches()
                .iter()
                .filter(|b| b.feature == f)
                .map(|b| b.threshold)
                .collect();
            match on_feature.choose(rng) {
                Some(&t) if rng.gen_bool(0.25) => t,
                _ => rng.gen_range(0..=max) as f64,
            }
        })
        .collect()
}

fn label_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i}")).collect()
}

/// A forest with exactly `sum(tree_branches)` branches and exactly `depth`
/// levels: the first tree is grown along a spine of `depth` branches, then
/// each tree is grown at random leaves whose path is shorter than `depth`.
pub fn exact_forest(
    rng: &mut impl Rng,
    depth: usize,
    tree_branches: &[usize],
    n_features: usize,
    n_labels: usize,
    precision: u32,
) -> Forest {
    assert!(!tree_branches.is_empty(), "need at least one tree");
    assert!(
        depth >= 1 && tree_branches[0] >= depth,
        "first tree needs a spine of `depth` branches"
    );
    let max = (1u64 << precision) - 1;
    let trees = tree_branches
        .iter()
        .enumerate()
        .map(|(t, &count)| {
            assert!(
                count < 1 << depth,
                "tree {t} cannot hold {count} branches at depth {depth}"
            );
            let mut shape = Shape::Leaf;
            let mut placed = 0;
            if t == 0 {
                shape = Shape::spine(depth);
                placed = depth;
            }
            while placed < count {
                shape.split_random_leaf(rng, depth);
                placed += 1;
            }
            shape.realize(rng, n_features, n_labels, max)
        })
        .collect();
    Forest::new(label_names(n_labels), trees).expect("generated forest is valid")
}

enum Shape {
    Leaf,
    Branch(Box<Shape>, Box<Shape>),
}

impl Shape {
    fn spine(depth: usize) -> Shape {
        (0..depth).fold(Shape::Leaf, |child, _| {
            Shape::Branch(Box::new(child), Box::new(Shape::Leaf))
        })
    }

    /// Open leaves: leaves whose path has fewer than `depth` branches.
    fn open_leaves(&self, depth: usize) -> usize {
        match self {
            Shape::Leaf => usize::from(depth > 0),
            Shape::Branch(l, r) if depth > 0 => l.open_leaves(depth - 1) + r.open_leaves(depth - 1),
            Shape::Branch(..) => 0,
        }
    }

    fn split_random_leaf(&mut self, rng: &mut impl Rng, depth: usize) {
        let open = self.open_leaves(depth);
        assert!(open > 0, "tree is full");
        self.split_nth(rng.gen_range(0..open), depth);
    }

    fn split_nth(&mut self, n: usize, depth: usize) {
        match self {
            Shape::Leaf => *self = Shape::Branch(Box::new(Shape::Leaf), Box::new(Shape::Leaf)),
            Shape::Branch(l, r) => {
                let left_open = l.open_leaves(depth - 1);
                if n < left_open {
                    l.split_nth(n, depth - 1);
                } else {
                    r.split_nth(n - left_open, depth - 1);
                }
            }
        }
    }

    fn realize(&self, rng: &mut impl Rng, n_features: usize, n_labels: usize, max: u64) -> Node {
        match self {
            Shape::Leaf => Node::leaf(rng.gen_range(0..n_labels)),
            Shape::Branch(l, r) => {
                let feature = rng.gen_range(0..n_features);
                let threshold = rng.gen_range(0..=max) as f64;
                let left = l.realize(rng, n_features, n_labels, max);
                let right = r.realize(rng, n_features, n_labels, max);
                Node::branch(feature, threshold, left, right)
            }
        }
    }
}

/// Small fixed-shape models for scaling studies: two features, three labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MicroSpec {
    pub name: &'static str,
    pub depth: usize,
    pub precision: u32,
    pub tree_branches: &'static [usize],
}

impl MicroSpec {
    pub fn branching(&self) -> usize {
        self.tree_branches.iter().sum()
    }

    pub fn build(&self, seed: u64) -> Forest {
        exact_forest(
            &mut rng(seed),
            self.depth,
            self.tree_branches,
            2,
            3,
            self.precision,
        )
    }
}

pub const MICRO_MODELS: [MicroSpec; 8] = [
    MicroSpec {
        name: "depth4",
        depth: 4,
        precision: 8,
        tree_branches: &[8, 7],
    },
    MicroSpec {
        name: "depth5",
        depth: 5,
        precision: 8,
        tree_branches: &[8, 7],
    },
    MicroSpec {
        name: "depth6",
        depth: 6,
        precision: 8,
        tree_branches: &[8, 7],
    },
    MicroSpec {
        name: "width55",
        depth: 5,
        precision: 8,
        tree_branches: &[5, 5],
    },
    MicroSpec {
        name: "width78",
        depth: 5,
        precision: 8,
        tree_branches: &[7, 8],
    },
    MicroSpec {
        name: "width677",
        depth: 5,
        precision: 8,
        tree_branches: &[6, 7, 7],
    },
    MicroSpec {
        name: "prec8",
        depth: 5,
        precision: 8,
        tree_branches: &[8, 7],
    },
    MicroSpec {
        name: "prec16",
        depth: 5,
        precision: 16,
        tree_branches: &[8, 7],
    },
];

pub fn micro_model(name: &str) -> Option<&'static MicroSpec> {
    MICRO_MODELS.iter().find(|m| m.name == name)
}

/// Census-income-like features: name and integer upper bound.
pub const INCOME_FEATURES: [(&str, u64); 8] = [
    ("age", 90),
    ("education_years", 16),
    ("hours_per_week", 99),
    ("capital_gain", 60_000),
    ("capital_loss", 4_400),
    ("occupation_code", 14),
    ("marital_code", 7),
    ("sample_weight_k", 1_500),
];

/// A five-tree, two-label forest over [`INCOME_FEATURES`] with at least 64
/// branches and depth at most 6; thresholds fit 16-bit precision.
pub fn income_like(seed: u64) -> Forest {
    let mut r = rng(seed);
    let sizes = [14, 13, 13, 12, 12];
    let trees = sizes
        .iter()
        .enumerate()
        .map(|(t, &count)| {
            let mut shape = if t == 0 { Shape::spine(6) } else { Shape::Leaf };
            let mut placed = if t == 0 { 6 } else { 0 };
            while placed < count {
                shape.split_random_leaf(&mut r, 6);
                placed += 1;
            }
            realize_income(&shape, &mut r)
        })
        .collect();
    Forest::new(vec!["le_50k".into(), "gt_50k".into()], trees).expect("generated forest is valid")
}

fn realize_income(shape: &Shape, rng: &mut impl Rng) -> Node {
    match shape {
        Shape::Leaf => Node::leaf(rng.gen_range(0..2)),
        Shape::Branch(l, r) => {
            let feature = rng.gen_range(0..INCOME_FEATURES.len());
            let threshold = rng.gen_range(0..INCOME_FEATURES[feature].1) as f64;
            let left = realize_income(l, rng);
            let right = realize_income(r, rng);
            Node::branch(feature, threshold, left, right)
        }
    }
}

/// A query within the income feature ranges.
pub fn income_query(rng: &mut impl Rng) -> Vec<f64> {
    INCOME_FEATURES
        .iter()
        .map(|&(_, max)| rng.gen_range(0..=max) as f64)
        .collect()
}

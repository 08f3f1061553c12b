//! Inference protocol over a staged model.
//!
//! The data owner replicates each feature once per slot of its group,
//! quantizes, bit-transposes and encrypts. The evaluator then runs:
//!
//! 1. comparison of the feature planes against the threshold planes,
//! 2. reshuffle of the comparison slots into preorder branch decisions,
//! 3. per level: level matrix times decisions, XOR the level mask,
//! 4. AND of all level vectors.
//!
//! The result has one slot per leaf with exactly one set bit per tree and goes
//! back to the data owner for decryption and [`decode`].
//!
//! With [`ModelMode::Encrypted`] every model artifact is a ciphertext (model
//! and data owner are the same party, evaluation is offloaded). With
//! [`ModelMode::Plaintext`] the evaluator owns the model and keeps it in the
//! clear, so model-side multiplications are ciphertext-plaintext.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::forest::{Forest, Node};
use crate::kernels::{self, load_planes, KernelError, PackedMatrix};
use crate::staging::{
    BitPlanes, Codebook, CompiledModel, ModelMeta, QuantizeError, Quantizer, StageError,
};
use crate::vm::{Kind, LedgerSnapshot, OpCounts, PackedVec, Vm, VmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelMode {
    /// Model artifacts encrypted by their owner.
    #[default]
    Encrypted,
    /// Model held in the clear by the evaluator.
    Plaintext,
}

impl ModelMode {
    pub fn kind(self) -> Kind {
        match self {
            ModelMode::Encrypted => Kind::Ciphertext,
            ModelMode::Plaintext => Kind::Plaintext,
        }
    }
}

impl fmt::Display for ModelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelMode::Encrypted => "encrypted",
            ModelMode::Plaintext => "plaintext",
        })
    }
}

impl FromStr for ModelMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "encrypted" => Ok(ModelMode::Encrypted),
            "plaintext" => Ok(ModelMode::Plaintext),
            other => Err(format!(
                "unknown mode `{other}` (expected encrypted or plaintext)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PartyConfig {
    pub mode: ModelMode,
    /// Publicly revealed bound on the maximum multiplicity; `None` reveals the exact value.
    pub k_declared: Option<usize>,
    /// Fail once a ciphertext product would exceed this depth.
    pub max_depth: Option<u32>,
}

impl PartyConfig {
    pub fn new(mode: ModelMode) -> Self {
        PartyConfig {
            mode,
            ..Default::default()
        }
    }

    pub fn with_k_declared(mut self, k: usize) -> Self {
        self.k_declared = Some(k);
        self
    }

    pub fn with_max_depth(mut self, depth: u32) -> Self {
        self.max_depth = Some(depth);
        self
    }

    pub fn group_width(&self, model: &CompiledModel) -> usize {
        self.k_declared.unwrap_or(model.meta.max_multiplicity)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error(transparent)]
    Quantize(#[from] QuantizeError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("query is missing feature {0}")]
    MissingFeature(usize),
    #[error("query sets feature {index} but the model has {num_features} features")]
    UnknownFeature { index: usize, num_features: usize },
    #[error("query line {line}: {message}")]
    QuerySyntax { line: usize, message: String },
    #[error("query layout ({found}) does not match model layout ({expected})")]
    LayoutMismatch { expected: String, found: String },
    #[error("result is not one-hot per tree: tree {tree} has {ones} set slots")]
    MalformedResult { tree: usize, ones: usize },
}

impl RuntimeError {
    pub fn is_depth_budget(&self) -> bool {
        matches!(
            self,
            RuntimeError::Kernel(KernelError::Vm(VmError::DepthBudgetExceeded { .. }))
        )
    }
}

/// Encoded query: features replicated `group_width` times in feature order,
/// quantized and bit-transposed.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureQuery {
    pub raw: Vec<f64>,
    pub quantized: Vec<u64>,
    pub group_width: usize,
    pub planes: BitPlanes,
}

pub fn encode_features(
    values: &[f64],
    num_features: usize,
    quantizer: Quantizer,
    group_width: usize,
) -> Result<FeatureQuery, RuntimeError> {
    if values.len() < num_features {
        return Err(RuntimeError::MissingFeature(values.len()));
    }
    if values.len() > num_features {
        return Err(RuntimeError::UnknownFeature {
            index: num_features,
            num_features,
        });
    }
    let quantized = values
        .iter()
        .map(|&v| quantizer.quantize(v))
        .collect::<Result<Vec<_>, _>>()?;
    let replicated: Vec<u64> = quantized
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v, group_width))
        .collect();
    Ok(FeatureQuery {
        raw: values.to_vec(),
        planes: BitPlanes::from_values(&replicated, quantizer.precision),
        quantized,
        group_width,
    })
}

/// Parses query text: one `feature <index> <decimal>` line per feature.
/// Blank lines and `#` comments are ignored.
pub fn parse_query(text: &str) -> Result<BTreeMap<usize, f64>, RuntimeError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: String| RuntimeError::QuerySyntax {
            line: line_no,
            message,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let [kw, index, value] = tokens[..] else {
            return Err(syntax(format!(
                "expected `feature <index> <value>`, found `{line}`"
            )));
        };
        if kw != "feature" {
            return Err(syntax(format!("expected `feature`, found `{kw}`")));
        }
        let index: usize = index
            .parse()
            .map_err(|_| syntax(format!("bad feature index `{index}`")))?;
        let value: f64 = value
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| syntax(format!("bad feature value `{value}`")))?;
        if out.insert(index, value).is_some() {
            return Err(syntax(format!("feature {index} given twice")));
        }
    }
    Ok(out)
}

/// Dense feature vector from parsed query entries.
pub fn query_values(
    entries: &BTreeMap<usize, f64>,
    num_features: usize,
) -> Result<Vec<f64>, RuntimeError> {
    if let Some((&index, _)) = entries.range(num_features..).next() {
        return Err(RuntimeError::UnknownFeature {
            index,
            num_features,
        });
    }
    (0..num_features)
        .map(|i| {
            entries
                .get(&i)
                .copied()
                .ok_or(RuntimeError::MissingFeature(i))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    EncryptModel,
    EncryptQuery,
    Comparison,
    Reshuffle,
    Levels,
    Accumulate,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::EncryptModel,
        Phase::EncryptQuery,
        Phase::Comparison,
        Phase::Reshuffle,
        Phase::Levels,
        Phase::Accumulate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::EncryptModel => "encrypt_model",
            Phase::EncryptQuery => "encrypt_query",
            Phase::Comparison => "comparison",
            Phase::Reshuffle => "reshuffle",
            Phase::Levels => "levels",
            Phase::Accumulate => "accumulate",
        }
    }
}

/// Operations spent in one phase and the depth of what it produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCost {
    pub phase: Phase,
    #[serde(flatten)]
    pub counts: OpCounts,
    pub output_depth: u32,
}

#[derive(Debug, Clone)]
pub struct Inference {
    /// Encrypted N-hot leaf vector.
    pub labels: PackedVec,
    pub phases: Vec<PhaseCost>,
    /// Cost of each level, matrix product plus mask, in level order.
    pub level_costs: Vec<OpCounts>,
    pub ledger: LedgerSnapshot,
    pub mode: ModelMode,
    /// Shape of the model as evaluated, after padding.
    pub meta: ModelMeta,
}

impl Inference {
    pub fn phase(&self, phase: Phase) -> Option<&PhaseCost> {
        self.phases.iter().find(|p| p.phase == phase)
    }

    /// Counts excluding the one-off model and query encryptions.
    pub fn evaluation_counts(&self) -> OpCounts {
        self.phases
            .iter()
            .filter(|p| !matches!(p.phase, Phase::EncryptModel | Phase::EncryptQuery))
            .fold(OpCounts::default(), |acc, p| acc + p.counts)
    }
}

struct PhaseClock<'a> {
    vm: &'a Vm,
    mark: OpCounts,
    phases: Vec<PhaseCost>,
}

impl<'a> PhaseClock<'a> {
    fn new(vm: &'a Vm) -> Self {
        PhaseClock {
            vm,
            mark: vm.snapshot().counts,
            phases: Vec::new(),
        }
    }

    fn lap(&mut self) -> OpCounts {
        let now = self.vm.snapshot().counts;
        let spent = now - self.mark;
        self.mark = now;
        spent
    }

    fn record(&mut self, phase: Phase, output_depth: u32) {
        let counts = self.lap();
        self.phases.push(PhaseCost {
            phase,
            counts,
            output_depth,
        });
    }
}

/// Runs one query on a fresh machine.
pub fn infer(
    model: &CompiledModel,
    query: &FeatureQuery,
    cfg: &PartyConfig,
) -> Result<Inference, RuntimeError> {
    let mut vm = Vm::new();
    if let Some(budget) = cfg.max_depth {
        vm = vm.with_depth_budget(budget);
    }
    infer_on(&vm, model, query, cfg)
}

/// Runs one query on `vm`, whose ledger keeps accumulating.
pub fn infer_on(
    vm: &Vm,
    model: &CompiledModel,
    query: &FeatureQuery,
    cfg: &PartyConfig,
) -> Result<Inference, RuntimeError> {
    let width = cfg.group_width(model);
    let model: Cow<'_, CompiledModel> = if width == model.meta.group_width {
        Cow::Borrowed(model)
    } else {
        Cow::Owned(model.with_group_width(width)?)
    };
    let meta = &model.meta;
    if query.planes.precision != meta.precision
        || query.group_width != meta.group_width
        || query.planes.slots() != meta.quantized_branching
    {
        return Err(RuntimeError::LayoutMismatch {
            expected: format!(
                "p={} group_width={} slots={}",
                meta.precision, meta.group_width, meta.quantized_branching
            ),
            found: format!(
                "p={} group_width={} slots={}",
                query.planes.precision,
                query.group_width,
                query.planes.slots()
            ),
        });
    }

    let mut clock = PhaseClock::new(vm);
    if meta.depth == 0 {
        // every tree is a single leaf; nothing to compare
        let labels = vm.plaintext(&Bits::ones(meta.num_leaves));
        return Ok(Inference {
            labels,
            phases: Vec::new(),
            level_costs: Vec::new(),
            ledger: vm.snapshot(),
            mode: cfg.mode,
            meta: meta.clone(),
        });
    }

    let kind = cfg.mode.kind();
    let thresholds = load_planes(vm, &model.thresholds, kind);
    let reshuffle = PackedMatrix::load(vm, &model.reshuffle, kind);
    let levels: Vec<PackedMatrix> = model
        .levels
        .iter()
        .map(|m| PackedMatrix::load(vm, m, kind))
        .collect();
    let masks: Vec<PackedVec> = model
        .masks
        .iter()
        .map(|m| match kind {
            Kind::Ciphertext => vm.encrypt(m),
            Kind::Plaintext => vm.plaintext(m),
        })
        .collect();
    clock.record(Phase::EncryptModel, 0);

    let features = load_planes(vm, &query.planes, Kind::Ciphertext);
    clock.record(Phase::EncryptQuery, 0);

    let decisions = kernels::sec_comp(vm, &features, &thresholds)?;
    clock.record(Phase::Comparison, decisions.depth());

    let branches = kernels::mat_mul(vm, &reshuffle, &decisions)?;
    clock.record(Phase::Reshuffle, branches.depth());

    let mut level_results = Vec::with_capacity(levels.len());
    let mut level_costs = Vec::with_capacity(levels.len());
    let mut level_clock = PhaseClock::new(vm);
    for (matrix, mask) in levels.iter().zip(&masks) {
        let selected = kernels::mat_mul(vm, matrix, &branches)?;
        level_results.push(vm.add(&selected, mask).map_err(KernelError::from)?);
        level_costs.push(level_clock.lap());
    }
    let levels_depth = level_results
        .iter()
        .map(PackedVec::depth)
        .max()
        .unwrap_or(0);
    clock.record(Phase::Levels, levels_depth);

    let labels = kernels::mult_all(vm, &level_results)?;
    clock.record(Phase::Accumulate, labels.depth());

    Ok(Inference {
        labels,
        phases: clock.phases,
        level_costs,
        ledger: vm.snapshot(),
        mode: cfg.mode,
        meta: meta.clone(),
    })
}

/// Reference semantics: walk every tree on quantized values, `feature >
/// threshold` going right. Returns the chosen leaf index of each tree.
pub fn traverse_oracle(
    forest: &Forest,
    values: &[f64],
    quantizer: Quantizer,
) -> Result<Vec<usize>, RuntimeError> {
    let features = values
        .iter()
        .map(|&v| quantizer.quantize(v))
        .collect::<Result<Vec<_>, _>>()?;
    let mut chosen = Vec::with_capacity(forest.trees().len());
    for (tree, span) in forest.trees().iter().zip(forest.tree_leaves()) {
        let mut node = tree;
        // leaf offset of `node`'s leftmost leaf within the forest
        let mut offset = span.start;
        loop {
            match node {
                Node::Leaf { .. } => break,
                Node::Branch {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let value = *features
                        .get(*feature)
                        .ok_or(RuntimeError::MissingFeature(*feature))?;
                    if value > quantizer.quantize(*threshold)? {
                        offset += left.num_leaves();
                        node = right;
                    } else {
                        node = left;
                    }
                }
            }
        }
        chosen.push(offset);
    }
    Ok(chosen)
}

/// Runs every query through [`infer`] and the traversal oracle; returns the
/// number of queries whose result vectors differ.
pub fn count_mismatches(
    forest: &Forest,
    model: &CompiledModel,
    cfg: &PartyConfig,
    queries: &[Vec<f64>],
) -> Result<usize, RuntimeError> {
    let quantizer = model.quantizer();
    let width = cfg.group_width(model);
    let mut mismatches = 0;
    for values in queries {
        let query = encode_features(values, model.meta.num_features, quantizer, width)?;
        let result = infer(model, &query, cfg)?;
        let expected = one_hot(
            &traverse_oracle(forest, values, quantizer)?,
            forest.num_leaves(),
        );
        if result.labels.peek() != &expected
            || decode(result.labels.peek(), &model.codebook).is_err()
        {
            mismatches += 1;
        }
    }
    Ok(mismatches)
}

/// N-hot leaf vector with the given leaves set.
pub fn one_hot(leaves: &[usize], num_leaves: usize) -> Bits {
    let mut bits = Bits::zeros(num_leaves);
    for &leaf in leaves {
        bits.set(leaf, true);
    }
    bits
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decoded {
    /// Chosen leaf of each tree.
    pub leaves: Vec<usize>,
    /// Label index chosen by each tree.
    pub labels: Vec<usize>,
    /// Most frequent label; ties go to the lowest label index.
    pub plurality: usize,
}

impl Decoded {
    pub fn label_names<'a>(&self, codebook: &'a Codebook) -> Vec<&'a str> {
        self.labels
            .iter()
            .map(|&l| codebook.labels[l].as_str())
            .collect()
    }

    pub fn plurality_name<'a>(&self, codebook: &'a Codebook) -> &'a str {
        &codebook.labels[self.plurality]
    }
}

/// Decodes a decrypted N-hot leaf vector.
pub fn decode(bits: &Bits, codebook: &Codebook) -> Result<Decoded, RuntimeError> {
    let mut leaves = Vec::with_capacity(codebook.tree_leaves.len());
    for (tree, &(start, end)) in codebook.tree_leaves.iter().enumerate() {
        let set: Vec<usize> = (start..end).filter(|&i| bits.get(i)).collect();
        match set[..] {
            [leaf] => leaves.push(leaf),
            _ => {
                return Err(RuntimeError::MalformedResult {
                    tree,
                    ones: set.len(),
                })
            }
        }
    }
    let labels: Vec<usize> = leaves.iter().map(|&l| codebook.leaf_labels[l]).collect();
    Ok(Decoded {
        plurality: plurality(&labels, codebook.labels.len()),
        leaves,
        labels,
    })
}

fn plurality(labels: &[usize], num_labels: usize) -> usize {
    let mut votes = vec![0usize; num_labels];
    for &l in labels {
        votes[l] += 1;
    }
    // max_by_key keeps the last maximum, so scan in reverse to favour low indices
    votes
        .iter()
        .enumerate()
        .rev()
        .max_by_key(|(_, &v)| v)
        .map_or(0, |(i, _)| i)
}

/// Output document for one inference: result slots, decoded labels and costs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultDocument {
    pub bitvector: Bits,
    pub tree_labels: Vec<String>,
    pub plurality: String,
    pub mode: ModelMode,
    pub ledger: LedgerSnapshot,
    pub phases: Vec<PhaseCost>,
}

impl ResultDocument {
    pub fn new(
        inference: &Inference,
        vm_bits: Bits,
        decoded: &Decoded,
        codebook: &Codebook,
    ) -> Self {
        ResultDocument {
            bitvector: vm_bits,
            tree_labels: decoded
                .label_names(codebook)
                .into_iter()
                .map(String::from)
                .collect(),
            plurality: decoded.plurality_name(codebook).to_string(),
            mode: inference.mode,
            ledger: inference.ledger,
            phases: inference.phases.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("result serializes")
    }
}

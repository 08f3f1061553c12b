//! Measured operation counts against closed-form predictions.
//!
//! Two predictions exist for every phase. The reference forms are the
//! published per-step formulas for this algorithm, evaluated with ceiling
//! base-2 logarithms. The circuit forms count exactly what this crate's
//! circuits do. Where the two differ the report carries a flag with the
//! measured delta and the delta that is expected from the circuit structure.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Sub;

use serde::Serialize;

use crate::baseline::{poly_compile, poly_eval};
use crate::forest::Forest;
use crate::runtime::{
    encode_features, infer, Inference, ModelMode, PartyConfig, Phase, RuntimeError,
};
use crate::staging::{compile, ModelMeta, Quantizer, StageError};
use crate::synth::{self, MicroSpec};
use crate::vm::{LedgerSnapshot, OpCounts, Vm};

/// `ceil(lg n)`, with `ceil_lg(0) = ceil_lg(1) = 0`.
pub fn ceil_lg(n: u64) -> u64 {
    if n <= 1 {
        0
    } else {
        u64::from(64 - (n - 1).leading_zeros())
    }
}

/// Counts in the granularity the formulas use: multiplications are not split
/// by operand kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub encrypt: i64,
    pub rotate: i64,
    pub add: i64,
    pub const_add: i64,
    pub multiply: i64,
}

impl From<OpCounts> for Counts {
    fn from(c: OpCounts) -> Self {
        Counts {
            encrypt: c.encrypt as i64,
            rotate: c.rotate as i64,
            add: c.add as i64,
            const_add: c.const_add as i64,
            multiply: c.multiply() as i64,
        }
    }
}

impl Sub for Counts {
    type Output = Counts;
    fn sub(self, o: Counts) -> Counts {
        Counts {
            encrypt: self.encrypt - o.encrypt,
            rotate: self.rotate - o.rotate,
            add: self.add - o.add,
            const_add: self.const_add - o.const_add,
            multiply: self.multiply - o.multiply,
        }
    }
}

impl std::ops::Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts {
            encrypt: self.encrypt + o.encrypt,
            rotate: self.rotate + o.rotate,
            add: self.add + o.add,
            const_add: self.const_add + o.const_add,
            multiply: self.multiply + o.multiply,
        }
    }
}

impl Counts {
    fn get(&self, op: &str) -> i64 {
        match op {
            "encrypt" => self.encrypt,
            "rotate" => self.rotate,
            "add" => self.add,
            "const_add" => self.const_add,
            "multiply" => self.multiply,
            other => panic!("unknown op {other}"),
        }
    }
}

/// Shape parameters the formulas are written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Shape {
    pub p: u64,
    pub q: u64,
    pub b: u64,
    pub d: u64,
}

impl From<&ModelMeta> for Shape {
    fn from(m: &ModelMeta) -> Self {
        Shape {
            p: u64::from(m.precision),
            q: m.quantized_branching as u64,
            b: m.branching as u64,
            d: m.depth as u64,
        }
    }
}

/// Reference formulas per phase and in total, plus the depth bounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClosedForms {
    pub shape: Shape,
    pub phases: BTreeMap<&'static str, Counts>,
    pub per_level: Counts,
    pub total: Counts,
    pub comparison_depth: u64,
    pub level_depth: u64,
    pub accumulate_depth: u64,
    pub depth_bound: u64,
}

pub fn closed_forms(shape: Shape) -> ClosedForms {
    let Shape { p, q, b, d } = shape;
    let (p, q, b, d) = (p as i64, q as i64, b as i64, d as i64);
    let lg_p = ceil_lg(shape.p) as i64;
    let lg_d = ceil_lg(shape.d) as i64;
    let comparison = Counts {
        add: 4 * p - 2,
        const_add: p,
        multiply: p * lg_p + 3 * p - 2,
        ..Default::default()
    };
    let per_level = Counts {
        rotate: b,
        add: b + 1,
        multiply: b,
        ..Default::default()
    };
    let levels = Counts {
        rotate: d * b,
        add: d * (b + 1),
        multiply: d * b,
        ..Default::default()
    };
    let accumulate = Counts {
        multiply: 2 * d - 2,
        ..Default::default()
    };
    let encrypt_model = Counts {
        encrypt: p + q + d * (b + 1),
        ..Default::default()
    };
    let encrypt_query = Counts {
        encrypt: 1,
        ..Default::default()
    };
    let total = Counts {
        encrypt: 1 + p + q + d * (b + 1),
        rotate: q + d * b,
        add: 4 * p - 2 + q + d * (b + 1),
        const_add: p,
        multiply: p * lg_p + 3 * p + q + d * b + 2 * d - 4,
    };
    // reshuffle is whatever the totals hold beyond the other steps
    let reshuffle = total - comparison - levels - accumulate - encrypt_model - encrypt_query;
    let phases = BTreeMap::from([
        (Phase::EncryptModel.name(), encrypt_model),
        (Phase::EncryptQuery.name(), encrypt_query),
        (Phase::Comparison.name(), comparison),
        (Phase::Reshuffle.name(), reshuffle),
        (Phase::Levels.name(), levels),
        (Phase::Accumulate.name(), accumulate),
    ]);
    ClosedForms {
        shape,
        phases,
        per_level,
        total,
        comparison_depth: (2 * lg_p + 1) as u64,
        level_depth: 1,
        accumulate_depth: lg_d as u64,
        depth_bound: (2 * lg_p + lg_d + 2) as u64,
    }
}

/// Multiplications of the shared-prefix AND over `n` inputs.
pub fn prefix_and_mults(n: u64) -> u64 {
    if n <= 1 {
        0
    } else {
        let half = n / 2;
        prefix_and_mults(n - half) + prefix_and_mults(half) + half
    }
}

/// Exact counts and output depth of this crate's comparison circuit at
/// precision `p`, thresholds encrypted or not.
pub fn comparison_circuit(p: u64, mode: ModelMode) -> (OpCounts, u32) {
    assert!(p >= 1);
    let prefix = prefix_and_mults(p - 1);
    let prefix_depth = ceil_lg(p - 1) as u32;
    match mode {
        ModelMode::Encrypted => (
            OpCounts {
                add: 2 * (p - 1),
                const_add: p,
                mult_ct_ct: p + prefix + (p - 1),
                ..Default::default()
            },
            if p == 1 { 1 } else { prefix_depth.max(1) + 1 },
        ),
        ModelMode::Plaintext => (
            OpCounts {
                add: p - 1,
                const_add: p - 1,
                mult_ct_pt: p,
                mult_ct_ct: prefix + (p - 1),
                ..Default::default()
            },
            if p == 1 { 0 } else { prefix_depth + 1 },
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhaseRow {
    pub phase: &'static str,
    pub measured: Counts,
    pub predicted: Counts,
    pub delta: Counts,
}

/// A known gap between a reference formula and the circuit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Flag {
    pub name: &'static str,
    pub phase: &'static str,
    pub op: &'static str,
    pub delta: i64,
    pub expected_delta: i64,
    pub note: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Relation {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

impl Relation {
    pub fn new(name: impl Into<String>, holds: bool, detail: impl Into<String>) -> Relation {
        Relation {
            name: name.into(),
            holds,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DepthRow {
    pub measured: u32,
    pub bound: u64,
    pub comparison_measured: u32,
    pub comparison_bound: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CostReport {
    pub mode: ModelMode,
    pub shape: Shape,
    pub depth: DepthRow,
    pub phases: Vec<PhaseRow>,
    pub total: PhaseRow,
    pub flags: Vec<Flag>,
    pub relations: Vec<Relation>,
}

impl CostReport {
    /// Whether every asserted relation holds.
    pub fn passed(&self) -> bool {
        self.relations.iter().all(|r| r.holds)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.shape;
        writeln!(
            f,
            "mode {}  p={} q={} b={} d={}",
            self.mode, s.p, s.q, s.b, s.d
        )?;
        writeln!(
            f,
            "{:<14} {:>22} {:>22} {:>22} {:>22} {:>22}",
            "phase", "encrypt", "rotate", "add", "const_add", "multiply"
        )?;
        for row in self.phases.iter().chain(std::iter::once(&self.total)) {
            write!(f, "{:<14}", row.phase)?;
            for op in ["encrypt", "rotate", "add", "const_add", "multiply"] {
                let cell = format!(
                    "{} / {} ({:+})",
                    row.measured.get(op),
                    row.predicted.get(op),
                    row.delta.get(op)
                );
                write!(f, " {cell:>22}")?;
            }
            writeln!(f)?;
        }
        writeln!(
            f,
            "depth {} (bound {}), comparison depth {} (bound {})",
            self.depth.measured,
            self.depth.bound,
            self.depth.comparison_measured,
            self.depth.comparison_bound
        )?;
        for flag in &self.flags {
            writeln!(
                f,
                "flag {}: {} {} delta {:+} (expected {:+}) {}",
                flag.name, flag.phase, flag.op, flag.delta, flag.expected_delta, flag.note
            )?;
        }
        for r in &self.relations {
            writeln!(
                f,
                "[{}] {}: {}",
                if r.holds { "ok" } else { "FAIL" },
                r.name,
                r.detail
            )?;
        }
        Ok(())
    }
}

/// Compares one inference's ledger with the closed forms for its model.
pub fn report(inference: &Inference) -> CostReport {
    let shape = Shape::from(&inference.meta);
    let forms = closed_forms(shape);
    let mode = inference.mode;
    let measured_of = |phase: Phase| {
        inference
            .phase(phase)
            .map(|p| Counts::from(p.counts))
            .unwrap_or_default()
    };

    let phases: Vec<PhaseRow> = Phase::ALL
        .iter()
        .map(|&phase| {
            let measured = measured_of(phase);
            let mut predicted = forms.phases[phase.name()];
            if phase == Phase::EncryptModel && mode == ModelMode::Plaintext {
                predicted.encrypt = 0;
            }
            PhaseRow {
                phase: phase.name(),
                measured,
                predicted,
                delta: measured - predicted,
            }
        })
        .collect();
    let sum =
        |f: fn(&PhaseRow) -> Counts| phases.iter().map(f).fold(Counts::default(), |a, c| a + c);
    let total_measured = sum(|r| r.measured);
    let total_predicted = sum(|r| r.predicted);
    let total = PhaseRow {
        phase: "total",
        measured: total_measured,
        predicted: total_predicted,
        delta: total_measured - total_predicted,
    };

    let comparison_depth = inference
        .phase(Phase::Comparison)
        .map_or(0, |p| p.output_depth);
    let depth = DepthRow {
        measured: inference.ledger.max_depth,
        bound: forms.depth_bound,
        comparison_measured: comparison_depth,
        comparison_bound: forms.comparison_depth,
    };

    let delta_of = |phase: Phase, op: &str| {
        phases
            .iter()
            .find(|r| r.phase == phase.name())
            .map_or(0, |r| r.delta.get(op))
    };
    let Shape { p, b: _, d, .. } = shape;
    let (p_i, d_i) = (p as i64, d as i64);
    let (circuit, circuit_depth) = comparison_circuit(p.max(1), mode);
    let circuit = Counts::from(circuit);
    let comparison_forms = forms.phases[Phase::Comparison.name()];

    let mut flags = Vec::new();
    if shape.d > 0 {
        let mut flag = |name, phase: Phase, op, expected_delta, note| {
            flags.push(Flag {
                name,
                phase: phase.name(),
                op,
                delta: delta_of(phase, op),
                expected_delta,
                note,
            })
        };
        flag(
            "encrypt_per_plane",
            Phase::EncryptQuery,
            "encrypt",
            p_i - 1,
            "one ciphertext per bit-plane of the query",
        );
        flag(
            "comparison_adds",
            Phase::Comparison,
            "add",
            circuit.add - comparison_forms.add,
            "reconstructed comparison circuit",
        );
        flag(
            "comparison_const_adds",
            Phase::Comparison,
            "const_add",
            circuit.const_add - comparison_forms.const_add,
            "reconstructed comparison circuit",
        );
        flag(
            "comparison_mults",
            Phase::Comparison,
            "multiply",
            circuit.multiply - comparison_forms.multiply,
            "reconstructed comparison circuit",
        );
        flag(
            "reshuffle_adds",
            Phase::Reshuffle,
            "add",
            -1,
            "a sum of q products takes q-1 additions",
        );
        flag(
            "level_adds",
            Phase::Levels,
            "add",
            -d_i,
            "b-1 additions per product plus one mask XOR",
        );
        flag(
            "accumulate_mults",
            Phase::Accumulate,
            "multiply",
            -(d_i - 1),
            "balanced AND of d vectors takes d-1 multiplications",
        );
        if mode == ModelMode::Plaintext {
            // additions split differently once model operands are plaintext
            flags.retain(|f| f.op != "add" && f.op != "const_add");
        }
    }

    let mut relations = Vec::new();
    if shape.d == 0 {
        relations.push(Relation::new(
            "constant result",
            inference.ledger.counts.total() == 0,
            format!("{} operations", inference.ledger.counts.total()),
        ));
    } else {
        let rotates = total_measured.rotate;
        let expected_rotates = (shape.q + shape.d * shape.b) as i64;
        relations.push(Relation::new(
            "rotate total == q + d*b",
            rotates == expected_rotates,
            format!("{rotates} vs {expected_rotates}"),
        ));
        let b_i = shape.b;
        let levels_ok = inference
            .level_costs
            .iter()
            .all(|c| c.rotate == b_i && c.multiply() == b_i);
        relations.push(Relation::new(
            "per-level rotate == b and multiply == b",
            levels_ok,
            inference
                .level_costs
                .iter()
                .map(|c| format!("({},{})", c.rotate, c.multiply()))
                .collect::<Vec<_>>()
                .join(" "),
        ));
        let step = u32::from(mode == ModelMode::Encrypted);
        let reshuffle_depth = inference
            .phase(Phase::Reshuffle)
            .map_or(0, |p| p.output_depth);
        let levels_depth = inference.phase(Phase::Levels).map_or(0, |p| p.output_depth);
        relations.push(Relation::new(
            "matrix product adds depth 1 (0 for a plaintext model)",
            reshuffle_depth == comparison_depth + step && levels_depth == reshuffle_depth + step,
            format!("{comparison_depth} -> {reshuffle_depth} -> {levels_depth}"),
        ));
        let acc = measured_of(Phase::Accumulate).multiply;
        relations.push(Relation::new(
            "accumulate multiply == d-1",
            acc == d_i - 1,
            format!("{acc} vs {}", d_i - 1),
        ));
        let measured_cmp = inference.phase(Phase::Comparison).map(|p| p.counts);
        let (exact, _) = comparison_circuit(p, mode);
        relations.push(Relation::new(
            "comparison counts match the circuit",
            measured_cmp == Some(exact) && comparison_depth == circuit_depth,
            format!("depth {comparison_depth} vs {circuit_depth}"),
        ));
        relations.push(Relation::new(
            "comparison depth <= 2*lg(p)+1",
            u64::from(comparison_depth) <= forms.comparison_depth,
            format!("{comparison_depth} vs {}", forms.comparison_depth),
        ));
        relations.push(Relation::new(
            "depth <= 2*lg(p)+lg(d)+2",
            u64::from(depth.measured) <= depth.bound,
            format!("{} vs {}", depth.measured, depth.bound),
        ));
        if mode == ModelMode::Encrypted {
            let mismatched: Vec<&str> = flags
                .iter()
                .filter(|f| f.delta != f.expected_delta)
                .map(|f| f.name)
                .collect();
            relations.push(Relation::new(
                "flagged deltas are the documented ones",
                mismatched.is_empty(),
                if mismatched.is_empty() {
                    format!("{} flags", flags.len())
                } else {
                    mismatched.join(", ")
                },
            ));
        }
    }

    CostReport {
        mode,
        shape,
        depth,
        phases,
        total,
        flags,
        relations,
    }
}

/// Ledgers of the packed pipeline and the path-polynomial baseline over
/// repeated seeded queries.
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub reps: usize,
    pub seed: u64,
    /// Every repetition produced the same packed-pipeline ledger.
    pub deterministic: bool,
    pub packed: LedgerSnapshot,
    pub baseline: Option<LedgerSnapshot>,
    pub baseline_agrees: Option<bool>,
    pub cost: CostReport,
}

impl BenchReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("bench report serializes")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("at least one repetition is required")]
    NoReps,
}

/// Runs `reps` seeded queries; ledgers are per query.
pub fn bench(
    forest: &Forest,
    quantizer: Quantizer,
    cfg: &PartyConfig,
    reps: usize,
    seed: u64,
    with_baseline: bool,
) -> Result<BenchReport, BenchError> {
    if reps == 0 {
        return Err(BenchError::NoReps);
    }
    let model = compile(forest, quantizer)?;
    let poly = with_baseline
        .then(|| poly_compile(forest, quantizer))
        .transpose()?;
    let width = cfg.group_width(&model);
    let mut rng = synth::rng(seed);
    let mut first: Option<Inference> = None;
    let mut deterministic = true;
    let mut baseline: Option<LedgerSnapshot> = None;
    let mut agrees = true;
    for _ in 0..reps {
        let values = synth::random_query(&mut rng, forest, quantizer.precision);
        let query = encode_features(&values, model.meta.num_features, quantizer, width)?;
        let inf = infer(&model, &query, cfg)?;
        if let Some(poly) = &poly {
            let result = poly_eval(&Vm::new(), poly, &values, cfg.mode)?;
            let decoded = crate::runtime::decode(inf.labels.peek(), &model.codebook)?;
            agrees &= result.labels == decoded.labels;
            if let Some(prev) = baseline {
                deterministic &= prev == result.ledger;
            }
            baseline = Some(result.ledger);
        }
        match &first {
            None => first = Some(inf),
            Some(f) => deterministic &= f.ledger == inf.ledger,
        }
    }
    let first = first.expect("reps >= 1");
    Ok(BenchReport {
        reps,
        seed,
        deterministic,
        packed: first.ledger,
        baseline,
        baseline_agrees: poly.as_ref().map(|_| agrees),
        cost: report(&first),
    })
}

/// One micro model's counts, for trend checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MicroRow {
    pub name: &'static str,
    pub b: usize,
    pub d: usize,
    pub p: u32,
    pub comparison_mults: u64,
    pub level_mults: u64,
    pub total_mults: u64,
    pub depth: u32,
    pub depth_bound: u64,
}

impl MicroRow {
    /// Measured depth equals the bound or sits one below it.
    pub fn depth_within_one(&self) -> bool {
        let m = u64::from(self.depth);
        m <= self.depth_bound && self.depth_bound - m <= 1
    }
}

pub fn micro_row(spec: &MicroSpec, seed: u64, mode: ModelMode) -> Result<MicroRow, BenchError> {
    let forest = spec.build(seed);
    let quantizer = Quantizer::new(spec.precision, 0).expect("micro precision is valid");
    let model = compile(&forest, quantizer)?;
    let values = synth::random_query(&mut synth::rng(seed), &forest, spec.precision);
    let query = encode_features(
        &values,
        model.meta.num_features,
        quantizer,
        model.meta.group_width,
    )?;
    let inf = infer(&model, &query, &PartyConfig::new(mode))?;
    let mults = |phase| inf.phase(phase).map_or(0, |p| p.counts.multiply());
    Ok(MicroRow {
        name: spec.name,
        b: model.meta.branching,
        d: model.meta.depth,
        p: spec.precision,
        comparison_mults: mults(Phase::Comparison),
        level_mults: mults(Phase::Levels),
        total_mults: inf.ledger.counts.multiply(),
        depth: inf.ledger.max_depth,
        depth_bound: closed_forms(Shape::from(&inf.meta)).depth_bound,
    })
}

pub fn micro_sweep(seed: u64, mode: ModelMode) -> Result<Vec<MicroRow>, BenchError> {
    synth::MICRO_MODELS
        .iter()
        .map(|spec| micro_row(spec, seed, mode))
        .collect()
}

/// Count relations that mirror the runtime trends across the micro models.
pub fn trend_checks(rows: &[MicroRow]) -> Vec<Relation> {
    let row = |name: &str| rows.iter().find(|r| r.name == name);
    let mut out = Vec::new();

    let p8: Vec<&MicroRow> = rows.iter().filter(|r| r.p == 8).collect();
    if let Some(first) = p8.first() {
        let constant = p8
            .iter()
            .all(|r| r.comparison_mults == first.comparison_mults);
        out.push(Relation::new(
            "comparison mults constant in b at p=8",
            constant,
            p8.iter()
                .map(|r| format!("b={}:{}", r.b, r.comparison_mults))
                .collect::<Vec<_>>()
                .join(" "),
        ));
    }

    if let (Some(a), Some(m), Some(c)) = (row("width55"), row("width78"), row("width677")) {
        let slope = (c.level_mults as f64 - a.level_mults as f64) / (c.b as f64 - a.b as f64);
        let at = |r: &MicroRow| a.level_mults as f64 + slope * (r.b as f64 - a.b as f64);
        let through_origin = |r: &MicroRow| r.b as f64 * a.level_mults as f64 / a.b as f64;
        let linear = [a, m, c].iter().all(|r| {
            (r.level_mults as f64 - at(r)).abs() <= 1.0
                && (r.level_mults as f64 - through_origin(r)).abs() <= 1.0
        });
        out.push(Relation::new(
            "level mults linear in b within 1",
            linear,
            format!(
                "b={}:{} b={}:{} b={}:{}",
                a.b, a.level_mults, m.b, m.level_mults, c.b, c.level_mults
            ),
        ));
    }

    if let (Some(lo), Some(hi)) = (row("prec8"), row("prec16")) {
        let ratio = hi.comparison_mults as f64 / lo.comparison_mults as f64;
        out.push(Relation::new(
            "comparison mults superlinear in p",
            ratio > 2.0,
            format!(
                "{} / {} = {ratio:.2}",
                hi.comparison_mults, lo.comparison_mults
            ),
        ));
    }
    out
}

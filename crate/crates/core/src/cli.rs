//! Command-line driver: `compile`, `infer`, `check` and `bench`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::cost::{self, BenchError};
use crate::forest::{parse_forest, Forest, ParseError};
use crate::manifest::{self, ManifestError};
use crate::runtime::{
    self, count_mismatches, decode, encode_features, infer, ModelMode, PartyConfig, ResultDocument,
    RuntimeError,
};
use crate::staging::{compile, QuantizeError, Quantizer, StageError};
use crate::synth;

#[derive(Debug, Parser)]
#[command(
    name = "packed-forest",
    version,
    about = "Packed decision-forest inference on a simulated SIMD machine"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stage a `.forest` model into a `.copse` manifest.
    Compile {
        forest: PathBuf,
        /// Output path; defaults to the input with a `.copse` extension.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        encoding: Encoding,
    },
    /// Evaluate one query against a manifest and print the result document.
    Infer {
        model: PathBuf,
        query: PathBuf,
        #[command(flatten)]
        party: Party,
    },
    /// Compare the packed pipeline with the traversal oracle.
    Check {
        /// A `.forest` file or a directory of them.
        path: Option<PathBuf>,
        /// Evaluate this manifest instead of compiling the forest.
        #[arg(long, requires = "path")]
        manifest: Option<PathBuf>,
        /// Check this many seeded random forests instead.
        #[arg(long, conflicts_with = "path")]
        random: Option<usize>,
        #[arg(long, default_value_t = 50)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        encoding: Encoding,
        #[command(flatten)]
        party: Party,
    },
    /// Cost report over repeated queries, optionally against the baseline.
    Bench {
        /// Forest to measure; omit with `--micro`.
        forest: Option<PathBuf>,
        #[arg(long)]
        baseline: bool,
        /// Sweep the built-in micro models and check the scaling trends.
        #[arg(long, conflicts_with = "forest")]
        micro: bool,
        #[arg(long, default_value_t = 27)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[command(flatten)]
        encoding: Encoding,
        #[command(flatten)]
        party: Party,
    },
}

#[derive(Debug, Clone, Copy, Args)]
pub struct Encoding {
    #[arg(long, default_value_t = 8)]
    pub precision: u32,
    #[arg(long, default_value_t = 0)]
    pub frac_bits: u32,
}

impl Encoding {
    fn quantizer(&self) -> Result<Quantizer, CliError> {
        Ok(Quantizer::new(self.precision, self.frac_bits)?)
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct Party {
    #[arg(long, value_enum, default_value_t = ModeArg::Encrypted)]
    pub mode: ModeArg,
    /// Declared bound on the maximum multiplicity (padding).
    #[arg(long)]
    pub kdeclared: Option<usize>,
    /// Fail when ciphertext depth would exceed this.
    #[arg(long)]
    pub max_depth: Option<u32>,
}

impl Party {
    fn config(&self) -> PartyConfig {
        PartyConfig {
            mode: match self.mode {
                ModeArg::Encrypted => ModelMode::Encrypted,
                ModeArg::Plaintext => ModelMode::Plaintext,
            },
            k_declared: self.kdeclared,
            max_depth: self.max_depth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Encrypted,
    Plaintext,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Toml,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Quantize(#[from] QuantizeError),
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    CheckFailed(String),
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Stage(e) => CliError::Stage(e),
            BenchError::Runtime(e) => CliError::Runtime(e),
            BenchError::NoReps => CliError::Usage(e.to_string()),
        }
    }
}

impl CliError {
    /// 1 check failure, 2 input error, 3 depth budget exceeded.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Runtime(e) if e.is_depth_budget() => 3,
            _ => 2,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_forest(path: &Path) -> Result<Forest, CliError> {
    parse_forest(&read(path)?).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs one command, writing its report to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let stdout = PathBuf::from("<stdout>");
    match cli.command {
        Command::Compile {
            forest,
            output,
            encoding,
        } => {
            let model = compile(&load_forest(&forest)?, encoding.quantizer()?)?;
            let output = output.unwrap_or_else(|| forest.with_extension(manifest::EXTENSION));
            manifest::write(&output, &model)?;
            let m = &model.meta;
            writeln!(
                out,
                "wrote {} (b={} d={} K={} q={} p={})",
                output.display(),
                m.branching,
                m.depth,
                m.max_multiplicity,
                m.quantized_branching,
                m.precision
            )
            .map_err(io_err(&stdout))?;
        }
        Command::Infer {
            model,
            query,
            party,
        } => {
            let model = manifest::read(&model)?;
            let entries = runtime::parse_query(&read(&query)?)?;
            let values = runtime::query_values(&entries, model.meta.num_features)?;
            let cfg = party.config();
            let encoded = encode_features(
                &values,
                model.meta.num_features,
                model.quantizer(),
                cfg.group_width(&model),
            )?;
            let result = infer(&model, &encoded, &cfg)?;
            // the data owner decrypts and decodes
            let bits = result.labels.peek().clone();
            let decoded = decode(&bits, &model.codebook)?;
            let doc = ResultDocument::new(&result, bits, &decoded, &model.codebook);
            write!(out, "{}", doc.to_toml()).map_err(io_err(&stdout))?;
        }
        Command::Check {
            path,
            manifest: manifest_path,
            random,
            queries,
            seed,
            encoding,
            party,
        } => {
            let cfg = party.config();
            let (passed, total) = match (path, random) {
                (_, Some(n)) => check_random(n, queries, seed, &cfg)?,
                (Some(path), None) => {
                    let forests = forest_paths(&path)?;
                    let quantizer = encoding.quantizer()?;
                    let mut passed = 0;
                    for (i, fp) in forests.iter().enumerate() {
                        let forest = load_forest(fp)?;
                        let model = match &manifest_path {
                            Some(m) => manifest::read(m)?,
                            None => compile(&forest, quantizer)?,
                        };
                        let mut rng = synth::rng(seed.wrapping_add(i as u64));
                        let qs: Vec<Vec<f64>> = (0..queries)
                            .map(|_| synth::random_query(&mut rng, &forest, model.meta.precision))
                            .collect();
                        let bad = count_mismatches(&forest, &model, &cfg, &qs)?;
                        if bad > 0 {
                            writeln!(out, "{}: {bad}/{queries} queries differ", fp.display())
                                .map_err(io_err(&stdout))?;
                        } else {
                            passed += 1;
                        }
                    }
                    (passed, forests.len())
                }
                (None, None) => {
                    return Err(CliError::Usage("check needs a path or --random N".into()))
                }
            };
            let line = format!("{passed}/{total} match");
            writeln!(out, "{line}").map_err(io_err(&stdout))?;
            if passed != total {
                return Err(CliError::CheckFailed(line));
            }
        }
        Command::Bench {
            forest,
            baseline,
            micro,
            reps,
            seed,
            format,
            encoding,
            party,
        } => {
            let cfg = party.config();
            let ok = if micro {
                let rows = cost::micro_sweep(seed, cfg.mode)?;
                let trends = cost::trend_checks(&rows);
                match format {
                    Format::Toml => {
                        #[derive(serde::Serialize)]
                        struct Sweep<'a> {
                            rows: &'a [cost::MicroRow],
                            trends: &'a [cost::Relation],
                        }
                        let doc = Sweep {
                            rows: &rows,
                            trends: &trends,
                        };
                        write!(out, "{}", toml::to_string(&doc).expect("sweep serializes"))
                    }
                    Format::Text => {
                        let mut text = format!(
                            "{:<10} {:>3} {:>2} {:>3} {:>8} {:>8} {:>8} {:>6}\n",
                            "model", "b", "d", "p", "cmp_mul", "lvl_mul", "all_mul", "depth"
                        );
                        for r in &rows {
                            text += &format!(
                                "{:<10} {:>3} {:>2} {:>3} {:>8} {:>8} {:>8} {:>3}/{:<2}\n",
                                r.name,
                                r.b,
                                r.d,
                                r.p,
                                r.comparison_mults,
                                r.level_mults,
                                r.total_mults,
                                r.depth,
                                r.depth_bound
                            );
                        }
                        for t in &trends {
                            text += &format!(
                                "[{}] {}: {}\n",
                                if t.holds { "ok" } else { "FAIL" },
                                t.name,
                                t.detail
                            );
                        }
                        write!(out, "{text}")
                    }
                }
                .map_err(io_err(&stdout))?;
                trends.iter().all(|t| t.holds)
            } else {
                let path = forest
                    .ok_or_else(|| CliError::Usage("bench needs a forest or --micro".into()))?;
                let forest = load_forest(&path)?;
                let report =
                    cost::bench(&forest, encoding.quantizer()?, &cfg, reps, seed, baseline)?;
                match format {
                    Format::Toml => write!(out, "{}", report.to_toml()),
                    Format::Text => {
                        let mut text = format!(
                            "{} repetitions, seed {}, deterministic: {}\n",
                            report.reps, report.seed, report.deterministic
                        );
                        text += &format!("packed   {}\n", report.packed);
                        if let Some(b) = &report.baseline {
                            text += &format!("baseline {b}\n");
                            text += &format!(
                                "baseline labels agree: {}\n",
                                report.baseline_agrees == Some(true)
                            );
                        }
                        text += &report.cost.to_string();
                        write!(out, "{text}")
                    }
                }
                .map_err(io_err(&stdout))?;
                report.cost.passed()
                    && report.deterministic
                    && report.baseline_agrees != Some(false)
            };
            if !ok {
                return Err(CliError::CheckFailed("asserted relation failed".into()));
            }
        }
    }
    Ok(())
}

fn forest_paths(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(path)
        .map_err(io_err(path))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "forest"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Usage(format!(
            "no .forest files in {}",
            path.display()
        )));
    }
    Ok(paths)
}

/// Precisions cycled through by random checks.
pub const CHECK_PRECISIONS: [u32; 3] = [4, 8, 16];

/// Seeded random forest `index` of a check run, with its precision.
pub fn random_case(seed: u64, index: usize) -> (Forest, Quantizer, rand_chacha::ChaCha8Rng) {
    let precision = CHECK_PRECISIONS[index % CHECK_PRECISIONS.len()];
    let mut rng = synth::rng(
        seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(index as u64),
    );
    let shape = synth::ForestShape::default().with_precision(precision);
    let forest = synth::random_forest(&mut rng, &shape);
    (
        forest,
        Quantizer::new(precision, 0).expect("valid precision"),
        rng,
    )
}

fn check_random(
    n: usize,
    queries: usize,
    seed: u64,
    cfg: &PartyConfig,
) -> Result<(usize, usize), CliError> {
    let outcomes: Vec<Result<bool, CliError>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (forest, quantizer, mut rng) = random_case(seed, i);
            let model = compile(&forest, quantizer)?;
            let qs: Vec<Vec<f64>> = (0..queries)
                .map(|_| synth::random_query(&mut rng, &forest, quantizer.precision))
                .collect();
            let cfg = PartyConfig {
                k_declared: cfg.k_declared.map(|k| k.max(model.meta.max_multiplicity)),
                ..*cfg
            };
            Ok(count_mismatches(&forest, &model, &cfg, &qs)? == 0)
        })
        .collect();
    let mut passed = 0;
    for outcome in outcomes {
        passed += usize::from(outcome?);
    }
    Ok((passed, n))
}

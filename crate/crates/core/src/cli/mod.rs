//! The `sepkit` command line.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input or parameters,
//! 3 vacuous bound. Every output file carries a provenance block (tool
//! version, argument vector, seed) so it can be traced to the invocation
//! that produced it; outputs contain no timestamps, so reruns compare equal.

mod baseline;
pub mod io;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{effective_dimension, BaselineError};
use crate::corrector::{self, Cascade, CorrectorError, SavedCorrector};
use crate::dataset::{ingest_csv, write_csv, DataMatrix, DatasetError, LabeledDataset};
use crate::montecarlo::{self, Event, MonteCarloError, SamplerSpec, TheoremCase};
use crate::preprocess::{PreprocessConfig, PreprocessError, PreprocessModel, SelectionRule};
use crate::separability::{separability_report, SeparabilityError, DEFAULT_ALPHAS};

use io::{json_with_provenance, parse_real_list, read_json, write_output, Provenance};

pub use baseline::BaselineCmd;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Vacuous(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Vacuous(_) => 3,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::MissingFile(_) | DatasetError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> Self {
        match e {
            PreprocessError::Dataset(d) => d.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<SeparabilityError> for CliError {
    fn from(e: SeparabilityError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<MonteCarloError> for CliError {
    fn from(e: MonteCarloError) -> Self {
        match e {
            MonteCarloError::VacuousBound(_) => CliError::Vacuous(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<CorrectorError> for CliError {
    fn from(e: CorrectorError) -> Self {
        match e {
            CorrectorError::Preprocess(p) => p.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sepkit", version, about = "Fisher-separability analysis of high-dimensional point clouds")]
pub struct Cli {
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true, env = "SEPKIT_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit centering, PCA and whitening; write the model and transformed data
    Preprocess(PreprocessArgs),
    /// Per-threshold separability report of a point cloud
    Separability(SeparabilityArgs),
    /// Analytic formulas and theorem bounds
    #[command(subcommand)]
    Baseline(BaselineCmd),
    /// Monte Carlo check of a theorem bound
    Simulate(SimulateArgs),
    /// Train, apply and evaluate correctors
    #[command(subcommand)]
    Corrector(CorrectorCmd),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Input CSV with a header row
    #[arg(long)]
    pub input: PathBuf,
    /// Column holding class labels (excluded from the features)
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Project the whitened points onto the unit sphere
    #[arg(long)]
    pub sphere: bool,
    /// Skip the division by sqrt(eigenvalue)
    #[arg(long)]
    pub no_whiten: bool,
    /// Keep components with eigenvalue >= fraction * largest
    #[arg(long, default_value_t = 0.1, conflicts_with_all = ["components", "all_components"])]
    pub fraction: f64,
    /// Keep this many leading components
    #[arg(long)]
    pub components: Option<usize>,
    /// Keep every numerically nonzero component
    #[arg(long)]
    pub all_components: bool,
    #[arg(long)]
    pub out_model: PathBuf,
    #[arg(long)]
    pub out_data: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct SeparabilityArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Thresholds: list and/or start:stop:step ranges
    #[arg(long)]
    pub alphas: Option<String>,
    /// Scale every point to unit length first
    #[arg(long)]
    pub sphere: bool,
    /// Add the sphere-formula effective dimension per threshold
    #[arg(long)]
    pub effective_dimension: bool,
    /// Output format (default: from the --out extension, else JSON)
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum TheoremId {
    #[value(alias = "ball-single")]
    BallSingle,
    #[value(alias = "ball-pairs")]
    BallPairs,
    #[value(alias = "cube-pairs")]
    CubePairs,
    Noisy,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Theorem to verify
    #[arg(long, value_enum, required_unless_present = "spec")]
    pub theorem: Option<TheoremId>,
    /// JSON experiment spec (sampler, M, event, trials) instead of a theorem
    #[arg(long, conflicts_with = "theorem")]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long = "M", visible_alias = "m")]
    pub m: Option<u64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Per-coordinate density bound of the cube distribution
    #[arg(long, default_value_t = 1.0)]
    pub density_bound: f64,
    /// Dimension of the subspace holding the perturbed-cluster centers
    #[arg(long, default_value_t = 3)]
    pub subspace_dim: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Contents of a `simulate --spec` file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub sampler: SamplerSpec,
    #[serde(rename = "M")]
    pub m: usize,
    pub event: Event,
    pub trials: u64,
}

#[derive(Debug, Subcommand)]
pub enum CorrectorCmd {
    /// Train a corrector from a correct-behaviour cloud and error points
    Train(TrainArgs),
    /// Flag every row of a CSV with a corrector or cascade
    Flag(FlagArgs),
    /// Detection and damage rates on held-out data
    Eval(EvalArgs),
    /// Chain correctors (or cascades) into one cascade, in the given order
    Cascade(CascadeArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub cloud: PathBuf,
    #[arg(long)]
    pub errors: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub alpha: f64,
    /// Column to drop from both inputs (e.g. labels)
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FlagArgs {
    /// Corrector or cascade JSON
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Held-out correct-behaviour points
    #[arg(long)]
    pub correct: PathBuf,
    /// Held-out error points
    #[arg(long)]
    pub errors: PathBuf,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CascadeArgs {
    /// Corrector or cascade files, first stage first
    #[arg(long, num_args = 1.., required = true)]
    pub stages: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn delimiter_byte(c: char) -> Result<u8, CliError> {
    u8::try_from(c)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| CliError::Validation(format!("delimiter '{c}' is not a single ASCII character")))
}

fn load(path: &Path, label_column: Option<&str>, delimiter: char) -> Result<LabeledDataset, CliError> {
    Ok(ingest_csv(path, label_column, delimiter_byte(delimiter)?)?)
}

fn cmd_preprocess(a: &PreprocessArgs, prov: &Provenance) -> Result<(), CliError> {
    let ds = load(&a.input.input, a.input.label_column.as_deref(), a.input.delimiter)?;
    let selection = if let Some(count) = a.components {
        SelectionRule::FixedCount { count }
    } else if a.all_components {
        SelectionRule::AllNonzero
    } else {
        SelectionRule::RelativeEigenvalue { fraction: a.fraction }
    };
    let config = PreprocessConfig {
        selection,
        whiten: !a.no_whiten,
        sphere_project: a.sphere,
    };
    let model = PreprocessModel::fit(&ds.data, &config).map_err(|e| match e {
        PreprocessError::ZeroVarianceFeature { index } => CliError::Validation(format!(
            "column '{}' is constant (zero variance)",
            ds.feature_names.get(index).map(String::as_str).unwrap_or("?")
        )),
        other => other.into(),
    })?;
    let transformed = model.transform(&ds.data)?;
    let names = (1..=model.output_dim()).map(|i| format!("pc{i}")).collect();
    let out_ds = ds.map_data(transformed, names)?;
    let mut csv_buf = Vec::new();
    write_csv(&out_ds, &mut csv_buf, delimiter_byte(a.input.delimiter)?)?;
    let csv_text = prov.csv_header() + &String::from_utf8(csv_buf).expect("csv output is UTF-8");

    write_output(Some(&a.out_model), &json_with_provenance(&model, prov)?)?;
    write_output(Some(&a.out_data), &csv_text)?;

    let explained = model.explained_variance();
    println!("k_selected={}", model.k_selected);
    println!("condition_number={:.6}", model.condition_number());
    println!(
        "explained_variance={:.6}",
        explained.last().copied().unwrap_or(0.0)
    );
    Ok(())
}

fn cmd_separability(a: &SeparabilityArgs, prov: &Provenance) -> Result<(), CliError> {
    let ds = load(&a.input.input, a.input.label_column.as_deref(), a.input.delimiter)?;
    let alphas = match &a.alphas {
        Some(s) => parse_real_list(s)?,
        None => DEFAULT_ALPHAS.to_vec(),
    };
    let mut report = separability_report(&ds, &alphas, a.sphere)?;
    if a.effective_dimension {
        for row in &mut report.rows {
            row.effective_dimension = effective_dimension(row.mean_p_y, row.alpha).ok().map(|d| d.n);
            row.effective_dimension_star = row
                .mean_p_y_star
                .and_then(|p| effective_dimension(p, row.alpha).ok())
                .map(|d| d.n);
        }
    }
    let format = a.format.unwrap_or_else(|| match a.out.as_ref().and_then(|p| p.extension()) {
        Some(ext) if ext == "csv" => Format::Csv,
        _ => Format::Json,
    });
    let text = match format {
        Format::Json => json_with_provenance(&report, prov)?,
        Format::Csv => prov.csv_header() + &report.to_csv(),
    };
    write_output(a.out.as_deref(), &text)
}

fn need<T>(v: Option<T>, flag: &str, theorem: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Validation(format!("--{flag} is required for {theorem}")))
}

fn theorem_case(a: &SimulateArgs, id: TheoremId) -> Result<TheoremCase, CliError> {
    let name = format!("{id:?}");
    let n = need(a.n, "n", &name)?;
    let m = need(a.m, "M", &name)?;
    Ok(match id {
        TheoremId::BallSingle => TheoremCase::BallSingle { n, m, r: need(a.r, "r", &name)? },
        TheoremId::BallPairs => TheoremCase::BallPairs { n, m, r: need(a.r, "r", &name)? },
        TheoremId::CubePairs => TheoremCase::CubePairs {
            n,
            m,
            delta: need(a.delta, "delta", &name)?,
            density_bound: a.density_bound,
        },
        TheoremId::Noisy => TheoremCase::Noisy {
            n,
            m,
            epsilon: need(a.epsilon, "epsilon", &name)?,
            delta: need(a.delta, "delta", &name)?,
            subspace_dim: a.subspace_dim,
        },
    })
}

#[derive(Serialize)]
struct SimulationOutput<'a> {
    case: &'a TheoremCase,
    #[serde(flatten)]
    verification: montecarlo::Verification,
}

fn cmd_simulate(a: &SimulateArgs, argv: &[String]) -> Result<(), CliError> {
    if a.trials == 0 {
        return Err(CliError::Validation("--trials must be at least 1".into()));
    }
    if let Some(path) = &a.spec {
        let spec: ExperimentSpec = read_json(path)?;
        let prov = Provenance::new(argv, Some(spec.sampler.seed));
        let result = montecarlo::estimate_event(&spec.sampler, spec.m, spec.event, spec.trials)?;
        eprintln!("wall_time_s={:.3}", result.wall_time);
        return write_output(a.out.as_deref(), &json_with_provenance(&result, &prov)?);
    }
    let id = a.theorem.expect("clap enforces --theorem or --spec");
    let case = theorem_case(a, id)?;
    let prov = Provenance::new(argv, Some(a.seed));
    let verification = montecarlo::verify_bound(&case, a.trials, a.seed)?;
    eprintln!("wall_time_s={:.3}", verification.result.wall_time);
    let pass = verification.pass;
    let out = SimulationOutput { case: &case, verification };
    write_output(a.out.as_deref(), &json_with_provenance(&out, &prov)?)?;
    if !pass {
        log::warn!("empirical rate fell below the bound minus three standard deviations");
    }
    Ok(())
}

fn load_matrix(path: &Path, label_column: Option<&str>, delimiter: char) -> Result<DataMatrix, CliError> {
    Ok(load(path, label_column, delimiter)?.data)
}

fn load_cascade(path: &Path) -> Result<Cascade, CliError> {
    let saved: SavedCorrector = read_json(path)?;
    Ok(saved.into_cascade())
}

#[derive(Serialize)]
struct EvalOutput {
    #[serde(flatten)]
    eval: corrector::CorrectorEval,
    stages: usize,
}

fn cmd_corrector(cmd: &CorrectorCmd, prov: &Provenance) -> Result<(), CliError> {
    match cmd {
        CorrectorCmd::Train(a) => {
            let cloud = load_matrix(&a.cloud, a.label_column.as_deref(), a.delimiter)?;
            let errors = load_matrix(&a.errors, a.label_column.as_deref(), a.delimiter)?;
            let c = corrector::train_corrector(&cloud, &errors, a.alpha)?;
            write_output(Some(&a.out), &json_with_provenance(&c, prov)?)
        }
        CorrectorCmd::Flag(a) => {
            let cascade = load_cascade(&a.model)?;
            let data = load_matrix(&a.input, a.label_column.as_deref(), a.delimiter)?;
            let mut s = prov.csv_header() + "row,flagged,stage\n";
            for (i, x) in data.rows().enumerate() {
                let d = cascade.apply(x)?;
                let stage = d.stage.map(|v| v.to_string()).unwrap_or_default();
                s += &format!("{i},{},{stage}\n", d.flagged);
            }
            write_output(a.out.as_deref(), &s)
        }
        CorrectorCmd::Eval(a) => {
            let cascade = load_cascade(&a.model)?;
            let correct = load_matrix(&a.correct, a.label_column.as_deref(), a.delimiter)?;
            let errors = load_matrix(&a.errors, a.label_column.as_deref(), a.delimiter)?;
            let eval = corrector::evaluate(&cascade, &correct, &errors)?;
            let out = EvalOutput { eval, stages: cascade.correctors.len() };
            write_output(a.out.as_deref(), &json_with_provenance(&out, prov)?)
        }
        CorrectorCmd::Cascade(a) => {
            let mut cascade = Cascade::default();
            for path in &a.stages {
                for c in load_cascade(path)?.correctors {
                    cascade.push(c);
                }
            }
            write_output(Some(&a.out), &json_with_provenance(&cascade, prov)?)
        }
    }
}

fn dispatch(cli: &Cli, argv: &[String]) -> Result<(), CliError> {
    let prov = Provenance::new(argv, None);
    match &cli.command {
        Command::Preprocess(a) => cmd_preprocess(a, &prov),
        Command::Separability(a) => cmd_separability(a, &prov),
        Command::Baseline(b) => baseline::run(b, &prov),
        Command::Simulate(a) => cmd_simulate(a, argv),
        Command::Corrector(c) => cmd_corrector(c, &prov),
    }
}

/// Parses `argv` and runs the command on a pool of the requested size.
pub fn run(argv: Vec<String>) -> Result<(), CliError> {
    let cli = Cli::try_parse_from(&argv).map_err(|e| {
        if e.use_stderr() {
            CliError::Validation(e.to_string())
        } else {
            // --help and --version
            print!("{e}");
            CliError::Io(String::new())
        }
    });
    let cli = match cli {
        Ok(c) => c,
        Err(CliError::Io(msg)) if msg.is_empty() => return Ok(()),
        Err(e) => return Err(e),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&cli, &argv))
}

/// Entry point for the binary; returns the process exit code.
pub fn main() -> i32 {
    match run(std::env::args().collect()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("sepkit: {e}");
            e.exit_code()
        }
    }
}

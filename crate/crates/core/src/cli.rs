//! Command-line experiment runner behind the `holdline` binary.
//!
//! Every command writes into an output directory (`--out`, or `HOLDLINE_OUT`,
//! or `./out`) together with `metadata.json` recording the full command
//! specification and seed, and `line.toml` with the exact line that was run.

use std::ffi::OsString;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::adp::{checkpoint, train_with_progress, AdpError, Policy};
use crate::control::Scheme;
use crate::experiment::{evaluation_seeds, ExperimentError, SchemeSetup};
use crate::metrics::{Comparison, RunReport, SchemeSummary};
use crate::model::{builtin_line, ActionSet, BusLineConfig, CostCoefficient, HyperParams, BUILTIN_LINES};
use crate::simulator::{export, Simulation};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

#[derive(Debug, Parser, Serialize)]
#[command(name = "holdline", version, about = "Bus-line holding simulator and look-ahead Q-learning controller")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Run one episode and export stages, passengers, trajectories and reports.
    Simulate(SimulateArgs),
    /// Train a Q-learning policy; writes policy.txt and trace.csv.
    Train(TrainArgs),
    /// Greedy evaluation of one scheme over several seeds.
    Evaluate(EvaluateArgs),
    /// Side-by-side stability and service tables for several schemes.
    Compare(CompareArgs),
    /// Write a line configuration as TOML.
    ExportLine(ExportLineArgs),
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct LineArgs {
    /// Builtin line (L1..L5) or path to a TOML line file.
    #[arg(long, default_value = "L5")]
    pub line: String,
    /// Use this action set (e.g. A2x5, A5x4) at every stop.
    #[arg(long = "action-set")]
    pub action_set: Option<String>,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = "HOLDLINE_OUT", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct SchemeArgs {
    /// NC, SP, TP, OQL or QL<n>S.
    #[arg(long, default_value = "NC")]
    pub scheme: String,
    /// Control stops of SP/TP, 1-based and comma separated (default 1; 1 and 1+n/2).
    #[arg(long, value_delimiter = ',')]
    pub stops: Vec<usize>,
    /// Policy checkpoint for Q-learning schemes.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub line: LineArgs,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct HyperArgs {
    /// Look-ahead depth; defaults to the depth in the scheme name.
    #[arg(long)]
    pub lookahead: Option<usize>,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Initial exploration probability.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Per-episode decrease of the exploration probability.
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Initial learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Reference headway in the action cost: dch or esh.
    #[arg(long)]
    pub coefficient: Option<String>,
    /// Divisor of the holding cost; default n_B times the squared expected headway.
    #[arg(long = "cost-scale")]
    pub cost_scale: Option<f64>,
    /// Stop training when any network weight exceeds this magnitude.
    #[arg(long = "divergence-bound")]
    pub divergence_bound: Option<f64>,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct TrainArgs {
    #[command(flatten)]
    pub line: LineArgs,
    /// Q-learning scheme (OQL or QL<n>S).
    #[arg(long, default_value = "QL3S")]
    pub scheme: String,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Print one line per episode to stderr.
    #[arg(long)]
    pub progress: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub line: LineArgs,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    #[arg(long, default_value_t = 50)]
    pub runs: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct CompareArgs {
    /// Summaries written by `evaluate` (reports.json); when given, nothing is simulated.
    #[arg(long, value_delimiter = ',')]
    pub reports: Vec<PathBuf>,
    #[command(flatten)]
    pub line: LineArgs,
    /// Schemes to run, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "NC,SP,TP")]
    pub schemes: Vec<String>,
    /// Checkpoint per Q-learning scheme, as SCHEME=PATH; repeatable.
    #[arg(long)]
    pub checkpoint: Vec<String>,
    /// Control stops of SP/TP, 1-based.
    #[arg(long, value_delimiter = ',')]
    pub stops: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub runs: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct ExportLineArgs {
    #[command(flatten)]
    pub line: LineArgs,
    /// Destination file; `-` writes to stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Divergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Divergence(_) => EXIT_DIVERGENCE,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Divergence(m) => m,
        }
    }
}

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

impl From<AdpError> for CliError {
    fn from(e: AdpError) -> Self {
        match e {
            AdpError::Diverged { .. } => CliError::Divergence(e.to_string()),
            other => validation(other),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Adp(inner) => inner.into(),
            other => validation(other),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => simulate(a, cli),
        Command::Train(a) => train(a, cli),
        Command::Evaluate(a) => evaluate(a, cli),
        Command::Compare(a) => compare(a, cli),
        Command::ExportLine(a) => export_line(a),
    }
}

pub fn load_line(args: &LineArgs) -> Result<BusLineConfig, CliError> {
    let mut config = if BUILTIN_LINES.iter().any(|n| n.eq_ignore_ascii_case(&args.line)) {
        builtin_line(&args.line).map_err(validation)?
    } else {
        BusLineConfig::load(&args.line).map_err(validation)?
    };
    if let Some(name) = &args.action_set {
        let set = ActionSet::parse(name).ok_or_else(|| CliError::Usage(format!("bad action set {name:?} (expected e.g. A2x5)")))?;
        config = config.with_uniform_action_set(set);
        config.validate().map_err(validation)?;
    }
    Ok(config)
}

fn parse_scheme(name: &str) -> Result<Scheme, CliError> {
    name.parse().map_err(CliError::Usage)
}

fn zero_based(stops: &[usize]) -> Result<Vec<usize>, CliError> {
    stops
        .iter()
        .map(|&s| s.checked_sub(1).ok_or_else(|| CliError::Usage("stop ids are 1-based".into())))
        .collect()
}

fn load_policy(path: &Path, sim: &Simulation) -> Result<Policy, CliError> {
    let policy = checkpoint::load(path).map_err(|e| validation(format!("{}: {e}", path.display())))?;
    policy.check_fits(sim)?;
    Ok(policy)
}

fn setup(scheme: Scheme, stops: &[usize], checkpoint: Option<&Path>, sim: &Simulation) -> Result<SchemeSetup, CliError> {
    let mut s = SchemeSetup::new(scheme).with_stops(zero_based(stops)?);
    if scheme.is_learning() {
        let path = checkpoint.ok_or_else(|| CliError::Usage(format!("scheme {scheme} needs --checkpoint")))?;
        let policy = load_policy(path, sim)?;
        if let Scheme::QLearning { lookahead } = scheme {
            if policy.lookahead != lookahead {
                return Err(validation(format!(
                    "checkpoint was trained with look-ahead {}, scheme {scheme} asks for {lookahead}",
                    policy.lookahead
                )));
            }
        }
        s = s.with_policy(policy);
    }
    Ok(s)
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| validation(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| validation(format!("cannot write {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| validation(format!("cannot write {}: {e}", path.display())))
}

fn json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    line: &'a str,
    line_fingerprint: &'a str,
    seed: u64,
    spec: &'a Cli,
    #[serde(skip_serializing_if = "Option::is_none")]
    hyper: Option<&'a HyperParams>,
}

fn write_metadata(dir: &Path, cli: &Cli, sim: &Simulation, seed: u64, hyper: Option<&HyperParams>) -> Result<(), CliError> {
    let meta = Metadata {
        tool: "holdline",
        version: env!("CARGO_PKG_VERSION"),
        line: &sim.config().name,
        line_fingerprint: sim.fingerprint(),
        seed,
        spec: cli,
        hyper,
    };
    write_file(&dir.join("metadata.json"), json(&meta))?;
    write_file(&dir.join("line.toml"), sim.config().to_toml_string())
}

fn simulation(config: BusLineConfig) -> Result<Simulation, CliError> {
    Simulation::new(config).map_err(validation)
}

fn simulate(a: &SimulateArgs, cli: &Cli) -> Result<(), CliError> {
    let sim = simulation(load_line(&a.line)?)?;
    let scheme = parse_scheme(&a.scheme.scheme)?;
    let setup = setup(scheme, &a.scheme.stops, a.scheme.checkpoint.as_deref(), &sim)?;
    let mut controller = setup.controller(&sim)?;
    let log = sim.run(controller.as_mut(), a.seed).map_err(validation)?;
    let report = RunReport::from_log(&log).map_err(validation)?;

    let dir = &a.out.out;
    prepare_out(dir)?;
    export::write_episode(&log, dir).map_err(validation)?;
    write_file(&dir.join("reports.json"), json(&report))?;
    write_metadata(dir, cli, &sim, a.seed, None)
}

pub fn hyper_from(args: &HyperArgs, scheme: Scheme, seed: u64) -> Result<HyperParams, CliError> {
    let Scheme::QLearning { lookahead } = scheme else {
        return Err(CliError::Usage(format!("scheme {scheme} does not learn; use OQL or QL<n>S")));
    };
    let mut h = HyperParams { lookahead, seed, ..HyperParams::default() };
    if let Some(v) = args.lookahead {
        h.lookahead = v;
    }
    if let Some(v) = args.episodes {
        h.episodes = v;
    }
    if let Some(v) = args.epsilon {
        h.epsilon0 = v;
    }
    if let Some(v) = args.xi {
        h.xi = v;
    }
    if let Some(v) = args.gamma {
        h.gamma = v;
    }
    if let Some(v) = args.lr {
        h.learning_rate = v;
    }
    if let Some(c) = &args.coefficient {
        h.coefficient = c.parse::<CostCoefficient>().map_err(CliError::Usage)?;
    }
    if args.cost_scale.is_some() {
        h.cost_scale = args.cost_scale;
    }
    if let Some(v) = args.divergence_bound {
        h.divergence_bound = v;
    }
    h.validate().map_err(validation)?;
    Ok(h)
}

fn train(a: &TrainArgs, cli: &Cli) -> Result<(), CliError> {
    let sim = simulation(load_line(&a.line)?)?;
    let hyper = hyper_from(&a.hyper, parse_scheme(&a.scheme)?, a.seed)?;
    let dir = &a.out.out;
    prepare_out(dir)?;
    let mut progress = |row: &crate::adp::TraceRow| {
        if a.progress {
            eprintln!("episode {:>4}  epsilon {:.3}  fsi {:8.2}  a_sigma {:7.0}", row.episode, row.epsilon, row.fsi, row.a_sigma);
        }
    };
    let trained = train_with_progress(&sim, &hyper, &mut progress)?;
    write_file(&dir.join("policy.txt"), checkpoint::to_string(&trained.policy))?;
    trained.trace.write_csv(create(&dir.join("trace.csv"))?).map_err(validation)?;
    write_metadata(dir, cli, &sim, a.seed, Some(&hyper))
}

#[derive(Serialize, serde::Deserialize)]
struct EvaluationFile {
    summary: SchemeSummary,
    runs: Vec<RunReport>,
}

fn evaluate(a: &EvaluateArgs, cli: &Cli) -> Result<(), CliError> {
    let sim = simulation(load_line(&a.line)?)?;
    let scheme = parse_scheme(&a.scheme.scheme)?;
    if a.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let setup = setup(scheme, &a.scheme.stops, a.scheme.checkpoint.as_deref(), &sim)?;
    let seeds = evaluation_seeds(a.seed, a.runs);
    let runs = setup.run(&sim, &seeds)?;
    let summary = SchemeSummary::from_runs(scheme.to_string(), &sim.config().name, sim.fingerprint(), &runs).map_err(validation)?;

    let dir = &a.out.out;
    prepare_out(dir)?;
    let table = Comparison::new(vec![summary.clone()]).map_err(validation)?;
    table.write_stability_table(create(&dir.join("stability.csv"))?).map_err(validation)?;
    table.write_service_table(create(&dir.join("service.csv"))?).map_err(validation)?;
    write_file(&dir.join("reports.json"), json(&EvaluationFile { summary, runs }))?;
    write_metadata(dir, cli, &sim, a.seed, None)
}

fn compare(a: &CompareArgs, cli: &Cli) -> Result<(), CliError> {
    let dir = &a.out.out;
    let (rows, sim) = if a.reports.is_empty() {
        let sim = simulation(load_line(&a.line)?)?;
        if a.runs == 0 {
            return Err(CliError::Usage("--runs must be at least 1".into()));
        }
        let mut checkpoints = Vec::new();
        for item in &a.checkpoint {
            let (name, path) =
                item.split_once('=').ok_or_else(|| CliError::Usage(format!("--checkpoint expects SCHEME=PATH, got {item:?}")))?;
            checkpoints.push((parse_scheme(name)?, PathBuf::from(path)));
        }
        let seeds = evaluation_seeds(a.seed, a.runs);
        let mut rows = Vec::new();
        for name in &a.schemes {
            let scheme = parse_scheme(name)?;
            let path = checkpoints.iter().find(|(s, _)| *s == scheme).map(|(_, p)| p.as_path());
            let s = setup(scheme, &a.stops, path, &sim)?;
            rows.push(s.summarize(&sim, &seeds)?);
        }
        (rows, Some(sim))
    } else {
        let mut rows = Vec::new();
        for path in &a.reports {
            let text = fs::read_to_string(path).map_err(|e| validation(format!("{}: {e}", path.display())))?;
            let file: EvaluationFile = serde_json::from_str(&text).map_err(|e| validation(format!("{}: {e}", path.display())))?;
            rows.push(file.summary);
        }
        (rows, None)
    };
    let table = Comparison::new(rows).map_err(validation)?;
    prepare_out(dir)?;
    table.write_stability_table(create(&dir.join("stability.csv"))?).map_err(validation)?;
    table.write_service_table(create(&dir.join("service.csv"))?).map_err(validation)?;
    write_file(&dir.join("comparison.json"), json(&table))?;
    match sim {
        Some(sim) => write_metadata(dir, cli, &sim, a.seed, None),
        None => write_file(&dir.join("metadata.json"), json(&serde_json::json!({
            "tool": "holdline",
            "version": env!("CARGO_PKG_VERSION"),
            "line_fingerprint": table.rows[0].fingerprint,
            "seed": a.seed,
            "spec": cli,
        }))),
    }
}

fn export_line(a: &ExportLineArgs) -> Result<(), CliError> {
    let text = load_line(&a.line)?.to_toml_string();
    if a.out.as_os_str() == "-" {
        print!("{text}");
        Ok(())
    } else {
        write_file(&a.out, text)
    }
}

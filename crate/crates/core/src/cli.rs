//! The `fss` command line: `ingest`, `run`, `report` and `oracle`.
//!
//! Results go to standard output (and to files under the output directory);
//! progress logs go to standard error. Failures print one line of the form
//! `error[<kind>]: <message>` and exit with 1 (usage), 2 (data) or
//! 3 (compute).

use crate::dataset::{
    ingest_with_report, make_splits, Dataset, DatasetFile, PreprocessRules, Provenance, RawTable,
};
use crate::harness::{
    run_experiment, ExperimentReport, MethodConfigs, MethodId, StepwiseThresholds,
};
use crate::ann::GarsonConfig;
use crate::linalg::{select, select_rows};
use crate::metrics::DEFAULT_PRED_LEVEL;
use crate::parallel;
use crate::ridge::{KernelConfig, RidgeConfig};
use crate::search::{exhaustive_oracle, Evaluator, GaConfig, LsFilter, RidgeWrapper, TrainingSet};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const OUTPUT_DIR_ENV: &str = "FSS_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "fss-output";
pub const REPORT_FILE: &str = "report.json";
pub const PARTITIONS_FILE: &str = "partitions.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Compute,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Compute => 3,
        }
    }

    fn label(self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Data => "data",
            ErrorKind::Compute => "compute",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn usage(m: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Usage,
            message: m.into(),
        }
    }

    pub fn data(m: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Data,
            message: m.into(),
        }
    }

    pub fn compute(m: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Compute,
            message: m.into(),
        }
    }

    /// The single diagnostic line printed on failure.
    pub fn line(&self) -> String {
        format!("error[{}]: {}", self.kind.label(), self.message.replace('\n', " "))
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.line())
    }
}

impl std::error::Error for CliError {}

/// What a successful command produced: text for standard output plus the
/// exit code (non-zero when some experiment cells failed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self { stdout, exit_code: 0 }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fss", version, about = "Feature subset selection for software effort estimation")]
pub struct Cli {
    /// Directory for every file the command writes [default: the config's output_dir, then $FSS_OUTPUT_DIR, then ./fss-output].
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean, encode and normalize a project CSV into a dataset file.
    Ingest(IngestArgs),
    /// Run the selection methods over random partitions and write a report.
    Run(RunArgs),
    /// Summarize a report file.
    Report(ReportArgs),
    /// Exhaustively search every subset on one partition's training rows.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Raw project CSV with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Preprocessing rules (TOML).
    #[arg(long)]
    pub rules: PathBuf,
    /// Dataset file name, relative to the output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset file; overrides the configuration.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Comma-separated method ids.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub partitions: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Ridge parameter a.
    #[arg(long)]
    pub ridge_a: Option<f64>,
    /// RBF kernel width.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub pred_level: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub report: PathBuf,
    /// Print the features selected in 100% and in 80% of partitions.
    #[arg(long)]
    pub consistency: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleEvaluator {
    Ridge,
    Ls,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub partition: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = OracleEvaluator::Ridge)]
    pub evaluator: OracleEvaluator,
    #[arg(long, default_value_t = 0.05)]
    pub ridge_a: f64,
    #[arg(long, default_value_t = 5.0)]
    pub gamma: f64,
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Run configuration file.
///
/// ```toml
/// dataset = "desharnais.dataset.json"   # relative to this file
/// methods = ["FSWF", "GA"]              # default: all nine
/// n_partitions = 10
/// master_seed = 1
/// output_dir = "out"                    # default: $FSS_OUTPUT_DIR or ./fss-output
/// pred_level = 0.25
///
/// [ridge]
/// a = 0.05
/// kernel = { kind = "rbf", gamma = 5.0 }
///
/// [stepwise]
/// p_enter = 0.05
/// p_remove = 0.10
///
/// [ga]
/// population = 100
/// generations = 100
///
/// [ann.train]
/// max_epochs = 500
/// [ann.sweep]
/// max_hidden = 16
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    #[serde(default = "all_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_partitions")]
    pub n_partitions: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default = "default_ridge")]
    pub ridge: RidgeConfig,
    #[serde(default)]
    pub stepwise: StepwiseThresholds,
    #[serde(default)]
    pub ga: GaConfig,
    #[serde(default)]
    pub ann: GarsonConfig,
    #[serde(default = "default_pred_level")]
    pub pred_level: f64,
}

fn all_methods() -> Vec<String> {
    MethodId::ALL.iter().map(|m| m.to_string()).collect()
}
fn default_partitions() -> usize {
    10
}
fn default_ridge() -> RidgeConfig {
    RidgeConfig::desharnais()
}
fn default_pred_level() -> f64 {
    DEFAULT_PRED_LEVEL
}

impl RunConfig {
    pub fn new(dataset: impl Into<PathBuf>) -> Self {
        Self {
            dataset: dataset.into(),
            methods: all_methods(),
            n_partitions: default_partitions(),
            master_seed: 0,
            output_dir: None,
            jobs: None,
            ridge: default_ridge(),
            stepwise: StepwiseThresholds::default(),
            ga: GaConfig::default(),
            ann: GarsonConfig::default(),
            pred_level: default_pred_level(),
        }
    }

    /// Reads a configuration file; a relative dataset path is taken
    /// relative to the file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Self =
            toml::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        if cfg.dataset.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.dataset = dir.join(&cfg.dataset);
            }
        }
        Ok(cfg)
    }

    pub fn method_ids(&self) -> Result<Vec<MethodId>, CliError> {
        self.methods
            .iter()
            .map(|m| m.parse::<MethodId>().map_err(|e| CliError::usage(e.to_string())))
            .collect()
    }

    pub fn method_configs(&self) -> MethodConfigs {
        MethodConfigs {
            ridge: self.ridge,
            stepwise: self.stepwise,
            ga: self.ga,
            ann: self.ann,
            pred_level: self.pred_level,
        }
    }

    fn apply(&mut self, args: &RunArgs) {
        if let Some(d) = &args.dataset {
            self.dataset = d.clone();
        }
        if let Some(m) = &args.methods {
            self.methods = m.clone();
        }
        if let Some(p) = args.partitions {
            self.n_partitions = p;
        }
        if let Some(s) = args.seed {
            self.master_seed = s;
        }
        if let Some(a) = args.ridge_a {
            self.ridge.a = a;
        }
        if let Some(g) = args.gamma {
            self.ridge.kernel = KernelConfig::Rbf { gamma: g };
        }
        if let Some(l) = args.pred_level {
            self.pred_level = l;
        }
        if args.jobs.is_some() {
            self.jobs = args.jobs;
        }
    }

    pub fn validate(&self) -> Result<Vec<MethodId>, CliError> {
        let methods = self.method_ids()?;
        if methods.is_empty() {
            return Err(CliError::usage("no methods selected"));
        }
        if self.n_partitions == 0 {
            return Err(CliError::usage("n_partitions must be positive"));
        }
        if self.jobs == Some(0) {
            return Err(CliError::usage("jobs must be positive"));
        }
        self.method_configs()
            .validate()
            .map_err(|e| CliError::usage(e.to_string()))?;
        if !self.dataset.is_file() {
            return Err(CliError::usage(format!("dataset {} does not exist", self.dataset.display())));
        }
        Ok(methods)
    }
}

/// Output directory: explicit value, else `$FSS_OUTPUT_DIR`, else `./fss-output`.
pub fn resolve_output_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))
}

pub fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    let file = DatasetFile::load(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    file.into_dataset()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn cmd_ingest(args: &IngestArgs, output_dir: &Path) -> Result<Outcome, CliError> {
    let rules_text = std::fs::read_to_string(&args.rules)
        .map_err(|e| CliError::usage(format!("cannot read rules {}: {e}", args.rules.display())))?;
    let rules: PreprocessRules =
        toml::from_str(&rules_text).map_err(|e| CliError::usage(format!("rules {}: {e}", args.rules.display())))?;
    let bytes = std::fs::read(&args.input).map_err(|e| CliError::data(format!("{}: {e}", args.input.display())))?;
    let raw = RawTable::read_csv(bytes.as_slice(), &rules.table_schema()).map_err(|e| CliError::data(e.to_string()))?;
    let (ds, report) = ingest_with_report(&raw, &rules).map_err(|e| CliError::data(e.to_string()))?;

    let name = args.input.file_name().and_then(|n| n.to_str()).unwrap_or("dataset.csv");
    let provenance = Provenance {
        source_sha256: hex::encode(Sha256::digest(&bytes)),
        source_name: name.to_owned(),
        rules,
    };
    let out_name = args.output.clone().unwrap_or_else(|| {
        let stem = Path::new(name).file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
        PathBuf::from(format!("{stem}.dataset.json"))
    });
    let out = output_dir.join(out_name);
    if let Some(dir) = out.parent() {
        create_dir(dir)?;
    }
    DatasetFile::from_dataset(&ds, Some(provenance))
        .save(&out)
        .map_err(|e| CliError::data(e.to_string()))?;

    let mut s = format!("{} rows, {} features\n", report.rows_out, report.n_features);
    for (col, why) in &report.dropped_columns {
        let _ = writeln!(s, "dropped column {col}: {why}");
    }
    if report.rows_in != report.rows_out {
        let _ = writeln!(s, "dropped {} of {} rows", report.rows_in - report.rows_out, report.rows_in);
    }
    let _ = writeln!(s, "wrote {}", out.display());
    Ok(Outcome::ok(s))
}

pub fn cmd_run(args: &RunArgs, output_dir: Option<&Path>) -> Result<Outcome, CliError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => {
            let ds = args
                .dataset
                .clone()
                .ok_or_else(|| CliError::usage("either --config or --dataset is required"))?;
            RunConfig::new(ds)
        }
    };
    cfg.apply(args);
    let methods = cfg.validate()?;
    let out_dir = resolve_output_dir(output_dir.or(cfg.output_dir.as_deref()));
    let ds = load_dataset(&cfg.dataset)?;
    log::info!(
        "{} projects, {} features; {} methods x {} partitions",
        ds.n_projects(),
        ds.n_features(),
        methods.len(),
        cfg.n_partitions
    );
    let configs = cfg.method_configs();
    let report = parallel::with_jobs(cfg.jobs, || {
        run_experiment(&ds, &methods, cfg.n_partitions, cfg.master_seed, &configs)
    })
    .map_err(|e| match e {
        crate::harness::HarnessError::InvalidConfig(m) => CliError::usage(m),
        crate::harness::HarnessError::Dataset(d) => CliError::data(d.to_string()),
        other => CliError::compute(other.to_string()),
    })?;

    create_dir(&out_dir)?;
    let json_path = out_dir.join(REPORT_FILE);
    std::fs::write(&json_path, report.to_json()).map_err(|e| CliError::data(format!("{}: {e}", json_path.display())))?;
    let csv_path = out_dir.join(PARTITIONS_FILE);
    let file = std::fs::File::create(&csv_path).map_err(|e| CliError::data(format!("{}: {e}", csv_path.display())))?;
    report.write_csv(file).map_err(|e| CliError::data(e.to_string()))?;

    let mut s = summary_table(&report);
    let _ = writeln!(s, "wrote {} and {}", json_path.display(), csv_path.display());
    let exit_code = if report.failures.is_empty() {
        0
    } else {
        for f in &report.failures {
            log::error!("{} partition {} failed: {}", f.method, f.partition_id, f.error);
        }
        eprintln!(
            "{}",
            CliError::compute(format!(
                "{} of {} cells failed; see the report's failures list",
                report.failures.len(),
                report.failures.len() + report.results.len()
            ))
            .line()
        );
        ErrorKind::Compute.exit_code()
    };
    Ok(Outcome { stdout: s, exit_code })
}

/// Mean scores per method, one line each.
pub fn summary_table(report: &ExperimentReport) -> String {
    let mut s = format!(
        "{:<7} {:>5} {:>6} {:>10} {:>10} {:>10} {:>10}\n",
        "method", "parts", "#F", "trainMMRE", "testMMRE0", "testMMRE", "testPRED"
    );
    for a in &report.aggregates {
        let _ = writeln!(
            s,
            "{:<7} {:>5} {:>6.2} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            a.method.as_str(),
            a.partitions,
            a.n_selected.mean,
            a.train_final.mmre.mean,
            a.test_initial.mmre.mean,
            a.test_final.mmre.mean,
            a.test_final.pred.mean
        );
    }
    for f in &report.failures {
        let _ = writeln!(s, "{:<7} partition {} failed", f.method.as_str(), f.partition_id);
    }
    s
}

fn feature_list(report: &ExperimentReport, ids: &[usize]) -> String {
    if ids.is_empty() {
        return "none".into();
    }
    ids.iter()
        .map(|&id| match report.code_of(id) {
            Some(code) => format!("{id} {code}"),
            None => id.to_string(),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Features each method selected in every partition and in at least the
/// 80% threshold of partitions.
pub fn consistency_table(report: &ExperimentReport) -> String {
    let n = report.provenance.n_partitions;
    let mut s = String::new();
    for c in &report.consistency {
        let _ = writeln!(s, "{}\t100% ({n}/{n})\t{}", c.method, feature_list(report, &c.all));
        let _ = writeln!(
            s,
            "{}\t80% ({}/{n})\t{}",
            c.method,
            c.threshold,
            feature_list(report, &c.at_threshold)
        );
    }
    s
}

pub fn cmd_report(args: &ReportArgs) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(&args.report)
        .map_err(|e| CliError::data(format!("{}: {e}", args.report.display())))?;
    let report = ExperimentReport::from_json(&text).map_err(|e| CliError::data(e.to_string()))?;
    Ok(Outcome::ok(if args.consistency {
        consistency_table(&report)
    } else {
        summary_table(&report)
    }))
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<Outcome, CliError> {
    let ds = load_dataset(&args.dataset)?;
    let plans = make_splits(&ds, args.partition + 1, args.seed).map_err(|e| CliError::data(e.to_string()))?;
    let plan = &plans[args.partition];
    let cols: Vec<usize> = (0..ds.n_features()).collect();
    let data = TrainingSet::new(
        select(ds.x(), &plan.train, &cols),
        select_rows(ds.z(), &plan.train),
        plan.folds.clone(),
    )
    .map_err(|e| CliError::data(e.to_string()))?;
    let ridge = RidgeWrapper(RidgeConfig::new(args.ridge_a, KernelConfig::Rbf { gamma: args.gamma }));
    ridge.0.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let eval: &dyn Evaluator = match args.evaluator {
        OracleEvaluator::Ridge => &ridge,
        OracleEvaluator::Ls => &LsFilter,
    };
    let (best, score) = parallel::with_jobs(args.jobs, || exhaustive_oracle(&data, eval))
        .map_err(|e| CliError::data(e.to_string()))?;
    let ids = ds.ids_of(&best.indices());
    let codes: Vec<String> = ids
        .iter()
        .map(|&id| format!("{id} {}", ds.features()[id - 1].code))
        .collect();
    Ok(Outcome::ok(format!(
        "partition {}: best subset {} with CV MMRE {score:.6} ({} subsets)\n",
        args.partition,
        codes.join(", "),
        (1u64 << ds.n_features()) - 1
    )))
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return if e.kind() == K::DisplayHelpOnMissingArgumentOrSubcommand { 1 } else { 0 };
            }
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", CliError::usage(first).line());
            return ErrorKind::Usage.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Ingest(a) => cmd_ingest(a, &resolve_output_dir(cli.output_dir.as_deref())),
        Command::Run(a) => cmd_run(a, cli.output_dir.as_deref()),
        Command::Report(a) => cmd_report(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match result {
        Ok(out) => {
            print!("{}", out.stdout);
            out.exit_code
        }
        Err(e) => {
            eprintln!("{}", e.line());
            e.kind.exit_code()
        }
    }
}

//! Command-line interface behind the `qfool` binary.
//!
//! Three subcommands: `attack` runs one attack against one input point,
//! `bench` drives an experiment spec (grid runs or a subspace sweep), and
//! `gen` produces oracle weight files and datasets.
//!
//! Exit codes: `0` — requested work completed (for `attack`: an adversarial
//! point was found); `2` — the attack ran correctly but found nothing
//! (unsuccessful); `1` — usage, IO, or validation errors. Anything on
//! stdout is machine-parsable (CSV tables, output file paths, one per
//! line); human prose goes to stderr.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::attack::{self, attack_name, AttackError};
use crate::config::{AttackConfig, ConfigError, ResolvedConfig};
use crate::dataset::{self, Dataset, DatasetError};
use crate::harness::{self, ExperimentSpec, HarnessError, RunOptions};
use crate::oracle::{parse_oracle_spec, AffineMulticlassOracle, DecisionOracle, MlpOracle, OracleError};
use crate::point::{Bounds, Domain, Point, Shape};
use crate::trace::AttackTrace;

#[derive(Parser)]
#[command(
    name = "qfool",
    version,
    about = "Query-efficient decision-based black-box adversarial attacks",
    after_help = "Exit codes: 0 done, 2 attack unsuccessful, 1 usage/IO/validation error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Attack one input point against an oracle.
    Attack(AttackArgs),
    /// Run an experiment spec: every image × seed × budget cell.
    Bench(BenchArgs),
    /// Generate oracle weight files and datasets.
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Args)]
struct AttackArgs {
    /// Oracle spec: affine:FILE, mlp:FILE, sphere:c,R, or http:URL.
    #[arg(long)]
    oracle: String,
    /// Input point file (headerless little-endian f32).
    #[arg(long)]
    input: PathBuf,
    /// nontargeted flips the label to anything; targeted forces the label
    /// of --target-image.
    #[arg(long, value_enum, default_value_t = Mode::Nontargeted)]
    mode: Mode,
    /// Example of the class a targeted attack must reach.
    #[arg(long, required_if_eq("mode", "targeted"))]
    target_image: Option<PathBuf>,
    /// Oracle-query budget; overrides the config file.
    #[arg(long)]
    budget: Option<u64>,
    /// Low-frequency subspace side √m; overrides the config file.
    #[arg(long)]
    subspace_side: Option<usize>,
    /// Attack RNG seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML attack configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trace output file (one JSON line). The adversarial point is written
    /// next to it with extension .f32.
    #[arg(long, default_value = "trace.ndjson")]
    out: PathBuf,
    /// Oracle shape, HxW, HxWxC, or plain D; mandatory for sphere:/http:
    /// oracles, optional (but checked) for weight-file oracles.
    #[arg(long, value_parser = parse_shape)]
    shape: Option<Shape>,
    /// Coordinate bounds LO,HI; defaults to 0,1 when --shape is given.
    #[arg(long, value_parser = parse_bounds)]
    bounds: Option<Bounds>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Mode {
    Nontargeted,
    Targeted,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Print the cell plan as CSV and run nothing.
    #[arg(long)]
    dry_run: bool,
    /// Re-run cells whose records already exist.
    #[arg(long)]
    force: bool,
    /// Worker threads; defaults to $QFOOL_WORKERS, then one per core.
    #[arg(long)]
    workers: Option<usize>,
    /// Instead of the spec's grid, sweep the subspace attack over these
    /// comma-separated sides (e.g. 2,4,8) at the spec's first budget.
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<usize>>,
}

#[derive(Subcommand)]
enum GenCommand {
    /// Seeded random ReLU network weights (binary MLP format).
    Mlp {
        /// Output weight file.
        #[arg(long)]
        out: PathBuf,
        /// Input shape (HxW, HxWxC, or plain D).
        #[arg(long, value_parser = parse_shape)]
        shape: Shape,
        /// Hidden layer widths, comma-separated (e.g. 32,32).
        #[arg(long, value_delimiter = ',')]
        hidden: Vec<usize>,
        /// Output classes.
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Seeded random affine multiclass weights.
    Affine {
        /// Output weight file.
        #[arg(long)]
        out: PathBuf,
        /// Input shape (HxW, HxWxC, or plain D).
        #[arg(long, value_parser = parse_shape)]
        shape: Shape,
        /// Classes (weight rows).
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Uniform random labeled points drawn from an oracle's box.
    Dataset {
        /// Oracle spec used for the box and the labels.
        #[arg(long)]
        oracle: String,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
        /// Number of points.
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Oracle shape; mandatory for sphere:/http: oracles.
        #[arg(long, value_parser = parse_shape)]
        shape: Option<Shape>,
        /// Coordinate bounds LO,HI.
        #[arg(long, value_parser = parse_bounds)]
        bounds: Option<Bounds>,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Parses, dispatches, and maps every failure to its exit code. The binary
/// is one call to this.
pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version surface here too; they are not errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Attack(args) => cmd_attack(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Gen(command) => cmd_gen(command),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// `D`, `HxW`, or `HxWxC`.
fn parse_shape(text: &str) -> Result<Shape, String> {
    let dims: Vec<usize> = text
        .split('x')
        .map(|part| part.trim().parse::<usize>().map_err(|e| format!("shape part '{part}': {e}")))
        .collect::<Result<_, _>>()?;
    let shape = match dims.as_slice() {
        [d] => Shape::flat(*d),
        [h, w] => Shape::new(*h, *w, 1),
        [h, w, c] => Shape::new(*h, *w, *c),
        _ => return Err(format!("shape '{text}' is not D, HxW, or HxWxC")),
    };
    if shape.is_empty() {
        return Err(format!("shape '{text}' has zero total size"));
    }
    Ok(shape)
}

/// `LO,HI` with LO < HI.
fn parse_bounds(text: &str) -> Result<Bounds, String> {
    let (lo, hi) = text.split_once(',').ok_or_else(|| format!("bounds '{text}' is not LO,HI"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bounds low '{lo}': {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bounds high '{hi}': {e}"))?;
    if !(lo < hi) {
        return Err(format!("bounds need LO < HI, got {lo},{hi}"));
    }
    Ok(Bounds::new(lo, hi))
}

fn domain_hint(shape: Option<Shape>, bounds: Option<Bounds>) -> Result<Option<Domain>, CliError> {
    match (shape, bounds) {
        (Some(shape), bounds) => Ok(Some(Domain::new(shape, bounds.unwrap_or_default()))),
        (None, Some(_)) => Err(CliError::Usage("--bounds needs --shape".into())),
        (None, None) => Ok(None),
    }
}

fn cmd_attack(args: AttackArgs) -> Result<ExitCode, CliError> {
    let started = Instant::now();

    // Precedence: explicit flags > config file > built-in defaults.
    let mut config = match &args.config {
        Some(path) => AttackConfig::load(path)?,
        None => AttackConfig::default(),
    };
    if let Some(budget) = args.budget {
        config.total_budget = budget;
    }
    if let Some(seed) = args.seed {
        config.rng_seed = seed;
    }
    if let Some(side) = args.subspace_side {
        config.subspace_side = Some(side);
    }

    let hint = domain_hint(args.shape, args.bounds)?;
    let oracle = parse_oracle_spec(&args.oracle, hint)?;
    let domain = oracle.domain();
    let resolved = config.resolve(&domain)?;
    let x0 = dataset::read_input_point(&args.input, &domain)?;

    let base = match args.mode {
        Mode::Nontargeted => "nontargeted",
        Mode::Targeted => "targeted",
    };
    let outcome = match args.mode {
        Mode::Nontargeted => attack::attack(oracle.as_ref(), &x0, &resolved),
        Mode::Targeted => {
            let target_path = args.target_image.as_ref().expect("clap enforces the flag");
            let target = dataset::read_input_point(target_path, &domain)?;
            attack::attack_targeted(oracle.as_ref(), &x0, &target, &resolved)
        }
    };

    let trace = match outcome {
        Ok(trace) => trace,
        // No adversarial point exists within the budget: that is a verdict,
        // not a tool failure, so it still produces a (failed) trace.
        Err(AttackError::InitialPointNotFound { sigma_reached, queries_spent }) => {
            eprintln!(
                "no adversarial point within {queries_spent} search queries \
                 (σ reached {sigma_reached:.3e})"
            );
            unsuccessful_trace(oracle.as_ref(), &x0, base, &resolved, queries_spent, started)?
        }
        Err(other) => return Err(other.into()),
    };

    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let line = serde_json::to_string(&trace).expect("trace serializes");
    fs::write(&args.out, format!("{line}\n")).map_err(io_err(&args.out))?;
    println!("{}", args.out.display());
    if let Some(point) = &trace.final_point {
        let point_path = args.out.with_extension("f32");
        dataset::write_point_file(&point_path, point)?;
        println!("{}", point_path.display());
    }

    if trace.success {
        eprintln!(
            "{}: success, final mse {:.6e} (l2 {:.6e}) after {} queries",
            trace.attack, trace.final_mse, trace.final_l2, trace.total_queries
        );
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{}: unsuccessful after {} queries", trace.attack, trace.total_queries);
        Ok(ExitCode::from(2))
    }
}

/// Trace for a run that never found an adversarial point. The original
/// label is taken from one extra oracle call, outside the counted total.
fn unsuccessful_trace(
    oracle: &(dyn DecisionOracle + Send + Sync),
    x0: &Point,
    base: &str,
    resolved: &ResolvedConfig,
    queries_spent: u64,
    started: Instant,
) -> Result<AttackTrace, CliError> {
    let original_label = oracle.classify(x0)?;
    let mut phase_queries = BTreeMap::new();
    phase_queries.insert("setup".to_string(), 1);
    if queries_spent > 0 {
        phase_queries.insert("initial_search".to_string(), queries_spent);
    }
    Ok(AttackTrace {
        attack: attack_name(base, resolved),
        success: false,
        original: x0.clone(),
        original_label,
        final_point: None,
        final_label: None,
        final_mse: 0.0,
        final_l2: 0.0,
        target_label: None,
        parallelism_cosine: None,
        iterations: Vec::new(),
        curve: Vec::new(),
        total_queries: 1 + queries_spent,
        phase_queries,
        queries_to_threshold: None,
        config: resolved.clone(),
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode, CliError> {
    let exp = ExperimentSpec::load(&args.spec)?;
    let options = RunOptions { force: args.force, workers: args.workers };

    if args.dry_run {
        print_plan(&exp, args.force)?;
        return Ok(ExitCode::SUCCESS);
    }

    if let Some(sides) = &args.sweep {
        let rows = harness::subspace_sweep(&exp, sides, &options)?;
        let csv = harness::sweep_csv(&rows);
        print!("{csv}");
        let csv_path = write_csv(&exp.output.with_extension("sweep.csv"), &csv)?;
        eprintln!(
            "swept {} side(s) over {} image(s) × {} seed(s) at budget {}; table in {}",
            rows.len(),
            exp.dataset.len(),
            exp.spec.seeds.len(),
            exp.spec.budgets[0],
            csv_path.display()
        );
        return Ok(ExitCode::SUCCESS);
    }

    let records = harness::run_experiment(&exp, &options)?;
    let summary = harness::summarize(&records);
    let csv = harness::summary_csv(&summary);
    print!("{csv}");
    let csv_path = write_csv(&exp.output.with_extension("summary.csv"), &csv)?;
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    eprintln!(
        "{} cell(s), {} failed; records in {}, summary in {}",
        records.len(),
        failed,
        exp.output.display(),
        csv_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// Persists a CSV table next to the record file and hands the path back.
fn write_csv(path: &Path, csv: &str) -> Result<std::path::PathBuf, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, csv).map_err(io_err(path))?;
    Ok(path.to_path_buf())
}

/// CSV plan of every cell the spec describes, with completion status.
fn print_plan(exp: &harness::Experiment, force: bool) -> Result<(), CliError> {
    let attack = harness::effective_attack_name(&exp.spec.attack, &exp.spec.config);
    let mut done = std::collections::HashSet::new();
    if !force && exp.output.exists() {
        for record in harness::load_records(&exp.output)? {
            done.insert(record.key());
        }
    }
    println!("image,attack,budget,seed,status");
    let mut pending = 0usize;
    for item in &exp.dataset.items {
        for &seed in &exp.spec.seeds {
            for &budget in &exp.spec.budgets {
                let key = (item.id.clone(), attack.clone(), budget, seed);
                let status = if done.contains(&key) {
                    "done"
                } else {
                    pending += 1;
                    "pending"
                };
                println!("{},{attack},{budget},{seed},{status}", item.id);
            }
        }
    }
    eprintln!("dry run: {pending} cell(s) would run, nothing executed");
    Ok(())
}

fn cmd_gen(command: GenCommand) -> Result<ExitCode, CliError> {
    match command {
        GenCommand::Mlp { out, shape, hidden, classes, seed } => {
            let mlp = MlpOracle::seeded(
                shape.len(),
                &hidden,
                classes,
                seed,
                Some(Domain::unit(shape)),
            )?;
            mlp.save(&out)?;
            println!("{}", out.display());
            eprintln!(
                "wrote {}-layer ReLU net ({} → {hidden:?} → {classes}) for seed {seed}",
                hidden.len() + 1,
                shape.len()
            );
        }
        GenCommand::Affine { out, shape, classes, seed } => {
            let oracle =
                AffineMulticlassOracle::seeded(classes, seed, Domain::unit(shape))?;
            oracle.save(&out)?;
            println!("{}", out.display());
            eprintln!("wrote {classes}-class affine weights over {} inputs for seed {seed}", shape.len());
        }
        GenCommand::Dataset { oracle, out, count, seed, shape, bounds } => {
            let hint = domain_hint(shape, bounds)?;
            let oracle = parse_oracle_spec(&oracle, hint)?;
            let ds = Dataset::generate(&out, oracle.as_ref(), count, seed)?;
            println!("{}", out.display());
            eprintln!("wrote {} labeled point(s) to {}", ds.len(), out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

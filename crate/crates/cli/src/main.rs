use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use abae_cli::config::{RunConfig, RunConfigPatch};
use abae_cli::error::{io_err, CliError};
use abae_cli::ingest::{ingest, write_dataset, OracleMode};
use abae_cli::oracle::SubprocessOracle;
use abae_cli::report::shape;
use abae_cli::stub::{run_stub, StubMode};
use abae_core::harness::mse_table_csv;
use abae_core::{
    generate, run_abae, run_abae_with_oracle, run_mse, validate_bound, AbaeParams,
    BootstrapConfig, BoundCheckReport, BoundKind, ExperimentPlan, RngSeed, SyntheticSpec,
    ValidationConfig, ValueLaw,
};

#[derive(Parser)]
#[command(
    name = "abae",
    version,
    about = "Budget-capped approximate aggregation over expensive predicates"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Answer a query over a dataset file within a predicate budget.
    Run(Box<RunArgs>),
    /// Run a Monte Carlo experiment plan on synthetic data.
    Simulate(SimulateArgs),
    /// Check the concentration-bound calculators against simulation.
    ValidateBounds(ValidateArgs),
    /// Write a synthetic labeled dataset file.
    Generate(GenerateArgs),
    /// Test oracles speaking the wire protocol (used by the test suite).
    #[command(subcommand, hide = true)]
    OracleStub(StubMode),
}

#[derive(Args)]
struct RunArgs {
    /// Dataset file: `id,proxy,value[,predicate]` lines.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Number of strata.
    #[arg(long)]
    k: Option<usize>,
    /// Stage-1 draws per stratum.
    #[arg(long)]
    n1: Option<u64>,
    /// Stage-2 draw budget across strata.
    #[arg(long)]
    n2: Option<u64>,
    /// Pool both stages into the final per-stratum statistics.
    #[arg(long)]
    reuse: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Bootstrap resamples behind the confidence interval.
    #[arg(long)]
    resamples: Option<u32>,
    /// Interval miss probability.
    #[arg(long)]
    alpha: Option<f64>,
    /// Command line of an external oracle process; omit to read labels from
    /// the input's predicate column.
    #[arg(long)]
    oracle: Option<String>,
    /// Report destination; omit for standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON config document supplying any of the above; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Widen the interval for strata with thin matched samples.
    #[arg(long, requires = "c_mu")]
    adjust_ci: bool,
    /// Value-magnitude envelope used by --adjust-ci.
    #[arg(long)]
    c_mu: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment plan as a JSON document.
    #[arg(long)]
    config: PathBuf,
    /// Override the plan's trial count.
    #[arg(long)]
    trials: Option<u64>,
    /// Override the plan's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON result destination; omit for standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the per-cell results as a flat delimited table.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Bound to check: an id (1, 2, 4, 5, 8), a name (p-hat-upper,
    /// p-hat-lower, b1-lower, sigma-sq, b2-lower), or `all`.
    #[arg(long)]
    lemma: String,
    /// Per-event failure level for the stage-1 bounds.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Failure level for the stage-2 bound; defaults to --delta.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    /// Stage-1 draws per stratum in each simulated trial.
    #[arg(long, default_value_t = 100)]
    n1: u64,
    /// Stage-2 budget in each simulated trial.
    #[arg(long, default_value_t = 1000)]
    n2: u64,
    /// Value distribution: two-point or truncated-normal.
    #[arg(long, default_value = "two-point")]
    law: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report destination; omit for standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Destination dataset file.
    #[arg(long)]
    output: PathBuf,
    /// Population description as a JSON document; omit for the built-in
    /// four-stratum suite.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the records per stratum.
    #[arg(long)]
    records: Option<usize>,
    /// Override the generator seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn emit(output: Option<&Path>, body: &str) -> Result<(), CliError> {
    match output {
        Some(path) => fs::write(path, body).map_err(|e| io_err(path, e)),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let file = args.config.as_deref().map(RunConfigPatch::load).transpose()?;
    let flags = RunConfigPatch {
        input: args.input,
        k: args.k,
        n1: args.n1,
        n2: args.n2,
        reuse: args.reuse.then_some(true),
        seed: args.seed,
        resamples: args.resamples,
        alpha: args.alpha,
        oracle: args.oracle,
        output: args.output,
    };
    let cfg = RunConfig::resolve(flags, file)?;

    let mode = match cfg.oracle {
        Some(_) => OracleMode::Subprocess,
        None => OracleMode::Inline,
    };
    let ingested = ingest(&cfg.input, mode)?;

    let mut params = AbaeParams::new(cfg.k, cfg.n1, cfg.n2);
    params.reuse = cfg.reuse;
    params.bootstrap = Some(BootstrapConfig {
        resamples: cfg.resamples,
        alpha: cfg.alpha,
        adjustment: args.adjust_ci,
        ..BootstrapConfig::default()
    });
    params.c_mu = args.c_mu.unwrap_or(0.0);
    let seed = RngSeed::new(cfg.seed);

    let report = match &cfg.oracle {
        None => run_abae(&ingested.dataset, &params, seed)?,
        Some(command) => {
            let mut oracle = SubprocessOracle::spawn(command)?;
            run_abae_with_oracle(&ingested.dataset, &params, seed, &mut oracle)?
        }
    };
    let shaped = shape(&report, cfg.n1, cfg.n2, cfg.reuse, ingested.warnings);
    let mut body = serde_json::to_string_pretty(&shaped)?;
    body.push('\n');
    emit(cfg.output.as_deref(), &body)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| io_err(&args.config, e))?;
    let mut plan: ExperimentPlan = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    if let Some(trials) = args.trials {
        plan.trials = trials;
    }
    if let Some(seed) = args.seed {
        plan.seed = RngSeed::new(seed);
    }
    let result = run_mse(&plan)?;
    let mut body = serde_json::to_string_pretty(&result)?;
    body.push('\n');
    emit(args.output.as_deref(), &body)?;
    if let Some(table) = &args.table {
        fs::write(table, mse_table_csv(&result)).map_err(|e| io_err(table, e))?;
    }
    Ok(())
}

fn parse_kinds(lemma: &str) -> Result<Vec<BoundKind>, CliError> {
    if lemma == "all" {
        return Ok(BoundKind::ALL.to_vec());
    }
    if let Ok(id) = lemma.parse::<u8>() {
        return BoundKind::from_id(id).map(|k| vec![k]).ok_or_else(|| {
            CliError::Config(format!("no bound with id {id}; ids are 1, 2, 4, 5, 8"))
        });
    }
    BoundKind::ALL
        .iter()
        .copied()
        .find(|k| k.name() == lemma)
        .map(|k| vec![k])
        .ok_or_else(|| CliError::Config(format!("unknown bound `{lemma}`")))
}

fn cmd_validate_bounds(args: ValidateArgs) -> Result<(), CliError> {
    let kinds = parse_kinds(&args.lemma)?;
    let law: ValueLaw = match args.law.as_str() {
        "two-point" => ValueLaw::TwoPoint,
        "truncated-normal" => ValueLaw::TruncatedNormal,
        other => {
            return Err(CliError::Config(format!(
                "unknown value law `{other}`; use two-point or truncated-normal"
            )))
        }
    };
    let gamma = args.gamma.unwrap_or(args.delta);
    let population = SyntheticSpec::default_suite().param_population()?;

    let mut reports: Vec<BoundCheckReport> = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let cfg = ValidationConfig {
            n1: args.n1,
            n2: args.n2,
            level: match kind {
                BoundKind::B2Lower => gamma,
                _ => args.delta,
            },
            trials: args.trials,
            law,
            t_override: None,
        };
        let seed = RngSeed::new(args.seed).child(kind.id() as u64);
        reports.push(validate_bound(kind, &population, &cfg, seed)?);
    }

    let mut body = serde_json::to_string_pretty(&reports)?;
    body.push('\n');
    emit(args.output.as_deref(), &body)?;

    let failed = reports.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(CliError::BoundsFailed {
            failed,
            total: reports.len(),
        });
    }
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => SyntheticSpec::default_suite(),
    };
    if let Some(records) = args.records {
        spec.records_per_stratum = records;
    }
    if let Some(seed) = args.seed {
        spec.seed = RngSeed::new(seed);
    }
    let (dataset, _) = generate(&spec)?;
    write_dataset(&dataset, &args.output)
}

/// `ABAE_THREADS` caps worker parallelism; 0 or unset picks the machine
/// default.
fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ABAE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        CliError::Config(format!(
            "ABAE_THREADS must be a non-negative integer, got `{raw}`"
        ))
    })?;
    if n == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("ABAE_THREADS: {e}")))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Run(args) => cmd_run(*args),
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::ValidateBounds(args) => cmd_validate_bounds(args),
        Cmd::Generate(args) => cmd_generate(args),
        Cmd::OracleStub(mode) => run_stub(&mode),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! Command-line driver for the randomized Kaczmarz toolkit.
//!
//! Machine-readable results go to stdout as JSON lines; the human
//! summary goes to stderr. Exit codes: 0 success, 1 verification
//! failure (a failed check, or a bound exhausted before the target),
//! 2 usage or input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use kaczmarz_core::harness::{self, resolve_workers};
use kaczmarz_core::verify as suites;
use kaczmarz_core::{
    read_matrix_market, run_with_stride, theorem1_bound, BoundReport, DenseMatrix,
    ExperimentConfig, LinearSystem, SpectralSummary, StopReason, StoppingRule,
};

#[derive(Parser)]
#[command(
    name = "kaczmarz",
    version,
    about = "Randomized Kaczmarz solver for approximate solutions of linear systems",
    long_about = "Approximately solves consistent linear systems by randomized row \
                  projections, prints iteration bounds, verifies the method's \
                  expectation identities on built-in fixtures, and reproduces the \
                  ill-conditioned Hilbert showcase experiment.\n\n\
                  All randomness is seeded (default seed 0); identical invocations \
                  produce identical outputs. JSON results go to stdout, human \
                  summaries to stderr."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver on one system and report the residual trace
    Solve(SolveArgs),
    /// Print the projection-count bounds for a target accuracy
    Bound(BoundArgs),
    /// Run the built-in verification suites
    Verify(VerifyArgs),
    /// Run a config-driven ensemble experiment
    Experiment(ExperimentArgs),
    /// Run the 1000x1000 Hilbert showcase (all-ones solution, zero
    /// start, ten thousand projections, trace recorded every 5 steps)
    HilbertDemo(HilbertDemoArgs),
}

#[derive(Args)]
struct MatrixArgs {
    /// Matrix Market file holding the system matrix
    #[arg(long, value_name = "PATH", conflicts_with = "hilbert")]
    matrix: Option<PathBuf>,
    /// Use the n-by-n Hilbert matrix instead of a file
    #[arg(long, value_name = "N")]
    hilbert: Option<usize>,
}

impl MatrixArgs {
    fn load(&self) -> Result<(DenseMatrix, String), CliError> {
        match (&self.matrix, self.hilbert) {
            (Some(path), None) => Ok((
                read_matrix_market(path)?,
                path.display().to_string(),
            )),
            (None, Some(n)) => Ok((DenseMatrix::hilbert(n)?, format!("hilbert({n})"))),
            _ => Err(CliError::Input(
                "exactly one of --matrix and --hilbert is required".into(),
            )),
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    /// Right-hand side file (one value per line); the solution stays
    /// unknown and only residual-based stopping applies
    #[arg(long, value_name = "PATH", conflicts_with = "truth")]
    rhs: Option<PathBuf>,
    /// Construct the right-hand side from a known solution: `ones`
    #[arg(long, value_name = "SPEC")]
    truth: Option<TruthSpec>,
    /// Start vector: `zeros` or a file with one value per line
    #[arg(long, value_name = "SPEC", default_value = "zeros")]
    x0: String,
    /// Target accuracy: stop at ||Ax_k - b|| <= eps * ||x_0 - x||, or
    /// at the projection-count bound, whichever comes first
    #[arg(long, value_name = "EPS", conflicts_with = "steps")]
    eps: Option<f64>,
    /// Run exactly this many projections
    #[arg(long, value_name = "K")]
    steps: Option<u64>,
    /// Seed for the row-sampling stream
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Record every STRIDE-th step (default: limit/2000, at least 1)
    #[arg(long, value_name = "STRIDE")]
    stride: Option<u64>,
    /// Directory for trace.csv, final_iterate.csv, and report.json
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TruthSpec {
    /// All-ones solution; the right-hand side becomes the row sums
    Ones,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
    /// Target accuracy in ||Ax_k - b|| <= eps * ||x_0 - x||
    #[arg(long, value_name = "EPS")]
    eps: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteName {
    Lemma1,
    SvdDirection,
    SvRate,
    Theorem2,
    All,
}

#[derive(Args)]
struct VerifyArgs {
    /// Which check suite to run
    #[arg(long, value_enum, default_value_t = SuiteName::All)]
    suite: SuiteName,
    /// Base seed for fixtures and Monte Carlo streams
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo trial count (minimum 10000 for sampled checks)
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment config (see the README for the schema)
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Concurrent trial workers (falls back to KACZMARZ_WORKERS, then
    /// one per core)
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
}

#[derive(Args)]
struct HilbertDemoArgs {
    /// Output directory for the trace and summary files
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Seed for the single showcase trial
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum CliError {
    Input(String),
    Verification(String),
}

impl From<kaczmarz_core::Error> for CliError {
    fn from(e: kaczmarz_core::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Bound(args) => cmd_bound(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::HilbertDemo(args) => cmd_hilbert_demo(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Verification(msg)) => {
            eprintln!("verification failure: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// One value per line; blank lines and lines starting with `#` or `%`
/// are ignored.
fn read_vector(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let v: f64 = trimmed.parse().map_err(|_| {
            CliError::Input(format!(
                "{}:{}: cannot parse '{trimmed}' as a number",
                path.display(),
                lineno + 1
            ))
        })?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no values found",
            path.display()
        )));
    }
    Ok(values)
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string(value).expect("serializable report")
    );
}

#[derive(Serialize)]
struct SolveReport<'a> {
    command: &'static str,
    matrix: &'a str,
    rows: usize,
    cols: usize,
    seed: u64,
    steps_taken: u64,
    stop_reason: StopReason,
    initial_residual: f64,
    terminal_residual: f64,
    terminal_residual_linf: f64,
    terminal_error: Option<f64>,
    target: Option<f64>,
    bound: Option<&'a BoundReport>,
    norms_method: Option<&'static str>,
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    let (matrix, matrix_label) = args.matrix.load()?;
    let n = matrix.cols();

    let system = match (&args.rhs, args.truth) {
        (Some(path), None) => {
            let rhs = read_vector(path)?;
            LinearSystem::new(matrix, rhs, None)?
        }
        (None, Some(TruthSpec::Ones)) => LinearSystem::from_truth(matrix, vec![1.0; n])?,
        (None, None) => {
            return Err(CliError::Input(
                "one of --rhs and --truth is required".into(),
            ));
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };

    let x0 = if args.x0 == "zeros" {
        vec![0.0; n]
    } else {
        let v = read_vector(Path::new(&args.x0))?;
        if v.len() != n {
            return Err(CliError::Input(format!(
                "--x0 file has {} values, expected {n}",
                v.len()
            )));
        }
        v
    };

    let (stop, bound, target) = match (args.eps, args.steps) {
        (Some(eps), None) => {
            if system.truth().is_none() {
                return Err(CliError::Input(
                    "--eps stops at eps * ||x_0 - x|| and needs --truth; \
                     use --steps with --rhs"
                        .into(),
                ));
            }
            if !(eps > 0.0) {
                return Err(CliError::Input("--eps must be positive".into()));
            }
            let norms = SpectralSummary::estimated(system.matrix(), 1e-10)?;
            let bound = theorem1_bound(&norms, eps)?;
            let error0 = system.error_norm(&x0).expect("truth present");
            let stop = StoppingRule::TargetRatio {
                epsilon: eps,
                max_steps: bound.k_theorem1,
            };
            (stop, Some(bound), Some(eps * error0))
        }
        (None, Some(steps)) => (StoppingRule::MaxSteps(steps), None, None),
        _ => {
            return Err(CliError::Input(
                "exactly one of --eps and --steps is required".into(),
            ));
        }
    };

    let stride = args.stride.unwrap_or((stop.step_limit() / 2000).max(1));
    let history = run_with_stride(&system, &x0, &stop, args.seed, stride)?;

    let report = SolveReport {
        command: "solve",
        matrix: &matrix_label,
        rows: system.rows(),
        cols: system.unknowns(),
        seed: args.seed,
        steps_taken: history.steps,
        stop_reason: history.stop_reason,
        initial_residual: history.initial_residual(),
        terminal_residual: history.terminal_residual(),
        terminal_residual_linf: system.residual_norm_inf(&history.final_x),
        terminal_error: history.terminal_error(),
        target,
        bound: bound.as_ref(),
        norms_method: bound.as_ref().map(|_| "estimated (power iteration)"),
    };
    print_json(&report);

    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
        harness::emit_history_csv(&history, dir.join("trace.csv"))?;
        harness::emit_coordinates_csv(&history.final_x, dir.join("final_iterate.csv"))?;
        let json = serde_json::to_string_pretty(&report).expect("serializable report");
        fs::write(dir.join("report.json"), json + "\n")
            .map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    }

    eprintln!(
        "{matrix_label}: {} steps ({:?}), residual {:.6e} -> {:.6e}",
        history.steps,
        history.stop_reason,
        history.initial_residual(),
        history.terminal_residual()
    );

    if bound.is_some() && history.stop_reason == StopReason::StepLimit {
        return Err(CliError::Verification(format!(
            "projection-count bound ({}) exhausted before reaching the target \
             {:.6e}; terminal residual {:.6e}. The bound certifies existence of \
             a good sequence, not every seeded one; retry with another seed.",
            stop.step_limit(),
            target.unwrap_or(f64::NAN),
            history.terminal_residual()
        )));
    }
    Ok(())
}

fn cmd_bound(args: BoundArgs) -> Result<(), CliError> {
    let (matrix, matrix_label) = args.matrix.load()?;
    let norms = SpectralSummary::estimated(&matrix, 1e-10)?;
    let report = theorem1_bound(&norms, args.eps)?;
    print_json(&report);
    eprintln!(
        "{matrix_label}: eps {:.6e} -> k_theorem1 {}, k_sigma_min {}, operative {} \
         (norms estimated by power iteration)",
        report.epsilon,
        report.k_theorem1,
        report
            .k_sigma_min
            .map(|k| k.to_string())
            .unwrap_or_else(|| "unavailable (rank deficient to working precision)".into()),
        report.operative_bound,
    );
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let checks = match args.suite {
        SuiteName::Lemma1 => suites::lemma1_suite(args.seed)?,
        SuiteName::SvdDirection => suites::singular_direction_suite(args.seed, args.trials)?,
        SuiteName::SvRate => suites::rate_suite(args.seed, args.trials)?,
        SuiteName::Theorem2 => suites::theorem2_suite(args.seed, args.trials)?,
        SuiteName::All => suites::all_suites(args.seed, args.trials)?,
    };
    let mut failures = Vec::new();
    for check in &checks {
        print_json(check);
        if !check.passed() {
            failures.push(format!("{}/{}", check.suite, check.case));
        }
    }
    eprintln!(
        "{} checks, {} failed (seed {}, trials {})",
        checks.len(),
        failures.len(),
        args.seed,
        args.trials
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failures.join(", ")))
    }
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::from_json_file(&args.config)?;
    if args.workers.is_some() {
        cfg.workers = args.workers;
    } else {
        cfg.workers = Some(resolve_workers(cfg.workers));
    }
    let outcome = kaczmarz_core::run_experiment(&cfg)?;
    print_json(&outcome.summary);
    eprintln!(
        "{} trials, terminal residual median {:.6e} (l2) / {:.6e} (linf){}",
        outcome.histories.len(),
        outcome.summary.terminal_residual_l2.median,
        outcome.summary.terminal_residual_linf.median,
        cfg.output_dir
            .as_ref()
            .map(|d| format!(", outputs in {}", d.display()))
            .unwrap_or_default()
    );
    Ok(())
}

fn cmd_hilbert_demo(args: HilbertDemoArgs) -> Result<(), CliError> {
    let cfg = harness::hilbert_demo_config(args.seed, Some(args.out.clone()));
    let outcome = kaczmarz_core::run_experiment(&cfg)?;
    print_json(&outcome.summary);
    let h = &outcome.histories[0];
    eprintln!(
        "hilbert(1000), seed {}: residual {:.6e} -> {:.6e} (l2), terminal linf {:.6e}, \
         outputs in {}",
        args.seed,
        h.initial_residual(),
        h.terminal_residual(),
        outcome.summary.terminal_residual_linf.median,
        args.out.display()
    );
    Ok(())
}

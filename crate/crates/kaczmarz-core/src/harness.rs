//! Config-driven experiment runner: seeded trial ensembles over a
//! constructed system, per-trial CSV traces, and a JSON summary.
//!
//! The right-hand side is always built as `A * truth`, never supplied
//! independently, so every system is consistent by construction.
//! Given the same config and base seed, every output byte is
//! deterministic; wall-clock timestamps are confined to
//! `metadata.json`.

use std::fs::{self, File};
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{residual_sqrt_k_profile, theorem1_bound, BoundReport};
use crate::engine::{run_with_stride, RunHistory, StepRecord, StopReason, StoppingRule};
use crate::error::{Error, Result};
use crate::market::read_matrix_market;
use crate::matrix::DenseMatrix;
use crate::sampling::derive_trial_seed;
use crate::spectral::SpectralSummary;
use crate::stats::{compensated_sum, quantile_sorted};
use crate::system::LinearSystem;

/// Environment variable consulted when no worker count is configured.
pub const WORKERS_ENV: &str = "KACZMARZ_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixSource {
    Hilbert { n: usize },
    MatrixMarket { path: PathBuf },
    /// Seeded Gaussian test fixture; not tied to any experiment,
    /// provided for the property suites.
    RandomGaussian { rows: usize, cols: usize, seed: u64 },
}

impl MatrixSource {
    pub fn load(&self) -> Result<DenseMatrix> {
        match self {
            MatrixSource::Hilbert { n } => DenseMatrix::hilbert(*n),
            MatrixSource::MatrixMarket { path } => read_matrix_market(path),
            MatrixSource::RandomGaussian { rows, cols, seed } => {
                DenseMatrix::gaussian(*rows, *cols, *seed)
            }
        }
    }
}

/// How to materialize the solution or start vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorSpec {
    Zeros,
    Ones,
    Given(Vec<f64>),
    Random { seed: u64 },
}

impl VectorSpec {
    pub fn materialize(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            VectorSpec::Zeros => Ok(vec![0.0; n]),
            VectorSpec::Ones => Ok(vec![1.0; n]),
            VectorSpec::Given(v) => {
                if v.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "vector spec has length {}, expected {}",
                        v.len(),
                        n
                    )));
                }
                Ok(v.clone())
            }
            VectorSpec::Random { seed } => {
                Ok(DenseMatrix::gaussian(1, n, *seed)?.row(0).to_vec())
            }
        }
    }
}

fn default_x0() -> VectorSpec {
    VectorSpec::Zeros
}

fn default_stride() -> u64 {
    1
}

/// Full description of an ensemble experiment. The JSON config file
/// mirrors this struct field for field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub matrix_source: MatrixSource,
    pub truth_spec: VectorSpec,
    #[serde(default = "default_x0")]
    pub x0_spec: VectorSpec,
    pub stop: StoppingRule,
    pub trials: u64,
    pub base_seed: u64,
    #[serde(default = "default_stride")]
    pub record_stride: u64,
    /// Where the output files go; omit to compute without writing.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Concurrent trial workers; falls back to `KACZMARZ_WORKERS`,
    /// then to one worker per core.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Mean plus order statistics of one quantity at one recorded step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileStats {
    pub mean: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl QuantileStats {
    fn from_samples(samples: &[f64]) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        QuantileStats {
            mean: compensated_sum(samples.iter().copied()) / samples.len() as f64,
            min: sorted[0],
            q25: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q75: quantile_sorted(&sorted, 0.75),
            max: *sorted.last().unwrap(),
        }
    }
}

/// Cross-trial statistics at one recorded step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepAggregate {
    pub step: u64,
    /// Trials still running at this step (early exact hits drop out).
    pub trials: usize,
    pub residual: QuantileStats,
    pub error: Option<QuantileStats>,
}

/// Terminal state of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTerminal {
    pub trial: u64,
    pub seed: u64,
    pub steps: u64,
    pub stop_reason: StopReason,
    pub residual_l2: f64,
    pub residual_linf: f64,
    pub error_l2: Option<f64>,
}

/// Ensemble result: per-step aggregates, terminal statistics, and the
/// spectral/bound cross-reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub steps: Vec<StepAggregate>,
    pub terminal: Vec<TrialTerminal>,
    pub terminal_residual_l2: QuantileStats,
    pub terminal_residual_linf: QuantileStats,
    pub terminal_error_l2: Option<QuantileStats>,
    pub norms: SpectralSummary,
    pub bound: Option<BoundReport>,
}

/// Trial histories alongside the summary, for callers that want the
/// raw traces.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub summary: EnsembleSummary,
    pub histories: Vec<RunHistory>,
}

/// Resolves the worker count: explicit config, then the
/// `KACZMARZ_WORKERS` environment variable, then the rayon default.
pub fn resolve_workers(configured: Option<usize>) -> usize {
    configured
        .or_else(|| {
            std::env::var(WORKERS_ENV)
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0)
}

/// Executes the configured ensemble: `trials` independent seeded runs
/// over a shared read-only system, re-validating the engine's
/// monotonicity and stability accounting trial by trial, then
/// aggregating and (when an output directory is set) writing
/// `trial_<t>.csv`, `final_iterate.csv`, `summary.json`, `bounds.json`,
/// and `metadata.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if cfg.record_stride == 0 {
        return Err(Error::InvalidArgument(
            "record_stride must be at least 1".into(),
        ));
    }
    let matrix = cfg.matrix_source.load()?;
    let n = matrix.cols();
    let truth = cfg.truth_spec.materialize(n)?;
    let x0 = cfg.x0_spec.materialize(n)?;
    let system = LinearSystem::from_truth(matrix, truth)?;

    let workers = resolve_workers(cfg.workers);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;

    let histories: Vec<RunHistory> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                run_with_stride(
                    &system,
                    &x0,
                    &cfg.stop,
                    derive_trial_seed(cfg.base_seed, t),
                    cfg.record_stride,
                )
            })
            .collect::<Result<Vec<_>>>()
    })?;

    for (t, h) in histories.iter().enumerate() {
        if h.monotonicity_violations > 0 || h.stability_violations > 0 {
            return Err(Error::InvalidArgument(format!(
                "trial {t} (seed {}) violated the projection invariants: \
                 {} monotonicity, {} stability",
                h.seed, h.monotonicity_violations, h.stability_violations
            )));
        }
    }

    let norms = SpectralSummary::estimated(system.matrix(), 1e-10)?;
    let bound = match cfg.stop {
        StoppingRule::TargetRatio { epsilon, .. } => Some(theorem1_bound(&norms, epsilon)?),
        _ => None,
    };
    let summary = aggregate(&system, &histories, norms, bound);

    if let Some(dir) = &cfg.output_dir {
        write_outputs(dir, cfg, &system, &histories, &summary)?;
    }
    Ok(ExperimentOutcome { summary, histories })
}

fn aggregate(
    system: &LinearSystem,
    histories: &[RunHistory],
    norms: SpectralSummary,
    bound: Option<BoundReport>,
) -> EnsembleSummary {
    use std::collections::BTreeMap;
    let mut by_step: BTreeMap<u64, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for h in histories {
        for r in &h.records {
            let slot = by_step.entry(r.step).or_default();
            slot.0.push(r.residual);
            if let Some(e) = r.error {
                slot.1.push(e);
            }
        }
    }
    let steps = by_step
        .into_iter()
        .map(|(step, (residuals, errors))| StepAggregate {
            step,
            trials: residuals.len(),
            residual: QuantileStats::from_samples(&residuals),
            error: if errors.is_empty() {
                None
            } else {
                Some(QuantileStats::from_samples(&errors))
            },
        })
        .collect();

    let terminal: Vec<TrialTerminal> = histories
        .iter()
        .enumerate()
        .map(|(t, h)| TrialTerminal {
            trial: t as u64,
            seed: h.seed,
            steps: h.steps,
            stop_reason: h.stop_reason,
            residual_l2: h.terminal_residual(),
            residual_linf: system.residual_norm_inf(&h.final_x),
            error_l2: h.terminal_error(),
        })
        .collect();

    let residual_l2: Vec<f64> = terminal.iter().map(|t| t.residual_l2).collect();
    let residual_linf: Vec<f64> = terminal.iter().map(|t| t.residual_linf).collect();
    let errors: Vec<f64> = terminal.iter().filter_map(|t| t.error_l2).collect();

    EnsembleSummary {
        steps,
        terminal_residual_l2: QuantileStats::from_samples(&residual_l2),
        terminal_residual_linf: QuantileStats::from_samples(&residual_linf),
        terminal_error_l2: if errors.is_empty() {
            None
        } else {
            Some(QuantileStats::from_samples(&errors))
        },
        terminal,
        norms,
        bound,
    }
}

#[derive(Serialize)]
struct BoundsFile<'a> {
    norms: &'a SpectralSummary,
    bound: &'a Option<BoundReport>,
}

#[derive(Serialize)]
struct MetadataFile<'a> {
    created_unix_ms: u128,
    package_version: &'static str,
    config: &'a ExperimentConfig,
}

fn write_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    system: &LinearSystem,
    histories: &[RunHistory],
    summary: &EnsembleSummary,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (t, h) in histories.iter().enumerate() {
        emit_history_csv(h, dir.join(format!("trial_{t}.csv")))?;
    }
    emit_coordinates_csv(&histories[0].final_x, dir.join("final_iterate.csv"))?;

    let summary_path = dir.join("summary.json");
    write_json(&summary_path, summary)?;

    let bounds_path = dir.join("bounds.json");
    write_json(
        &bounds_path,
        &BoundsFile {
            norms: &summary.norms,
            bound: &summary.bound,
        },
    )?;

    let _ = system; // terminal statistics already folded into the summary
    let metadata_path = dir.join("metadata.json");
    write_json(
        &metadata_path,
        &MetadataFile {
            created_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            package_version: env!("CARGO_PKG_VERSION"),
            config: cfg,
        },
    )?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes one run as CSV: header, then one record per recorded step
/// with full double precision (17 significant digits), locale
/// independent. Missing row index (step 0) and unknown error render
/// as empty fields.
pub fn emit_history_csv(history: &RunHistory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_history_csv(&mut w, history).map_err(|e| Error::io(path, e))
}

pub fn write_history_csv<W: Write>(w: &mut W, history: &RunHistory) -> std::io::Result<()> {
    writeln!(w, "step,row_index,residual_norm,error_norm,sqrt_k_residual")?;
    let profile = residual_sqrt_k_profile(history);
    for (r, (_, sqrt_k)) in history.records.iter().zip(profile) {
        let row = r.row.map(|i| i.to_string()).unwrap_or_default();
        let error = r.error.map(|e| format!("{e:.16e}")).unwrap_or_default();
        writeln!(
            w,
            "{},{},{:.16e},{},{:.16e}",
            r.step, row, r.residual, error, sqrt_k
        )?;
    }
    w.flush()
}

/// Reads back a trace written by [`write_history_csv`]; values
/// round-trip bitwise.
pub fn parse_history_csv<R: BufRead>(reader: R) -> Result<Vec<StepRecord>> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty csv".into()))?
        .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    if header != "step,row_index,residual_norm,error_norm,sqrt_k_residual" {
        return Err(Error::InvalidArgument(format!(
            "unexpected csv header '{header}'"
        )));
    }
    let mut records = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::InvalidArgument(format!(
                "csv record has {} fields: '{line}'",
                fields.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::InvalidArgument(format!("csv value '{s}'")))
        };
        records.push(StepRecord {
            step: fields[0]
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("csv step '{}'", fields[0])))?,
            row: if fields[1].is_empty() {
                None
            } else {
                Some(fields[1].parse().map_err(|_| {
                    Error::InvalidArgument(format!("csv row '{}'", fields[1]))
                })?)
            },
            residual: parse_f(fields[2])?,
            error: if fields[3].is_empty() {
                None
            } else {
                Some(parse_f(fields[3])?)
            },
        });
    }
    Ok(records)
}

/// Writes the final iterate as `index,value` rows, one per coordinate.
pub fn emit_coordinates_csv(x: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "index,value").map_err(|e| Error::io(path, e))?;
    for (i, v) in x.iter().enumerate() {
        writeln!(w, "{i},{v:.16e}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// The exact configuration of the ill-conditioned showcase run:
/// the 1000-by-1000 Hilbert system with all-ones solution, zero start,
/// ten thousand projections, recorded every fifth step.
pub fn hilbert_demo_config(seed: u64, output_dir: Option<PathBuf>) -> ExperimentConfig {
    ExperimentConfig {
        matrix_source: MatrixSource::Hilbert { n: 1000 },
        truth_spec: VectorSpec::Ones,
        x0_spec: VectorSpec::Zeros,
        stop: StoppingRule::MaxSteps(10_000),
        trials: 1,
        base_seed: seed,
        record_stride: 5,
        output_dir,
        workers: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run;
    use std::io::Cursor;

    fn small_cfg(trials: u64, output_dir: Option<PathBuf>) -> ExperimentConfig {
        ExperimentConfig {
            matrix_source: MatrixSource::Hilbert { n: 8 },
            truth_spec: VectorSpec::Ones,
            x0_spec: VectorSpec::Zeros,
            stop: StoppingRule::MaxSteps(200),
            trials,
            base_seed: 42,
            record_stride: 10,
            output_dir,
            workers: Some(1),
        }
    }

    #[test]
    fn experiment_is_deterministic() {
        let a = run_experiment(&small_cfg(3, None)).unwrap();
        let b = run_experiment(&small_cfg(3, None)).unwrap();
        assert_eq!(a.histories, b.histories);
        assert_eq!(
            serde_json::to_string(&a.summary).unwrap(),
            serde_json::to_string(&b.summary).unwrap()
        );
    }

    #[test]
    fn parallel_matches_sequential() {
        let mut cfg = small_cfg(4, None);
        let sequential = run_experiment(&cfg).unwrap();
        cfg.workers = Some(4);
        let parallel = run_experiment(&cfg).unwrap();
        assert_eq!(sequential.histories, parallel.histories);
    }

    #[test]
    fn quantiles_are_nondecreasing() {
        let outcome = run_experiment(&small_cfg(5, None)).unwrap();
        for agg in &outcome.summary.steps {
            let r = &agg.residual;
            assert!(r.min <= r.q25 && r.q25 <= r.median);
            assert!(r.median <= r.q75 && r.q75 <= r.max);
        }
    }

    #[test]
    fn output_files_are_written_and_stable() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_cfg(2, Some(dir.path().to_path_buf()));
        run_experiment(&cfg).unwrap();
        for name in [
            "trial_0.csv",
            "trial_1.csv",
            "final_iterate.csv",
            "summary.json",
            "bounds.json",
            "metadata.json",
        ] {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
        let summary_bytes = fs::read(dir.path().join("summary.json")).unwrap();
        let trial_bytes = fs::read(dir.path().join("trial_0.csv")).unwrap();

        let dir2 = tempfile::tempdir().unwrap();
        let cfg2 = small_cfg(2, Some(dir2.path().to_path_buf()));
        run_experiment(&cfg2).unwrap();
        assert_eq!(summary_bytes, fs::read(dir2.path().join("summary.json")).unwrap());
        assert_eq!(trial_bytes, fs::read(dir2.path().join("trial_0.csv")).unwrap());
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let sys = LinearSystem::from_truth(DenseMatrix::hilbert(6).unwrap(), vec![1.0; 6])
            .unwrap();
        let h = run(&sys, &[0.0; 6], &StoppingRule::MaxSteps(57), 9).unwrap();
        let mut buf = Vec::new();
        write_history_csv(&mut buf, &h).unwrap();
        let parsed = parse_history_csv(Cursor::new(&buf)).unwrap();
        assert_eq!(parsed, h.records);
    }

    #[test]
    fn empty_history_yields_header_only() {
        let history = RunHistory {
            records: vec![],
            final_x: vec![],
            steps: 0,
            stop_reason: StopReason::StepLimit,
            seed: 0,
            monotonicity_violations: 0,
            stability_violations: 0,
        };
        let mut buf = Vec::new();
        write_history_csv(&mut buf, &history).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "step,row_index,residual_norm,error_norm,sqrt_k_residual\n"
        );
    }

    #[test]
    fn coordinates_snapshot_zero_steps_is_all_zeros() {
        let cfg = ExperimentConfig {
            stop: StoppingRule::MaxSteps(0),
            ..small_cfg(1, None)
        };
        let outcome = run_experiment(&cfg).unwrap();
        assert!(outcome.histories[0].final_x.iter().all(|&v| v == 0.0));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("coords.csv");
        emit_coordinates_csv(&outcome.histories[0].final_x, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("index,value"));
        for (i, line) in lines.enumerate() {
            assert!(line.starts_with(&format!("{i},")));
            assert!(line.ends_with("0.0000000000000000e0"));
        }
    }

    #[test]
    fn coordinates_snapshot_at_truth_matches_truth() {
        let cfg = ExperimentConfig {
            matrix_source: MatrixSource::Hilbert { n: 4 },
            truth_spec: VectorSpec::Ones,
            x0_spec: VectorSpec::Ones,
            stop: StoppingRule::MaxSteps(10),
            trials: 1,
            base_seed: 0,
            record_stride: 1,
            output_dir: None,
            workers: Some(1),
        };
        let outcome = run_experiment(&cfg).unwrap();
        assert_eq!(outcome.histories[0].final_x, vec![1.0; 4]);
        assert_eq!(
            outcome.histories[0].stop_reason,
            StopReason::ExactSolution
        );
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = small_cfg(2, Some(PathBuf::from("out")));
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn config_defaults_apply() {
        let text = r#"{
            "matrix_source": {"hilbert": {"n": 4}},
            "truth_spec": "ones",
            "stop": {"max_steps": 10},
            "trials": 1,
            "base_seed": 7
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.x0_spec, VectorSpec::Zeros);
        assert_eq!(cfg.record_stride, 1);
        assert_eq!(cfg.output_dir, None);
    }

    #[test]
    fn rejects_degenerate_configs() {
        let mut cfg = small_cfg(0, None);
        assert!(run_experiment(&cfg).is_err());
        cfg.trials = 1;
        cfg.record_stride = 0;
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn vector_spec_materialization() {
        assert_eq!(VectorSpec::Zeros.materialize(3).unwrap(), vec![0.0; 3]);
        assert_eq!(VectorSpec::Ones.materialize(2).unwrap(), vec![1.0; 2]);
        assert!(VectorSpec::Given(vec![1.0]).materialize(2).is_err());
        let a = VectorSpec::Random { seed: 3 }.materialize(4).unwrap();
        let b = VectorSpec::Random { seed: 3 }.materialize(4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bound_report_present_for_target_ratio_runs() {
        let cfg = ExperimentConfig {
            stop: StoppingRule::TargetRatio {
                epsilon: 0.3,
                max_steps: 10_000,
            },
            ..small_cfg(1, None)
        };
        let outcome = run_experiment(&cfg).unwrap();
        let bound = outcome.summary.bound.expect("bound report");
        assert_eq!(bound.epsilon, 0.3);
    }
}

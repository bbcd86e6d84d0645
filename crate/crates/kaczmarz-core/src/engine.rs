//! The projection step and the seeded iteration driver.
//!
//! One step projects the iterate onto the hyperplane of a sampled
//! equation:
//!
//! ```text
//! x' = x + (b_i - <a_i, x>) / ||a_i||^2 * a_i
//! ```
//!
//! Projections never increase the distance to the solution, so runs
//! with a known solution also account for monotonicity and stability
//! violations (there must be none; the counters exist so harnesses can
//! assert that).
//!
//! A single run is strictly sequential. Runs with different seeds are
//! independent and may execute concurrently over a shared system.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::norm;
use crate::sampling::SamplingDistribution;
use crate::system::LinearSystem;

/// Residual threshold factor for declaring an exact hit:
/// `||Ax - b|| <= 1e-13 * (1 + ||b||)` ends the run early.
pub const EXACT_HIT_FACTOR: f64 = 1e-13;

/// Per-step relative slack allowed on the nonincreasing error check.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Absolute slack on the iterate-size bound `||x_k|| <= 2||x|| + ||x_0||`.
pub const STABILITY_SLACK: f64 = 1e-9;

/// When to stop iterating. Rules that watch the residual evaluate it
/// on recorded steps only; the full residual costs `O(mn)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingRule {
    /// Run exactly this many steps (earlier on an exact hit).
    MaxSteps(u64),
    /// Stop once `||Ax_k - b|| <= threshold`, capped at `max_steps`.
    ResidualBelow { threshold: f64, max_steps: u64 },
    /// Stop once `||Ax_k - b|| <= epsilon * ||x_0 - x||`, capped at
    /// `max_steps`. Requires a known solution.
    TargetRatio { epsilon: f64, max_steps: u64 },
}

impl StoppingRule {
    pub fn step_limit(&self) -> u64 {
        match self {
            StoppingRule::MaxSteps(k) => *k,
            StoppingRule::ResidualBelow { max_steps, .. }
            | StoppingRule::TargetRatio { max_steps, .. } => *max_steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The step limit was exhausted.
    StepLimit,
    /// A `ResidualBelow` threshold was met.
    ResidualBelow,
    /// A `TargetRatio` target was met.
    TargetReached,
    /// The iterate reached the solution to working precision.
    ExactSolution,
}

/// One recorded step: the row projected onto (absent for the step-0
/// snapshot), the residual, and the error when the solution is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub row: Option<usize>,
    pub residual: f64,
    pub error: Option<f64>,
}

/// Trace of a run plus terminal state and invariant accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub records: Vec<StepRecord>,
    pub final_x: Vec<f64>,
    pub steps: u64,
    pub stop_reason: StopReason,
    pub seed: u64,
    /// Steps where the error grew beyond the allowed rounding slack.
    pub monotonicity_violations: u64,
    /// Steps where `||x_k||` exceeded `2||x|| + ||x_0||` plus slack.
    pub stability_violations: u64,
}

impl RunHistory {
    pub fn initial_residual(&self) -> f64 {
        self.records[0].residual
    }

    pub fn terminal_residual(&self) -> f64 {
        self.records.last().unwrap().residual
    }

    pub fn terminal_error(&self) -> Option<f64> {
        self.records.last().unwrap().error
    }
}

/// Iterate, step counter, and the run-confined generator state.
#[derive(Debug, Clone)]
pub struct IterateState {
    x: Vec<f64>,
    step: u64,
    rng: ChaCha8Rng,
    last_row: Option<usize>,
}

impl IterateState {
    pub fn new(x0: Vec<f64>, seed: u64) -> Self {
        IterateState {
            x: x0,
            step: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            last_row: None,
        }
    }

    #[inline]
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    #[inline]
    pub fn step(&self) -> u64 {
        self.step
    }

    #[inline]
    pub fn last_row(&self) -> Option<usize> {
        self.last_row
    }
}

/// Orthogonal projection of `w` onto the hyperplane of equation `i`.
pub fn project_onto_row(w: &[f64], system: &LinearSystem, i: usize) -> Result<Vec<f64>> {
    if i >= system.rows() {
        return Err(Error::InvalidArgument(format!(
            "row {i} out of range for a {}-row system",
            system.rows()
        )));
    }
    if w.len() != system.unknowns() {
        return Err(Error::DimensionMismatch(format!(
            "iterate has length {}, expected {}",
            w.len(),
            system.unknowns()
        )));
    }
    let norm_sq = system.row_norm_sq(i);
    if norm_sq <= 0.0 {
        return Err(Error::ZeroRow(i));
    }
    let mut out = w.to_vec();
    let scale = system.equation_gap(i, w) / norm_sq;
    for (x, a) in out.iter_mut().zip(system.matrix().row(i)) {
        *x += scale * a;
    }
    Ok(out)
}

/// Samples a row and projects onto it, advancing the state. Returns
/// the chosen row.
pub fn kaczmarz_step(
    state: &mut IterateState,
    system: &LinearSystem,
    dist: &SamplingDistribution,
) -> usize {
    let row = dist.sample(&mut state.rng);
    let scale = system.equation_gap(row, &state.x) / system.row_norm_sq(row);
    for (x, a) in state.x.iter_mut().zip(system.matrix().row(row)) {
        *x += scale * a;
    }
    state.step += 1;
    state.last_row = Some(row);
    row
}

/// Advances `steps` projections from `x0` and returns the final
/// iterate, with no trace or residual bookkeeping. This is the cheap
/// path the Monte Carlo checks drive millions of times.
pub fn iterate(
    system: &LinearSystem,
    dist: &SamplingDistribution,
    x0: &[f64],
    steps: u64,
    seed: u64,
) -> Vec<f64> {
    let mut state = IterateState::new(x0.to_vec(), seed);
    for _ in 0..steps {
        kaczmarz_step(&mut state, system, dist);
    }
    state.x
}

/// Runs the method with the default recording stride
/// `max(1, limit / 2000)`, which matches the resolution the experiment
/// plots need without paying the full `O(mn)` residual every step.
pub fn run(
    system: &LinearSystem,
    x0: &[f64],
    stop: &StoppingRule,
    seed: u64,
) -> Result<RunHistory> {
    let stride = (stop.step_limit() / 2000).max(1);
    run_with_stride(system, x0, stop, seed, stride)
}

/// Runs the method recording every `stride`-th step plus the terminal
/// step. Residual-based stopping rules are evaluated on recorded steps
/// only; the exact-hit error check runs every step when the solution
/// is known.
pub fn run_with_stride(
    system: &LinearSystem,
    x0: &[f64],
    stop: &StoppingRule,
    seed: u64,
    stride: u64,
) -> Result<RunHistory> {
    if x0.len() != system.unknowns() {
        return Err(Error::DimensionMismatch(format!(
            "x0 has length {}, expected {}",
            x0.len(),
            system.unknowns()
        )));
    }
    if let Some(bad) = x0.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteEntry {
            row: bad,
            col: 0,
            value: x0[bad],
        });
    }
    if matches!(stop, StoppingRule::TargetRatio { .. }) && system.truth().is_none() {
        return Err(Error::TruthRequired);
    }
    if let StoppingRule::ResidualBelow { threshold, .. } = stop {
        if !(*threshold >= 0.0) {
            return Err(Error::InvalidArgument(
                "residual threshold must be nonnegative".into(),
            ));
        }
    }
    if let StoppingRule::TargetRatio { epsilon, .. } = stop {
        if !(*epsilon > 0.0) {
            return Err(Error::InvalidArgument(
                "target ratio must be positive".into(),
            ));
        }
    }
    let stride = stride.max(1);
    let limit = stop.step_limit();
    let exact_tol = EXACT_HIT_FACTOR * (1.0 + norm(system.rhs()));

    let dist = SamplingDistribution::for_system(system)?;
    let mut state = IterateState::new(x0.to_vec(), seed);

    let truth_known = system.truth().is_some();
    let initial_error = system.error_norm(x0);
    let target = match stop {
        StoppingRule::TargetRatio { epsilon, .. } => Some(epsilon * initial_error.unwrap()),
        _ => None,
    };
    let stability_bound = system
        .truth()
        .map(|t| 2.0 * norm(t) + norm(x0) + STABILITY_SLACK);

    let mut history = RunHistory {
        records: Vec::new(),
        final_x: Vec::new(),
        steps: 0,
        stop_reason: StopReason::StepLimit,
        seed,
        monotonicity_violations: 0,
        stability_violations: 0,
    };

    let initial_residual = system.residual_norm(x0);
    history.records.push(StepRecord {
        step: 0,
        row: None,
        residual: initial_residual,
        error: initial_error,
    });

    let mut prev_error = initial_error;
    let exact_at = |error: Option<f64>, residual: f64| -> bool {
        error == Some(0.0) || residual <= exact_tol
    };
    // The start vector may already satisfy a rule.
    let initial_reason = if exact_at(initial_error, initial_residual) {
        Some(StopReason::ExactSolution)
    } else if matches!(stop, StoppingRule::ResidualBelow { threshold, .. } if initial_residual <= *threshold)
    {
        Some(StopReason::ResidualBelow)
    } else if matches!(target, Some(t) if initial_residual <= t) {
        Some(StopReason::TargetReached)
    } else {
        None
    };
    if let Some(reason) = initial_reason {
        history.stop_reason = reason;
        history.final_x = state.x;
        return Ok(history);
    }

    let mut reason = StopReason::StepLimit;
    while state.step < limit {
        let row = kaczmarz_step(&mut state, system, &dist);
        let k = state.step;

        let error = if truth_known {
            let e = system.error_norm(&state.x);
            if let (Some(curr), Some(prev)) = (e, prev_error) {
                if curr > prev * (1.0 + MONOTONE_SLACK) {
                    history.monotonicity_violations += 1;
                }
            }
            if let Some(bound) = stability_bound {
                if norm(&state.x) > bound {
                    history.stability_violations += 1;
                }
            }
            prev_error = e;
            e
        } else {
            None
        };

        let recorded = k % stride == 0 || k == limit;
        let mut stop_now = false;
        if error == Some(0.0) {
            reason = StopReason::ExactSolution;
            stop_now = true;
        }
        if recorded || stop_now {
            let residual = system.residual_norm(&state.x);
            if !stop_now {
                if residual <= exact_tol {
                    reason = StopReason::ExactSolution;
                    stop_now = true;
                } else if let StoppingRule::ResidualBelow { threshold, .. } = stop {
                    if residual <= *threshold {
                        reason = StopReason::ResidualBelow;
                        stop_now = true;
                    }
                } else if let Some(t) = target {
                    if residual <= t {
                        reason = StopReason::TargetReached;
                        stop_now = true;
                    }
                }
            }
            history.records.push(StepRecord {
                step: k,
                row: Some(row),
                residual,
                error,
            });
        }
        if stop_now {
            break;
        }
    }

    // Make sure the terminal step carries a record.
    if history.records.last().map(|r| r.step) != Some(state.step) {
        history.records.push(StepRecord {
            step: state.step,
            row: state.last_row,
            residual: system.residual_norm(&state.x),
            error: prev_error,
        });
    }
    history.steps = state.step;
    history.stop_reason = reason;
    history.final_x = state.x;
    Ok(history)
}

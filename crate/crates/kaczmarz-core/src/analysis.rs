//! Closed-form iteration bounds and statistical verification of the
//! expectation identities the method satisfies.
//!
//! Every check reports both sides of its identity or inequality and an
//! explicit pass verdict. Exact enumeration is used where a single
//! step can be averaged over all rows; multi-step expectations fall
//! back to seeded Monte Carlo with a four-standard-error acceptance
//! band (false-failure odds below ~1 in 15,000 per check). Logarithms
//! are natural throughout, and real-valued bounds are reported as
//! ceilings since projection counts are integers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{iterate, project_onto_row, RunHistory};
use crate::error::{Error, Result};
use crate::matrix::{distance, dot, norm};
use crate::sampling::{derive_trial_seed, SamplingDistribution};
use crate::spectral::{svd_small, SpectralSummary};
use crate::stats::{compensated_sum, mean_and_std_err};
use crate::system::LinearSystem;

/// Pass threshold on the relative error of the exact one-step
/// expectation identity, which is an equation, not a bound.
pub const ONE_STEP_IDENTITY_TOL: f64 = 1e-10;

/// Pass threshold for exact-enumeration singular-direction checks.
pub const DIRECTION_IDENTITY_TOL: f64 = 1e-8;

/// Width of the Monte Carlo acceptance band, in standard errors.
pub const MC_STD_ERRORS: f64 = 4.0;

/// Which side of `epsilon` the smallest singular value falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundRegime {
    EpsilonAtLeastSigmaMin,
    EpsilonBelowSigmaMin,
    SigmaMinUnknown,
}

/// Iteration-count bounds for reaching `||Ax_k - b|| <= eps * ||x_0 - x||`.
///
/// `k_theorem1` is the conditioning-independent bound
/// `ceil(2 ln(||A||/eps) * ||A||_F^2 / eps^2)`; `k_sigma_min` is the
/// variant with `sigma_min^2` in the denominator, available when the
/// smallest singular value is known. Both are zero when
/// `eps >= ||A||`, where the log factor vanishes and the start vector
/// may already satisfy the guarantee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub epsilon: f64,
    pub k_theorem1: u64,
    pub k_sigma_min: Option<u64>,
    /// The smaller of the two available bounds.
    pub operative_bound: u64,
    pub which_regime: BoundRegime,
    pub epsilon_at_least_operator_norm: bool,
    pub norms_used: SpectralSummary,
}

/// How an identity check obtained its left-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMethod {
    ExactEnumeration,
    MonteCarlo { trials: u64, std_err: f64 },
}

/// Both sides of a checked identity or inequality plus the verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityCheckResult {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub method: CheckMethod,
    pub passed: bool,
}

impl IdentityCheckResult {
    fn new(lhs: f64, rhs: f64, method: CheckMethod, passed: bool) -> Self {
        let abs_err = (lhs - rhs).abs();
        let denom = lhs.abs().max(rhs.abs());
        let rel_err = if abs_err == 0.0 { 0.0 } else { abs_err / denom };
        IdentityCheckResult {
            lhs,
            rhs,
            abs_err,
            rel_err,
            method,
            passed,
        }
    }
}

fn ceil_count(v: f64) -> u64 {
    if !v.is_finite() {
        return u64::MAX;
    }
    let c = v.ceil();
    if c <= 0.0 {
        0
    } else if c >= u64::MAX as f64 {
        u64::MAX
    } else {
        c as u64
    }
}

/// Evaluates the iteration bounds at accuracy `eps` from a spectral
/// summary. `eps >= ||A||` yields zero bounds with the explanatory
/// flag set.
pub fn theorem1_bound(norms: &SpectralSummary, eps: f64) -> Result<BoundReport> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    if !(norms.operator_norm > 0.0) || !(norms.frobenius_norm > 0.0) {
        return Err(Error::InvalidArgument(
            "bounds require positive operator and Frobenius norms".into(),
        ));
    }
    let vacuous = eps >= norms.operator_norm;
    let f2 = norms.frobenius_norm * norms.frobenius_norm;
    let log_term = (norms.operator_norm / eps).ln();
    let k_theorem1 = if vacuous {
        0
    } else {
        ceil_count(2.0 * log_term * f2 / (eps * eps))
    };
    let k_sigma_min = norms.sigma_min.map(|s| {
        if vacuous || s <= 0.0 {
            0
        } else {
            ceil_count(2.0 * log_term * f2 / (s * s))
        }
    });
    let operative_bound = match k_sigma_min {
        Some(ks) => k_theorem1.min(ks),
        None => k_theorem1,
    };
    let which_regime = match norms.sigma_min {
        None => BoundRegime::SigmaMinUnknown,
        Some(s) if eps < s => BoundRegime::EpsilonBelowSigmaMin,
        Some(_) => BoundRegime::EpsilonAtLeastSigmaMin,
    };
    Ok(BoundReport {
        epsilon: eps,
        k_theorem1,
        k_sigma_min,
        operative_bound,
        which_regime,
        epsilon_at_least_operator_norm: vacuous,
        norms_used: norms.clone(),
    })
}

/// Checks the exact one-step expectation identity: averaging
/// `||x' - x||^2` over all row choices, weighted by the sampling law,
/// equals
///
/// ```text
/// (1 - ||A d||^2 / (||A||_F^2 ||d||^2)) * ||d||^2,   d = x_k - x.
/// ```
///
/// The left side is enumerated through the engine's own projection,
/// so the check exercises the actual transition law.
pub fn lemma1_exact_check(system: &LinearSystem, xk: &[f64]) -> Result<IdentityCheckResult> {
    let truth = system.truth().ok_or(Error::TruthRequired)?;
    if xk.len() != system.unknowns() {
        return Err(Error::DimensionMismatch(format!(
            "iterate has length {}, expected {}",
            xk.len(),
            system.unknowns()
        )));
    }
    let d: Vec<f64> = xk.iter().zip(truth).map(|(a, b)| a - b).collect();
    let d_norm_sq = dot(&d, &d);
    if d_norm_sq == 0.0 {
        return Err(Error::InvalidArgument(
            "iterate coincides with the solution; the normalized form divides by zero".into(),
        ));
    }
    let f2: f64 = compensated_sum(system.row_norms_sq().iter().copied());

    let lhs = compensated_sum((0..system.rows()).map(|i| {
        let projected = project_onto_row(xk, system, i).expect("row index in range");
        let weight = system.row_norm_sq(i) / f2;
        let dist = distance(&projected, truth);
        weight * dist * dist
    }));

    let ad = system.matrix().matvec(&d);
    let ad_norm_sq = dot(&ad, &ad);
    let rhs = (1.0 - ad_norm_sq / (f2 * d_norm_sq)) * d_norm_sq;

    let abs = (lhs - rhs).abs();
    let passed = abs <= ONE_STEP_IDENTITY_TOL * lhs.abs().max(rhs.abs());
    Ok(IdentityCheckResult::new(
        lhs,
        rhs,
        CheckMethod::ExactEnumeration,
        passed,
    ))
}

/// Checks the singular-direction expectation: the mean projection of
/// `x_k - x` on the right singular vector `v_ell` equals
/// `(1 - sigma_ell^2/||A||_F^2)^k <x_0 - x, v_ell>`.
///
/// With `k == 1` the expectation is enumerated exactly over all rows;
/// for larger `k` it is estimated over `trials >= 10_000` independent
/// seeded runs and accepted within four standard errors.
pub fn singular_direction_expectation_check(
    system: &LinearSystem,
    x0: &[f64],
    ell: usize,
    k: u64,
    trials: u64,
    seed: u64,
) -> Result<IdentityCheckResult> {
    let truth = system.truth().ok_or(Error::TruthRequired)?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let summary = svd_small(system.matrix())?;
    let values = summary.singular_values.as_ref().expect("exact summary");
    if ell >= values.len() {
        return Err(Error::InvalidArgument(format!(
            "singular direction {ell} out of range (have {})",
            values.len()
        )));
    }
    let v = summary.right_vector(ell).expect("exact summary");
    let f2 = summary.frobenius_norm * summary.frobenius_norm;
    let sigma = values[ell];

    let d0: Vec<f64> = x0.iter().zip(truth).map(|(a, b)| a - b).collect();
    let initial_projection = dot(&d0, v);
    let factor = 1.0 - sigma * sigma / f2;
    let rhs = factor.powf(k as f64) * initial_projection;
    let scale = norm(&d0);

    if k == 1 {
        let total: f64 = compensated_sum(system.row_norms_sq().iter().copied());
        let lhs = compensated_sum((0..system.rows()).map(|i| {
            let projected = project_onto_row(x0, system, i).expect("row index in range");
            let diff: Vec<f64> = projected.iter().zip(truth).map(|(a, b)| a - b).collect();
            (system.row_norm_sq(i) / total) * dot(&diff, v)
        }));
        let abs = (lhs - rhs).abs();
        let passed =
            abs <= (DIRECTION_IDENTITY_TOL * lhs.abs().max(rhs.abs())).max(1e-12 * scale);
        return Ok(IdentityCheckResult::new(
            lhs,
            rhs,
            CheckMethod::ExactEnumeration,
            passed,
        ));
    }

    if trials < 10_000 {
        return Err(Error::InvalidArgument(
            "Monte Carlo mode needs at least 10,000 trials".into(),
        ));
    }
    let dist = SamplingDistribution::for_system(system)?;
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let x = iterate(system, &dist, x0, k, derive_trial_seed(seed, t));
            let diff: Vec<f64> = x.iter().zip(truth).map(|(a, b)| a - b).collect();
            dot(&diff, v)
        })
        .collect();
    let (lhs, std_err) = mean_and_std_err(&samples);
    let passed = (lhs - rhs).abs() <= MC_STD_ERRORS * std_err + 1e-13 * (rhs.abs() + scale);
    Ok(IdentityCheckResult::new(
        lhs,
        rhs,
        CheckMethod::MonteCarlo { trials, std_err },
        passed,
    ))
}

/// Checks that the Monte Carlo mean of `||x_k - x||^2` does not exceed
/// the conditioning-dependent decay bound
/// `(1 - sigma_min^2/||A||_F^2)^k ||x_0 - x||^2` beyond four relative
/// standard errors.
pub fn strohmer_vershynin_rate_check(
    system: &LinearSystem,
    x0: &[f64],
    k: u64,
    trials: u64,
    seed: u64,
) -> Result<IdentityCheckResult> {
    let truth = system.truth().ok_or(Error::TruthRequired)?;
    if trials < 2 {
        return Err(Error::InvalidArgument("need at least two trials".into()));
    }
    let summary = svd_small(system.matrix())?;
    let sigma_min = summary.sigma_min.expect("exact summary");
    let f2 = summary.frobenius_norm * summary.frobenius_norm;
    let err0 = distance(x0, truth);
    let rhs = (1.0 - sigma_min * sigma_min / f2).powf(k as f64) * err0 * err0;

    let dist = SamplingDistribution::for_system(system)?;
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let x = iterate(system, &dist, x0, k, derive_trial_seed(seed, t));
            let e = distance(&x, truth);
            e * e
        })
        .collect();
    let (lhs, std_err) = mean_and_std_err(&samples);
    let passed = if lhs <= 0.0 {
        true
    } else {
        lhs <= rhs * (1.0 + MC_STD_ERRORS * std_err / lhs)
    };
    Ok(IdentityCheckResult::new(
        lhs,
        rhs,
        CheckMethod::MonteCarlo { trials, std_err },
        passed,
    ))
}

/// Output of [`theorem2_diagnostic`]: the inequality check plus the
/// empirical per-step probabilities and how many runs were excluded
/// for reaching the solution exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogDecayDiagnostic {
    pub check: IdentityCheckResult,
    pub excluded_runs: usize,
    pub per_step_probabilities: Vec<f64>,
}

/// Evaluates both sides of the logarithmic decay estimate over an
/// ensemble of stride-1 runs of a common length `k`:
///
/// ```text
/// mean ln(||x_k - x|| / ||x_0 - x||)
///     <= 1/2 ln(1 - eps^2/||A||_F^2) * sum_{i<k} P_i,
/// ```
///
/// where `P_i` is the observed frequency of
/// `||A x_i - b|| / ||x_i - x|| >= eps`. The ratio uses the current
/// error in the denominator, which is the quantity whose decay the
/// estimate controls. Runs whose error hits zero anywhere are excluded
/// and counted; the bound presumes no exact hit is reachable.
pub fn theorem2_diagnostic(
    system: &LinearSystem,
    histories: &[RunHistory],
    eps: f64,
) -> Result<LogDecayDiagnostic> {
    system.truth().ok_or(Error::TruthRequired)?;
    if histories.is_empty() {
        return Err(Error::InvalidArgument("empty ensemble".into()));
    }
    let fro = system.matrix().frobenius_norm();
    let f2 = fro * fro;
    if !(eps > 0.0) || eps * eps >= f2 {
        return Err(Error::InvalidArgument(
            "eps must satisfy 0 < eps < ||A||_F".into(),
        ));
    }
    let k = histories
        .iter()
        .map(|h| h.steps)
        .max()
        .expect("nonempty ensemble") as usize;
    if k == 0 {
        return Err(Error::InvalidArgument("runs took no steps".into()));
    }

    let mut excluded = 0usize;
    let mut included: Vec<&RunHistory> = Vec::with_capacity(histories.len());
    for h in histories {
        if h.steps as usize != k {
            excluded += 1; // stopped early, necessarily on an exact hit
            continue;
        }
        if h.records.len() != k + 1
            || h.records.iter().enumerate().any(|(i, r)| r.step != i as u64)
        {
            return Err(Error::InvalidArgument(
                "diagnostic needs stride-1 histories with a record at every step".into(),
            ));
        }
        let errors_ok = h.records.iter().all(|r| match r.error {
            Some(e) => e > 0.0,
            None => false,
        });
        if errors_ok {
            included.push(h);
        } else {
            excluded += 1;
        }
    }
    if included.is_empty() {
        return Err(Error::InvalidArgument(
            "every run was excluded (exact hits or missing errors)".into(),
        ));
    }

    let log_ratios: Vec<f64> = included
        .iter()
        .map(|h| {
            let e0 = h.records[0].error.unwrap();
            let ek = h.records[k].error.unwrap();
            (ek / e0).ln()
        })
        .collect();
    let (lhs, std_err) = mean_and_std_err(&log_ratios);

    let per_step_probabilities: Vec<f64> = (0..k)
        .map(|i| {
            let hits = included
                .iter()
                .filter(|h| {
                    let r = &h.records[i];
                    r.residual / r.error.unwrap() >= eps
                })
                .count();
            hits as f64 / included.len() as f64
        })
        .collect();
    let probability_sum = compensated_sum(per_step_probabilities.iter().copied());
    let rhs = 0.5 * (-eps * eps / f2).ln_1p() * probability_sum;

    let passed = lhs <= rhs + MC_STD_ERRORS * std_err;
    let check = IdentityCheckResult::new(
        lhs,
        rhs,
        CheckMethod::MonteCarlo {
            trials: included.len() as u64,
            std_err,
        },
        passed,
    );
    Ok(LogDecayDiagnostic {
        check,
        excluded_runs: excluded,
        per_step_probabilities,
    })
}

/// The flatness transform of a recorded trace: `(k, sqrt(k) * ||Ax_k - b||)`
/// per recorded step. Emitted for plotting and for the bounded-median
/// decay check; carries no verdict of its own.
pub fn residual_sqrt_k_profile(history: &RunHistory) -> Vec<(u64, f64)> {
    history
        .records
        .iter()
        .map(|r| (r.step, (r.step as f64).sqrt() * r.residual))
        .collect()
}

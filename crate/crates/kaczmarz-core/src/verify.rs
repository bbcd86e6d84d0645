//! Built-in verification suites over fixture matrices.
//!
//! Each suite drives one family of analysis checks against seeded
//! fixtures (Gaussian systems and small Hilbert blocks) and returns a
//! labelled result per case. The command-line `verify` subcommand
//! prints these as JSON lines; the acceptance tests assert on them
//! directly.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    lemma1_exact_check, singular_direction_expectation_check, strohmer_vershynin_rate_check,
    theorem2_diagnostic, CheckMethod, IdentityCheckResult,
};
use crate::engine::{run_with_stride, RunHistory, StoppingRule};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::sampling::derive_trial_seed;
use crate::spectral::svd_small;
use crate::system::LinearSystem;

/// One labelled check outcome.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteCheck {
    pub suite: &'static str,
    pub case: String,
    pub result: IdentityCheckResult,
}

impl SuiteCheck {
    pub fn passed(&self) -> bool {
        self.result.passed
    }
}

/// Independent sub-stream `i` of purpose `tag` under `seed`.
fn sub_seed(seed: u64, tag: u64, i: u64) -> u64 {
    derive_trial_seed(derive_trial_seed(seed, tag), i)
}

fn random_system(seed: u64, tag: u64, i: u64, rows: usize, cols: usize) -> Result<LinearSystem> {
    let a = DenseMatrix::gaussian(rows, cols, sub_seed(seed, tag, 2 * i))?;
    let truth = DenseMatrix::gaussian(1, cols, sub_seed(seed, tag, 2 * i + 1))?;
    LinearSystem::from_truth(a, truth.row(0).to_vec())
}

/// One-step expectation identity on 100 seeded 8x5 Gaussian systems,
/// 10 random iterates each. Reports the worst iterate per system.
pub fn lemma1_suite(seed: u64) -> Result<Vec<SuiteCheck>> {
    (0..100u64)
        .map(|i| {
            let sys = random_system(seed, 1, i, 8, 5)?;
            let mut worst: Option<IdentityCheckResult> = None;
            for j in 0..10u64 {
                let xk = DenseMatrix::gaussian(1, 5, sub_seed(seed, 2, i * 10 + j))?;
                let r = lemma1_exact_check(&sys, xk.row(0))?;
                let replace = match &worst {
                    None => true,
                    Some(w) => !r.passed || r.rel_err > w.rel_err,
                };
                if replace {
                    worst = Some(r);
                }
            }
            Ok(SuiteCheck {
                suite: "lemma1",
                case: format!("system_{i:03}"),
                result: worst.expect("ten iterates"),
            })
        })
        .collect()
}

/// Singular-direction expectation: exact one-step enumeration on 25
/// seeded 6x4 Gaussian systems for every direction, then Monte Carlo
/// on the 6x6 Hilbert system at 10 and 50 steps for every direction.
pub fn singular_direction_suite(seed: u64, trials: u64) -> Result<Vec<SuiteCheck>> {
    let mut checks = Vec::new();
    for i in 0..25u64 {
        let sys = random_system(seed, 3, i, 6, 4)?;
        let x0 = DenseMatrix::gaussian(1, 4, sub_seed(seed, 4, i))?;
        for ell in 0..4 {
            let result = singular_direction_expectation_check(&sys, x0.row(0), ell, 1, 0, 0)?;
            checks.push(SuiteCheck {
                suite: "svd-direction",
                case: format!("exact_system_{i:02}_direction_{ell}"),
                result,
            });
        }
    }
    let hilbert = LinearSystem::from_truth(DenseMatrix::hilbert(6)?, vec![1.0; 6])?;
    for &k in &[10u64, 50] {
        for ell in 0..6 {
            let result = singular_direction_expectation_check(
                &hilbert,
                &[0.0; 6],
                ell,
                k,
                trials,
                sub_seed(seed, 5, k * 10 + ell as u64),
            )?;
            checks.push(SuiteCheck {
                suite: "svd-direction",
                case: format!("hilbert6_k{k}_direction_{ell}"),
                result,
            });
        }
    }
    Ok(checks)
}

/// Expected squared-error decay bound on the 5x5 Hilbert system and a
/// seeded well-conditioned 10x5 Gaussian system, at 10 and 100 steps.
pub fn rate_suite(seed: u64, trials: u64) -> Result<Vec<SuiteCheck>> {
    let mut checks = Vec::new();
    let hilbert = LinearSystem::from_truth(DenseMatrix::hilbert(5)?, vec![1.0; 5])?;
    let gaussian = random_system(seed, 6, 0, 10, 5)?;
    for (name, sys, x0) in [
        ("hilbert5", &hilbert, vec![0.0; 5]),
        ("gaussian10x5", &gaussian, vec![0.0; 5]),
    ] {
        for &k in &[10u64, 100] {
            let result = strohmer_vershynin_rate_check(
                sys,
                &x0,
                k,
                trials,
                sub_seed(seed, 7, k),
            )?;
            checks.push(SuiteCheck {
                suite: "sv-rate",
                case: format!("{name}_k{k}"),
                result,
            });
        }
    }
    Ok(checks)
}

/// Logarithmic decay estimate on the 6x6 Hilbert system: the
/// inequality at `eps = 2 sigma_min` over `runs` stride-1 runs of 200
/// steps, plus the consistency of the bound with its rewritten form at
/// `eps = sigma_min`, where every step probability must be one.
pub fn theorem2_suite(seed: u64, runs: u64) -> Result<Vec<SuiteCheck>> {
    const STEPS: u64 = 200;
    let sys = LinearSystem::from_truth(DenseMatrix::hilbert(6)?, vec![1.0; 6])?;
    let sigma_min = svd_small(sys.matrix())?
        .sigma_min
        .expect("exact summary");
    let histories: Vec<RunHistory> = (0..runs)
        .into_par_iter()
        .map(|t| {
            run_with_stride(
                &sys,
                &[0.0; 6],
                &StoppingRule::MaxSteps(STEPS),
                sub_seed(seed, 8, t),
                1,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut checks = Vec::new();
    let diagnostic = theorem2_diagnostic(&sys, &histories, 2.0 * sigma_min)?;
    if diagnostic.excluded_runs > 0 {
        return Err(Error::InvalidArgument(format!(
            "{} runs reached the solution exactly on an ill-conditioned fixture",
            diagnostic.excluded_runs
        )));
    }
    checks.push(SuiteCheck {
        suite: "theorem2",
        case: "hilbert6_eps_2sigma_min".into(),
        result: diagnostic.check,
    });

    let at_sigma_min = theorem2_diagnostic(&sys, &histories, sigma_min)?;
    let all_one = at_sigma_min
        .per_step_probabilities
        .iter()
        .all(|&p| p == 1.0);
    let fro = sys.matrix().frobenius_norm();
    let rewritten =
        STEPS as f64 / 2.0 * (-sigma_min * sigma_min / (fro * fro)).ln_1p();
    let agreement = IdentityCheckResult {
        lhs: at_sigma_min.check.rhs,
        rhs: rewritten,
        abs_err: (at_sigma_min.check.rhs - rewritten).abs(),
        rel_err: if at_sigma_min.check.rhs == rewritten {
            0.0
        } else {
            (at_sigma_min.check.rhs - rewritten).abs() / rewritten.abs()
        },
        method: CheckMethod::ExactEnumeration,
        passed: all_one && at_sigma_min.check.rhs == rewritten && at_sigma_min.check.passed,
    };
    checks.push(SuiteCheck {
        suite: "theorem2",
        case: "hilbert6_eps_sigma_min_rewritten_form".into(),
        result: agreement,
    });
    Ok(checks)
}

/// Every suite in sequence with a shared seed.
pub fn all_suites(seed: u64, trials: u64) -> Result<Vec<SuiteCheck>> {
    let mut checks = lemma1_suite(seed)?;
    checks.extend(singular_direction_suite(seed, trials)?);
    checks.extend(rate_suite(seed, trials)?);
    checks.extend(theorem2_suite(seed, trials)?);
    Ok(checks)
}

//! The row-sampling law: row `i` is drawn with probability
//! `||a_i||^2 / ||A||_F^2`, realized as a cumulative-weight table with
//! binary search. `O(log m)` per draw is negligible next to the `O(n)`
//! projection and is straightforward to verify.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::LinearSystem;

/// Cumulative squared-row-norm weights; the final entry is `||A||_F^2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingDistribution {
    cumulative: Vec<f64>,
}

impl SamplingDistribution {
    pub fn for_system(system: &LinearSystem) -> Result<Self> {
        Self::from_weights(system.row_norms_sq())
    }

    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("no rows to sample".into()));
        }
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut total = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "weight {w} at row {i} is not a finite nonnegative value"
                )));
            }
            total += w;
            cumulative.push(total);
        }
        if total <= 0.0 {
            return Err(Error::InvalidArgument(
                "all sampling weights are zero".into(),
            ));
        }
        Ok(SamplingDistribution { cumulative })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Total weight, `||A||_F^2` when built from a system.
    #[inline]
    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Probability of row `i`, by differencing the cumulative table.
    pub fn probability(&self, i: usize) -> f64 {
        let prev = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        (self.cumulative[i] - prev) / self.total()
    }

    /// Index of the first cumulative weight above `u`, for
    /// `u` in `[0, total)`.
    #[inline]
    pub fn index_for(&self, u: f64) -> usize {
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.cumulative.len() - 1)
    }

    /// Draws one row index, advancing the generator.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.total();
        self.index_for(u)
    }
}

/// Seed for trial `t` of an ensemble keyed by `base`: one round of
/// SplitMix64 finalization over the combined words. Every parallel
/// trial derives its stream from this rule, so ensembles are
/// reproducible regardless of scheduling.
pub fn derive_trial_seed(base: u64, trial: u64) -> u64 {
    let mut z = base ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

//! Order-robust aggregation helpers shared by the Monte Carlo checks
//! and the ensemble summaries.

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Mean and standard error of the mean (sample standard deviation over
/// the square root of the count). Zero standard error for fewer than
/// two samples.
pub fn mean_and_std_err(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = compensated_sum(samples.iter().copied()) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(samples.iter().map(|x| {
        let d = x - mean;
        d * d
    }));
    let var = ss / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Quantile of a sorted slice by linear interpolation.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

/// Median of an unsorted slice.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile_sorted(&sorted, 0.5)
}

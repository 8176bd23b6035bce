use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EstimateSource, UpliftEstimate};
use crate::error::{HcubError, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub resample_count: usize,
    /// Smallest treated and baseline group size for which an estimate is computed.
    pub min_samples_per_group: usize,
    pub percentile_low: f64,
    pub percentile_high: f64,
    pub rng_seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            resample_count: 1000,
            min_samples_per_group: 30,
            percentile_low: 5.0,
            percentile_high: 95.0,
            rng_seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resample_count == 0 {
            return Err(HcubError::invalid("resample_count must be positive"));
        }
        if self.min_samples_per_group == 0 {
            return Err(HcubError::invalid("min_samples_per_group must be positive"));
        }
        let (lo, hi) = (self.percentile_low, self.percentile_high);
        if !(lo > 0.0 && lo < 50.0 && hi > 50.0 && hi < 100.0) {
            return Err(HcubError::invalid(format!(
                "need 0 < percentile_low < 50 < percentile_high < 100, got {lo} and {hi}"
            )));
        }
        Ok(())
    }
}

/// Percentile of sorted data with linear interpolation between closest ranks
/// (rank `p/100 * (n-1)`).
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = rank - lo as f64;
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

fn resampled_mean<R: Rng>(values: &[f64], rng: &mut R) -> f64 {
    let n = values.len();
    let mut sum = 0.0;
    for _ in 0..n {
        sum += values[rng.random_range(0..n)];
    }
    sum / n as f64
}

/// Bootstrap distribution of `mean(treated*) - mean(baseline*)`, sorted ascending.
pub fn bootstrap_differences<R: Rng>(
    treated: &[f64],
    baseline: &[f64],
    resamples: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut diffs: Vec<f64> = (0..resamples)
        .map(|_| {
            let t = resampled_mean(treated, rng);
            let b = resampled_mean(baseline, rng);
            t - b
        })
        .collect();
    diffs.sort_by(f64::total_cmp);
    diffs
}

/// Median and percentile interval of the treated-minus-baseline mean
/// difference, using the generator seeded from `config.rng_seed`.
pub fn bootstrap_uplift(
    treated: &[f64],
    baseline: &[f64],
    config: &EstimatorConfig,
) -> Result<UpliftEstimate> {
    bootstrap_uplift_with(treated, baseline, config, &mut seeded(config.rng_seed))
}

pub fn bootstrap_uplift_with<R: Rng>(
    treated: &[f64],
    baseline: &[f64],
    config: &EstimatorConfig,
    rng: &mut R,
) -> Result<UpliftEstimate> {
    if treated.is_empty() || baseline.is_empty() {
        return Err(HcubError::invalid(
            "bootstrap needs non-empty treated and baseline groups",
        ));
    }
    let n_treated = treated.len() as u64;
    let n_baseline = baseline.len() as u64;
    if treated.len().min(baseline.len()) < config.min_samples_per_group {
        return Ok(UpliftEstimate::unavailable(n_treated, n_baseline));
    }
    let diffs = bootstrap_differences(treated, baseline, config.resample_count, rng);
    Ok(UpliftEstimate {
        median: percentile_sorted(&diffs, 50.0),
        ci_lower: percentile_sorted(&diffs, config.percentile_low),
        ci_upper: percentile_sorted(&diffs, config.percentile_high),
        n_treated,
        n_baseline,
        source: EstimateSource::Computed,
    })
}

//! Bootstrap uplift of one arm against the baseline, and what the minimum
//! group size does to it.
//!
//!     cargo run --example bootstrap_ci

use hcub::rng::SeedMixer;
use hcub::uplift::{bootstrap_differences, bootstrap_uplift, is_significant, EstimatorConfig};
use rand_distr::{Distribution, Normal};

fn main() -> hcub::error::Result<()> {
    let config = EstimatorConfig {
        resample_count: 2000,
        min_samples_per_group: 30,
        ..EstimatorConfig::default()
    };
    let mut rng = SeedMixer::new(3).str("example").rng();
    let noise = Normal::new(0.0, 1.0).expect("valid sd");
    let baseline: Vec<f64> = (0..60).map(|_| 10.0 + noise.sample(&mut rng)).collect();

    for (label, shift, n) in [("clear win", 0.8, 60), ("no effect", 0.0, 60), ("too few", 0.8, 12)] {
        let treated: Vec<f64> = (0..n).map(|_| 10.0 + shift + noise.sample(&mut rng)).collect();
        let e = bootstrap_uplift(&treated, &baseline, &config)?;
        if e.is_available() {
            println!(
                "{label:<10} n={n:<3} median {:+.3}  90% CI [{:+.3}, {:+.3}]  significant: {}",
                e.median,
                e.ci_lower,
                e.ci_upper,
                is_significant(&e)
            );
        } else {
            println!("{label:<10} n={n:<3} unavailable (fewer than {} samples)", config.min_samples_per_group);
        }
    }

    // the raw resampled differences for a tiny instance
    let diffs = bootstrap_differences(&[1.0, 2.0, 3.0], &[0.0], 10_000, &mut SeedMixer::new(1).rng());
    let mid = diffs[diffs.len() / 2];
    println!("treated [1,2,3] vs baseline [0]: {} resamples, range [{}, {}], middle draw {mid:.3}", diffs.len(), diffs[0], diffs[diffs.len() - 1]);
    Ok(())
}

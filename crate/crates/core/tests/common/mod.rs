#![allow(dead_code)]

use hcub::sim::{ContextDistribution, EnvironmentSpec, MeanModel};
use hcub::tree::TreeSchema;

/// Every ordered resample mean of `values`: all `n^n` tuples, each equally likely.
pub fn all_resample_means(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let total = n.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let mut sum = 0.0;
            for _ in 0..n {
                sum += values[code % n];
                code /= n;
            }
            sum / n as f64
        })
        .collect()
}

/// Exact distribution of `mean(treated*) - mean(baseline*)` over all
/// resample pairs, sorted.
pub fn exact_differences(treated: &[f64], baseline: &[f64]) -> Vec<f64> {
    let t = all_resample_means(treated);
    let b = all_resample_means(baseline);
    let mut out: Vec<f64> = t.iter().flat_map(|x| b.iter().map(move |y| x - y)).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Median of the exact distribution: the smallest atom whose CDF reaches
/// one half. `None` when the CDF sits at exactly one half over a gap, since
/// the median is then not a single point.
pub fn exact_median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    let half = n / 2;
    if n.is_multiple_of(2) {
        let (lo, hi) = (sorted[half - 1], sorted[half]);
        if (hi - lo).abs() > 1e-9 {
            return None;
        }
    }
    Some(sorted[half])
}

/// Tiny instances with group sizes up to four.
pub fn tiny_instances() -> Vec<(Vec<f64>, Vec<f64>)> {
    vec![
        (vec![1.0, 2.0, 3.0], vec![0.0]),
        (vec![2.5, -1.0, 4.0, 0.5], vec![1.0, 3.0]),
        (vec![5.0], vec![1.0, 2.0, 3.0, 4.0]),
        (vec![0.1, 0.2, 0.7, 1.5], vec![0.3, 0.9, 1.1, 2.0]),
        (vec![0.0, 10.0, 1.0], vec![2.0, 2.5, 7.0]),
        (vec![3.0, 3.0], vec![1.0]),
    ]
}

/// Generated environment on a `depth`-level tree with `fanout` values per level.
pub fn small_spec(depth: usize, fanout: usize, bucket_count: usize, noise: f64, seed: u64) -> EnvironmentSpec {
    let names: Vec<String> = (0..depth).map(|d| format!("l{d}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    EnvironmentSpec {
        schema: TreeSchema::from_names(&refs, depth / 2).unwrap(),
        bucket_count,
        vocabularies: (0..depth).map(|d| (0..fanout).map(|v| format!("v{d}{v}")).collect()).collect(),
        means: MeanModel::Generated {
            base_mean: [1.0, 1.0, 2.0],
            base_sd: 0.5,
            parent_signal_sd: vec![1.0; depth],
            leaf_perturbation_sd: 0.2,
        },
        noise_sd: [noise; 3],
        contexts: ContextDistribution::Uniform,
        shift_round: None,
        seed,
    }
}

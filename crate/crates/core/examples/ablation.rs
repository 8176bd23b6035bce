//! Inheritance on versus off across seeds, paired per seed.
//!
//!     cargo run --release --example ablation -- [config.toml] [seed-count]

use std::path::PathBuf;

use hcub::harness::parse_config;
use hcub::sim::ablation_compare;

fn main() -> hcub::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/reference_ablation.toml")));
    let config = parse_config(&path)?;
    let mut seeds = config.run.seeds.clone();
    if let Some(n) = args.next() {
        seeds.truncate(n.parse().expect("seed count"));
    }
    let spec = config.environment_spec().expect("config has an environment");
    let start = std::time::Instant::now();
    let ablation = ablation_compare(&spec, &config.estimator, &config.policy, &config.weights, config.run.horizon, &seeds)?;
    let r = &ablation.report;

    println!("seed   regret on   regret off   improvement");
    for s in &r.per_seed {
        println!("{:>4} {:>11.2} {:>12.2} {:>12.1}%", s.seed, s.regret_treatment, s.regret_control, 100.0 * s.relative_improvement);
    }
    println!(
        "mean improvement {:+.2}%  wins {}-{} (ties {})  sign test p = {:.2e}  [{:.1?}]",
        100.0 * r.mean_relative_improvement,
        r.treatment_wins,
        r.control_wins,
        r.ties,
        r.sign_test_p_value,
        start.elapsed()
    );
    Ok(())
}

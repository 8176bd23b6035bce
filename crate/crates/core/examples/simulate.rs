//! One simulated run from a config file; writes the trajectory CSV.
//!
//!     cargo run --release --example simulate -- [config.toml] [out-dir]

use std::path::PathBuf;

use hcub::harness::{parse_config, write_json, write_trajectory, SimulationSummary};
use hcub::sim::run_simulation;

fn main() -> hcub::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/simulate.toml")));
    let config = parse_config(&path)?;
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| config.run.output_dir.clone());

    let env = config.build_environment()?;
    let seed = config.run.seeds[0];
    let result = run_simulation(&env, &config.estimator, &config.policy, &config.weights, config.run.horizon, seed)?;

    std::fs::create_dir_all(&out)?;
    write_trajectory(std::fs::File::create(out.join("trajectory.csv"))?, &result)?;
    let summary = SimulationSummary::new(&result, &config);
    write_json(out.join("summary.json"), &summary)?;

    let trajectory = result.regret_trajectory();
    for t in [99, 499, 999, trajectory.len() - 1] {
        if let Some(r) = trajectory.get(t) {
            println!("after {:>5} rounds: cumulative regret {r:.3}", t + 1);
        }
    }
    println!("{} of {} rounds had zero regret; wrote {}", summary.zero_regret_rounds, summary.horizon, out.display());
    Ok(())
}

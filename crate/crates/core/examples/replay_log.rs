//! Offline estimation from a logged A/B test: write a JSONL observation log
//! from uniformly randomized traffic, read it back and compare the resolved
//! tables with and without inheritance.
//!
//!     cargo run --release --example replay_log -- [log.jsonl] [rounds]

use std::path::PathBuf;

use hcub::harness::{load_observations, replay_estimate, write_observations, LogMode};
use hcub::model::RewardWeights;
use hcub::rng::SeedMixer;
use hcub::sim::{ContextDistribution, Environment, EnvironmentSpec, MeanModel};
use hcub::tree::{NodeId, TreeSchema};
use hcub::uplift::{EstimatorConfig, Observation};
use rand::Rng;

fn main() -> hcub::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("hcub_example_log.jsonl"));
    let rounds: u64 = args.next().map(|s| s.parse().expect("round count")).unwrap_or(3000);

    let spec = EnvironmentSpec {
        schema: TreeSchema::from_names(&["tour", "cohort"], 1)?,
        bucket_count: 2,
        vocabularies: vec![vec!["T1".into(), "T2".into()], vec!["casual".into(), "regular".into(), "whale".into()]],
        means: MeanModel::Generated {
            base_mean: [5.0, 2.0, 10.0],
            base_sd: 1.0,
            parent_signal_sd: vec![1.0, 0.3],
            leaf_perturbation_sd: 0.1,
        },
        noise_sd: [1.0; 3],
        contexts: ContextDistribution::PerLevel {
            weights: vec![vec![0.5, 0.5], vec![0.8, 0.15, 0.05]],
        },
        shift_round: None,
        seed: 11,
    };
    let env = Environment::build(&spec)?;
    let mut rng = SeedMixer::new(11).str("log").rng();
    let log: Vec<Observation> = (0..rounds)
        .map(|round| {
            let context = env.sample_context(&mut rng);
            let action = env.actions().action(rng.random_range(0..env.actions().size()))?;
            let metrics = env.sample_metrics(&context, &action, round, &mut rng)?;
            Ok(Observation { context, action, metrics, round })
        })
        .collect::<hcub::error::Result<_>>()?;
    write_observations(std::io::BufWriter::new(std::fs::File::create(&path)?), &log)?;
    println!("wrote {} records to {}", log.len(), path.display());

    let loaded = load_observations(&path, env.schema(), env.actions(), LogMode::Strict)?;
    assert_eq!(loaded.observations, log);
    let weights = RewardWeights::default();
    let estimator = EstimatorConfig { min_samples_per_group: 20, ..EstimatorConfig::default() };
    let replay = replay_estimate(&loaded.observations, env.schema(), *env.actions(), &weights, &estimator)?;
    println!("{:?}", replay.summary());

    // the rare cohort, next to its true uplifts
    let leaf = NodeId::new(["T1", "whale"]);
    let li = env.leaves().iter().position(|l| *l == leaf).expect("leaf exists");
    let base = env.expected_reward(li, env.actions().baseline_index(), &weights, 0);
    println!("\n{leaf}: arm   true     on (source)            off (source)");
    for (a, on) in replay.with_inheritance.row(&leaf).expect("leaf row") {
        let off = replay.without_inheritance.get(&leaf, a).expect("same shape");
        let truth = env.expected_reward(li, a, &weights, 0) - base;
        println!(
            "        #{a}  {truth:+.3}   {:+.3} ({:<11})   {:+.3} ({})",
            on.median,
            on.source.as_str(),
            off.median,
            off.source.as_str()
        );
    }
    Ok(())
}

//! Driving the learner by hand: a closure supplies feedback, the policy
//! explores every arm, then settles on the best one per cohort.
//!
//!     cargo run --example policy_loop

use hcub::error::Result;
use hcub::model::{ActionSpace, ActionVector, Context, MetricVector, RewardWeights};
use hcub::policy::{PolicyConfig, PolicyState};
use hcub::rng::seeded;
use hcub::tree::TreeSchema;
use hcub::uplift::EstimatorConfig;
use rand::Rng;

fn main() -> Result<()> {
    let schema = TreeSchema::from_names(&["cohort"], 0)?;
    let actions = ActionSpace::new(1)?;
    let policy = PolicyConfig {
        refresh_interval: 10,
        optimistic_init: 100.0,
        ..PolicyConfig::default()
    };
    let estimator = EstimatorConfig {
        resample_count: 300,
        min_samples_per_group: 10,
        ..EstimatorConfig::default()
    };
    let mut state = PolicyState::new(schema.clone(), actions, RewardWeights::default(), estimator, policy)?;

    // arm 0 (Low) wins for "casual", arm 2 (High) for "grinder"
    let mut noise = seeded(5);
    let mut feedback = |ctx: &Context, a: &ActionVector| -> Result<MetricVector> {
        let casual = ctx.values().next() == Some("casual");
        let mean = match (a.index(), casual) {
            (0, true) | (2, false) => 1.0,
            (1, _) => 0.5,
            _ => 0.0,
        };
        MetricVector::new(0.0, 0.0, mean + noise.random_range(-0.2..0.2))
    };

    let contexts = [schema.context(&["casual"])?, schema.context(&["grinder"])?];
    let mut picks = [[0usize; 3]; 2];
    for t in 0..600 {
        let which = t % 2;
        let out = state.run_round(&contexts[which], &mut feedback)?;
        if t >= 400 {
            picks[which][out.action.index()] += 1;
        }
        if t < 6 || out.refreshed && t % 100 == 0 {
            println!(
                "t={t:<3} {} -> {} score {:.3} ({})",
                out.leaf,
                out.action,
                out.score.total,
                out.score.source_label()
            );
        }
    }
    println!("last 200 rounds, pulls of [L, M, H]: casual {:?}, grinder {:?}", picks[0], picks[1]);
    Ok(())
}

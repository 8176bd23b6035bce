//! The arm space: every Low/Medium/High assignment over B contest buckets.
//!
//!     cargo run --example actions -- 4

use hcub::model::{baseline_action, enumerate_actions, weighted_combine, ActionSpace, MetricVector, RewardWeights};

fn main() -> hcub::error::Result<()> {
    let buckets: usize = std::env::args().nth(1).map(|s| s.parse().expect("bucket count")).unwrap_or(4);
    let arms = enumerate_actions(buckets)?;
    let space = ActionSpace::new(buckets)?;
    println!("B = {buckets}: {} arms, baseline {} at index {}", arms.len(), baseline_action(buckets)?, space.baseline_index());

    let shown = arms.len().min(6);
    for arm in arms.iter().take(shown) {
        println!("  #{:<3} {arm}", arm.index());
    }
    if arms.len() > shown {
        println!("  ...");
        let last = arms.last().expect("non-empty");
        println!("  #{:<3} {last}", last.index());
    }

    // rewards and uplifts share the same scalarization
    let w = RewardWeights::default();
    let m = MetricVector::new(2.0, 4.0, 6.0)?;
    println!("weights {:?}: reward of {:?} = {}", w.to_array(), m.to_array(), w.scalarize(&m));
    println!("uplift (0.1, -0.2, 0.3) scalarizes to {}", weighted_combine([0.1, -0.2, 0.3], &w)?);
    Ok(())
}

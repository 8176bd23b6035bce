//! Building a context tree from observations, then aggregating uplifts up the
//! tree and resolving them back down with inheritance.
//!
//!     cargo run --example context_tree

use hcub::harness::render_tree;
use hcub::model::{ActionSpace, MetricVector, RewardWeights};
use hcub::tree::{ContextTree, TreeSchema};
use hcub::uplift::{compute_tree_estimates, EstimatorConfig, Observation, ObservationStore};

fn main() -> hcub::error::Result<()> {
    let schema = TreeSchema::from_names(&["tour", "cohort"], 1)?;
    let actions = ActionSpace::new(1)?;
    let mut tree = ContextTree::new(schema.clone(), actions);
    let mut store = ObservationStore::new(actions, RewardWeights::default());

    // "whales" get plenty of traffic, "new" almost none
    for i in 0..90u64 {
        let cohort = if i % 30 == 0 { "new" } else { "whales" };
        let action = (i % 3) as usize;
        let lift = match action {
            0 => -0.5,
            2 => 1.0,
            _ => 0.0,
        };
        let wobble = ((i * 7) % 5) as f64 * 0.1;
        let obs = Observation {
            context: schema.context(&["T1", cohort])?,
            action: actions.action(action)?,
            metrics: MetricVector::new(0.0, 0.0, 5.0 + lift + wobble)?,
            round: i,
        };
        store.record(&mut tree, &obs)?;
    }
    tree.check_consistency()?;

    let config = EstimatorConfig {
        min_samples_per_group: 10,
        ..EstimatorConfig::default()
    };
    println!("top-down order: {}", tree.iter_top_down().iter().map(|n| n.to_string()).collect::<Vec<_>>().join(", "));
    println!("bottom-up order: {}", tree.iter_bottom_up().iter().map(|n| n.to_string()).collect::<Vec<_>>().join(", "));

    for inheritance in [false, true] {
        let table = compute_tree_estimates(&store, &tree, &config, inheritance)?;
        println!("\ninheritance {}:", if inheritance { "on" } else { "off" });
        print!("{}", render_tree(&tree, &table));
    }
    Ok(())
}

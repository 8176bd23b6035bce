//! Small cases worked out by hand.

use hcub::model::{enumerate_actions, ActionSpace, MetricVector, RewardWeights};
use hcub::sim::{ContextDistribution, Environment, EnvironmentSpec, ExplicitLeaf, MeanModel};
use hcub::tree::{ContextTree, NodeId, TreeSchema};
use hcub::uplift::{
    compute_leaf_estimates, compute_tree_estimates, EstimateSource, EstimatorConfig, Observation, ObservationStore,
};

fn one_level(values_and_arms: &[(&str, usize, f64, usize)]) -> (ContextTree, ObservationStore) {
    let schema = TreeSchema::from_names(&["cohort"], 0).unwrap();
    let actions = ActionSpace::new(1).unwrap();
    let mut tree = ContextTree::new(schema.clone(), actions);
    let mut store = ObservationStore::new(actions, RewardWeights::default());
    let mut round = 0;
    for &(leaf, arm, revenue, copies) in values_and_arms {
        for _ in 0..copies {
            let obs = Observation {
                context: schema.context(&[leaf]).unwrap(),
                action: actions.action(arm).unwrap(),
                metrics: MetricVector::new(0.0, 0.0, revenue).unwrap(),
                round,
            };
            store.record(&mut tree, &obs).unwrap();
            round += 1;
        }
    }
    (tree, store)
}

fn config() -> EstimatorConfig {
    EstimatorConfig {
        resample_count: 500,
        min_samples_per_group: 5,
        ..EstimatorConfig::default()
    }
}

#[test]
fn rich_leaf_and_empty_sibling() {
    // leaf a: arm 2 always 3.0, baseline always 1.0, so its uplift is exactly
    // 2 with a zero-width interval. Leaf b holds one baseline sample only.
    let (tree, store) = one_level(&[("a", 2, 3.0, 40), ("a", 1, 1.0, 40), ("b", 1, 1.0, 1)]);
    let a = NodeId::new(["a"]);
    let b = NodeId::new(["b"]);
    let root = NodeId::root();

    let off = compute_tree_estimates(&store, &tree, &config(), false).unwrap();
    let on = compute_tree_estimates(&store, &tree, &config(), true).unwrap();

    // weights for arm 2: a has 40 + 40, b has 0 + 1; b is unavailable and
    // dropped, so the root is a's estimate with weight 1
    let ea = off.get(&a, 2).unwrap();
    assert_eq!((ea.median, ea.ci_lower, ea.ci_upper), (2.0, 2.0, 2.0));
    let er = off.get(&root, 2).unwrap();
    assert_eq!((er.median, er.ci_lower, er.ci_upper), (2.0, 2.0, 2.0));
    assert_eq!(er.source, EstimateSource::Computed);
    assert_eq!(off.get(&b, 2).unwrap().source, EstimateSource::Unavailable);

    let eb = on.get(&b, 2).unwrap();
    assert_eq!(eb.source, EstimateSource::Inherited);
    assert_eq!((eb.median, eb.ci_lower, eb.ci_upper), (2.0, 2.0, 2.0));
    assert_eq!(on.get(&a, 2).unwrap().source, EstimateSource::Computed);

    // arm 0 has no data anywhere: unavailable at every node, either way
    for node in [&root, &a, &b] {
        assert_eq!(on.get(node, 0).unwrap().source, EstimateSource::Unavailable);
    }

    // without inheritance the leaf rows equal the plain leaf estimates
    let leaves = compute_leaf_estimates(&store, &tree, &config());
    for leaf in [&a, &b] {
        for arm in [0, 2] {
            assert_eq!(off.get(leaf, arm), leaves.get(leaf, arm));
        }
    }
}

#[test]
fn root_is_weighted_by_cohort_size() {
    // x: arm 0 uplift 0.4 on 10 + 30 samples; y: uplift 0.0 on 30 + 90
    // weights 40/160 and 120/160, so the root median is 0.25 * 0.4 = 0.1
    let (tree, store) = one_level(&[("x", 0, 1.4, 10), ("x", 1, 1.0, 30), ("y", 0, 2.0, 30), ("y", 1, 2.0, 90)]);
    let t = compute_tree_estimates(&store, &tree, &config(), false).unwrap();
    let r = t.get(&NodeId::root(), 0).unwrap();
    assert!((r.median - 0.1).abs() < 1e-12, "{r:?}");
    assert!((r.ci_lower - 0.1).abs() < 1e-12 && (r.ci_upper - 0.1).abs() < 1e-12);
    assert_eq!((r.n_treated, r.n_baseline), (40, 120));
}

#[test]
fn oracle_arm_by_brute_force() {
    let means = vec![[1.0, 0.0, 2.0], [0.0, 2.0, 2.2], [4.0, 0.0, 0.5]];
    let spec = EnvironmentSpec {
        schema: TreeSchema::from_names(&["cohort"], 0).unwrap(),
        bucket_count: 1,
        vocabularies: vec![vec!["c".into()]],
        means: MeanModel::Explicit {
            leaves: vec![ExplicitLeaf { path: vec!["c".into()], means: means.clone() }],
        },
        noise_sd: [0.0; 3],
        contexts: ContextDistribution::Uniform,
        shift_round: None,
        seed: 0,
    };
    let env = Environment::build(&spec).unwrap();
    for weights in [
        RewardWeights::default(),
        RewardWeights::new(1.0, 0.0, 0.0).unwrap(),
        RewardWeights::new(0.0, 1.0, 0.0).unwrap(),
        RewardWeights::new(0.0, 0.0, 1.0).unwrap(),
    ] {
        let w = weights.to_array();
        let scalar: Vec<f64> = means.iter().map(|m| w[0] * m[0] + w[1] * m[1] + w[2] * m[2]).collect();
        let mut best = 0;
        for a in 1..3 {
            if scalar[a] > scalar[best] {
                best = a;
            }
        }
        assert_eq!(env.oracle_action(0, &weights, 0).index(), best, "{w:?} {scalar:?}");
    }
    // (0.5, 0.5, 1): 2.5, 3.2, 2.5
    assert_eq!(env.oracle_action(0, &RewardWeights::default(), 0).index(), 1);
}

#[test]
fn eighty_one_arms_for_four_buckets() {
    let arms = enumerate_actions(4).unwrap();
    assert_eq!(arms.len(), 81);
    assert_eq!(ActionSpace::new(4).unwrap().baseline_index(), 40);
    assert!(arms[40].is_baseline());
    assert_eq!(arms.iter().filter(|a| a.is_baseline()).count(), 1);
}

//! Log parsing and offline estimation.

use hcub::harness::{read_observations, replay_estimate, write_observations, LogMode, LogRecord};
use hcub::model::{ActionSpace, MetricVector, RewardWeights};
use hcub::tree::{NodeId, TreeSchema};
use hcub::uplift::{EstimateSource, EstimatorConfig, Observation};
use proptest::prelude::*;

fn schema() -> TreeSchema {
    TreeSchema::from_names(&["tour", "cohort"], 1).unwrap()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

#[test]
fn leaf_medians_match_mean_differences() {
    // 200 records at one leaf: 50 on arm 0, 50 on arm 2, 100 on the baseline
    let schema = schema();
    let actions = ActionSpace::new(1).unwrap();
    let w = RewardWeights::default();
    let mut log = Vec::new();
    let mut groups: [Vec<f64>; 3] = Default::default();
    for i in 0..200u64 {
        let arm = match i % 4 {
            0 => 0,
            2 => 2,
            _ => 1,
        };
        let wobble = ((i * 37) % 11) as f64 / 10.0;
        let center = [1.0, 2.0, 2.6][arm];
        let m = MetricVector::new(wobble, 0.5 * wobble, center).unwrap();
        groups[arm].push(w.scalarize(&m));
        log.push(Observation {
            context: schema.context(&["T1", "C1"]).unwrap(),
            action: actions.action(arm).unwrap(),
            metrics: m,
            round: i,
        });
    }
    let config = EstimatorConfig {
        resample_count: 4000,
        min_samples_per_group: 30,
        ..EstimatorConfig::default()
    };
    let r = replay_estimate(&log, &schema, actions, &w, &config).unwrap();
    let leaf = NodeId::new(["T1", "C1"]);
    for arm in [0, 2] {
        let e = r.without_inheritance.get(&leaf, arm).unwrap();
        let analytic = mean(&groups[arm]) - mean(&groups[1]);
        let se = (var(&groups[arm]) / 50.0 + var(&groups[1]) / 100.0).sqrt();
        // the bootstrap median sits on the sample mean difference up to
        // Monte Carlo noise of order se / sqrt(resamples)
        assert!((e.median - analytic).abs() < 0.1 * se, "arm {arm}: {} vs {analytic} (se {se})", e.median);
        assert!(e.ci_lower < analytic && analytic < e.ci_upper);
        assert_eq!((e.n_treated, e.n_baseline), (50, 100));
    }
}

#[test]
fn rich_leaf_helps_siblings_only_with_inheritance() {
    let schema = schema();
    let actions = ActionSpace::new(1).unwrap();
    let mut log = Vec::new();
    let mut round = 0;
    let mut push = |leaf: [&str; 2], arm: usize, revenue: f64| {
        log.push(Observation {
            context: schema.context(&leaf).unwrap(),
            action: actions.action(arm).unwrap(),
            metrics: MetricVector::new(0.0, 0.0, revenue).unwrap(),
            round,
        });
        round += 1;
    };
    for i in 0..60 {
        let jitter = (i % 7) as f64 * 0.05;
        push(["T1", "C1"], i % 3, if i % 3 == 2 { 2.0 } else { 1.0 } + jitter);
    }
    push(["T1", "C2"], 1, 1.0);
    let r = replay_estimate(&log, &schema, actions, &RewardWeights::default(), &EstimatorConfig {
        min_samples_per_group: 10,
        ..EstimatorConfig::default()
    })
    .unwrap();
    let sib = NodeId::new(["T1", "C2"]);
    assert_eq!(r.with_inheritance.get(&sib, 2).unwrap().source, EstimateSource::Inherited);
    assert_eq!(r.without_inheritance.get(&sib, 2).unwrap().source, EstimateSource::Unavailable);
    let rich = NodeId::new(["T1", "C1"]);
    assert_eq!(r.with_inheritance.get(&rich, 2), r.without_inheritance.get(&rich, 2));
}

fn observation() -> impl Strategy<Value = (u64, [usize; 2], usize, [f64; 3])> {
    (0..1000u64, [0..3usize, 0..3usize], 0..81usize, prop::array::uniform3(prop::num::f64::NORMAL | prop::num::f64::ZERO))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn log_round_trip(mut raw in prop::collection::vec(observation(), 0..20)) {
        raw.sort_by_key(|r| r.0);
        let schema = schema();
        let actions = ActionSpace::new(4).unwrap();
        let obs: Vec<Observation> = raw
            .iter()
            .map(|(round, leaf, arm, m)| Observation {
                context: schema.context(&[format!("T{}", leaf[0]), format!("C{}", leaf[1])]).unwrap(),
                action: actions.action(*arm).unwrap(),
                metrics: MetricVector::from_array(*m).unwrap(),
                round: *round,
            })
            .collect();
        let mut buf = Vec::new();
        write_observations(&mut buf, &obs).unwrap();
        let back = read_observations(buf.as_slice(), &schema, &actions, LogMode::Strict).unwrap();
        prop_assert!(back.skipped.is_empty());
        prop_assert_eq!(&back.observations, &obs);
        for o in &obs {
            let rec = LogRecord::from_observation(o);
            prop_assert_eq!(&rec.to_observation(&schema, &actions).unwrap(), o);
        }
    }
}

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{HcubError, Result};
use crate::model::{ActionSpace, ActionVector, Context, MetricVector, RewardWeights};
use crate::tree::{ContextTree, NodeId};

/// One unit of logged feedback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub context: Context,
    pub action: ActionVector,
    pub metrics: MetricVector,
    pub round: u64,
}

#[derive(Debug, Clone, Default)]
struct LeafRewards {
    /// Indexed by action index; the baseline slot stays empty.
    treated: Vec<Vec<f64>>,
    baseline: Vec<f64>,
}

/// Scalar rewards per leaf, split into per-arm treated lists and a baseline list.
#[derive(Debug, Clone)]
pub struct ObservationStore {
    actions: ActionSpace,
    weights: RewardWeights,
    leaves: HashMap<NodeId, LeafRewards>,
    last_round: Option<u64>,
    len: usize,
}

impl ObservationStore {
    pub fn new(actions: ActionSpace, weights: RewardWeights) -> Self {
        Self {
            actions,
            weights,
            leaves: HashMap::new(),
            last_round: None,
            len: 0,
        }
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn weights(&self) -> &RewardWeights {
        &self.weights
    }

    /// Total number of ingested observations.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Scalarizes the observation and appends it to its leaf, bumping tree
    /// counts along the whole path. Returns the leaf and the scalar reward.
    pub fn record(&mut self, tree: &mut ContextTree, obs: &Observation) -> Result<(NodeId, f64)> {
        if obs.metrics.to_array().iter().any(|v| !v.is_finite()) {
            return Err(HcubError::InvalidObservation(format!(
                "non-finite metrics {:?} at round {}",
                obs.metrics, obs.round
            )));
        }
        if obs.action.len() != self.actions.bucket_count() {
            return Err(HcubError::InvalidObservation(format!(
                "action {} does not have {} buckets",
                obs.action,
                self.actions.bucket_count()
            )));
        }
        if let Some(last) = self.last_round {
            if obs.round < last {
                return Err(HcubError::InvalidObservation(format!(
                    "round {} after round {last}",
                    obs.round
                )));
            }
        }
        tree.schema()
            .check_context(&obs.context)
            .map_err(|e| HcubError::InvalidObservation(e.to_string()))?;

        let reward = self.weights.scalarize(&obs.metrics);
        let action = obs.action.index();
        let leaf = tree.record_sample(&obs.context, action)?;
        let size = self.actions.size();
        let entry = self.leaves.entry(leaf.clone()).or_insert_with(|| LeafRewards {
            treated: vec![Vec::new(); size],
            baseline: Vec::new(),
        });
        if self.actions.is_baseline(action) {
            entry.baseline.push(reward);
        } else {
            entry.treated[action].push(reward);
        }
        self.last_round = Some(obs.round);
        self.len += 1;
        Ok((leaf, reward))
    }

    pub fn treated(&self, leaf: &NodeId, action: usize) -> &[f64] {
        self.leaves
            .get(leaf)
            .and_then(|l| l.treated.get(action))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn baseline(&self, leaf: &NodeId) -> &[f64] {
        self.leaves
            .get(leaf)
            .map(|l| l.baseline.as_slice())
            .unwrap_or(&[])
    }
}

/// Free-function form of [`ObservationStore::record`].
pub fn record_observation(
    store: &mut ObservationStore,
    tree: &mut ContextTree,
    obs: &Observation,
) -> Result<NodeId> {
    store.record(tree, obs).map(|(leaf, _)| leaf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::TreeSchema;

    fn setup() -> (ContextTree, ObservationStore) {
        let actions = ActionSpace::new(2).unwrap();
        let schema = TreeSchema::from_names(&["tour", "cohort"], 1).unwrap();
        (
            ContextTree::new(schema, actions),
            ObservationStore::new(actions, RewardWeights::default()),
        )
    }

    fn obs(tree: &ContextTree, action: usize, metrics: [f64; 3], round: u64) -> Observation {
        Observation {
            context: tree.schema().context(&["T1", "C1"]).unwrap(),
            action: ActionSpace::new(2).unwrap().action(action).unwrap(),
            metrics: MetricVector {
                engagement: metrics[0],
                retention_proxy: metrics[1],
                revenue: metrics[2],
            },
            round,
        }
    }

    #[test]
    fn baseline_goes_to_baseline_list() {
        let (mut tree, mut store) = setup();
        let o = obs(&tree, 4, [1.0, 1.0, 1.0], 0);
        let leaf = record_observation(&mut store, &mut tree, &o).unwrap();
        assert_eq!(store.baseline(&leaf), &[2.0]);
        assert!((0..9).all(|a| store.treated(&leaf, a).is_empty()));
        assert_eq!(tree.count(&leaf, 4), 1);
        assert_eq!(tree.count(&NodeId::root(), 4), 1);
    }

    #[test]
    fn zero_metrics_give_zero_reward() {
        let (mut tree, mut store) = setup();
        let o = obs(&tree, 0, [0.0, 0.0, 0.0], 0);
        let leaf = record_observation(&mut store, &mut tree, &o).unwrap();
        assert_eq!(store.treated(&leaf, 0), &[0.0]);
        assert!(store.baseline(&leaf).is_empty());
    }

    #[test]
    fn nan_metrics_rejected_without_side_effects() {
        let (mut tree, mut store) = setup();
        let o = obs(&tree, 0, [0.0, 0.0, f64::NAN], 0);
        assert!(matches!(
            record_observation(&mut store, &mut tree, &o),
            Err(HcubError::InvalidObservation(_))
        ));
        assert_eq!(tree.len(), 1);
        assert!(store.is_empty());
    }

    #[test]
    fn decreasing_round_rejected() {
        let (mut tree, mut store) = setup();
        let (first, late) = (obs(&tree, 0, [0.0; 3], 5), obs(&tree, 0, [0.0; 3], 4));
        record_observation(&mut store, &mut tree, &first).unwrap();
        record_observation(&mut store, &mut tree, &first).unwrap();
        assert!(record_observation(&mut store, &mut tree, &late).is_err());
    }

    #[test]
    fn leaf_counts_match_list_lengths() {
        let (mut tree, mut store) = setup();
        for (i, a) in [0, 4, 4, 8, 0, 0].into_iter().enumerate() {
            let o = obs(&tree, a, [1.0, 0.0, 0.0], i as u64);
            record_observation(&mut store, &mut tree, &o).unwrap();
        }
        let leaf = tree.leaves().next().unwrap().clone();
        assert_eq!(tree.count(&leaf, 0) as usize, store.treated(&leaf, 0).len());
        assert_eq!(tree.count(&leaf, 4) as usize, store.baseline(&leaf).len());
        assert_eq!(tree.count(&leaf, 8) as usize, store.treated(&leaf, 8).len());
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{HcubError, Result};
use crate::model::{ActionSpace, RewardWeights};
use crate::tree::{ContextTree, TreeSchema};
use crate::uplift::{EstimateSource, EstimateTable, EstimatorConfig, Observation, ObservationStore, TreeEstimator};

/// Tree, store and both resolved tables built from one log.
#[derive(Debug, Clone)]
pub struct Replay {
    pub tree: ContextTree,
    pub store: ObservationStore,
    pub with_inheritance: EstimateTable,
    pub without_inheritance: EstimateTable,
}

/// One (node, arm) cell of both tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRow {
    pub node_path: String,
    pub action_index: usize,
    pub n_treated: u64,
    pub n_baseline: u64,
    pub on_median: f64,
    pub on_ci_lower: f64,
    pub on_ci_upper: f64,
    pub on_source: EstimateSource,
    pub off_median: f64,
    pub off_ci_lower: f64,
    pub off_ci_upper: f64,
    pub off_source: EstimateSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub observations: usize,
    pub nodes: usize,
    pub leaves: usize,
    pub computed_on: usize,
    pub inherited_on: usize,
    pub unavailable_on: usize,
    pub computed_off: usize,
    pub unavailable_off: usize,
}

impl Replay {
    /// Rows of both tables side by side, nodes in path order.
    pub fn rows(&self) -> Vec<ReplayRow> {
        let off = self.without_inheritance.records();
        self.with_inheritance
            .records()
            .into_iter()
            .zip(off)
            .map(|(on, off)| {
                debug_assert_eq!((&on.node_path, on.action_index), (&off.node_path, off.action_index));
                ReplayRow {
                    node_path: on.node_path,
                    action_index: on.action_index,
                    n_treated: off.n_treated,
                    n_baseline: off.n_baseline,
                    on_median: on.median,
                    on_ci_lower: on.ci_lower,
                    on_ci_upper: on.ci_upper,
                    on_source: on.source,
                    off_median: off.median,
                    off_ci_lower: off.ci_lower,
                    off_ci_upper: off.ci_upper,
                    off_source: off.source,
                }
            })
            .collect()
    }

    pub fn summary(&self) -> ReplaySummary {
        let rows = self.rows();
        let count = |f: &dyn Fn(&ReplayRow) -> bool| rows.iter().filter(|r| f(r)).count();
        ReplaySummary {
            observations: self.store.len(),
            nodes: self.tree.len(),
            leaves: self.tree.leaves().count(),
            computed_on: count(&|r| r.on_source == EstimateSource::Computed),
            inherited_on: count(&|r| r.on_source == EstimateSource::Inherited),
            unavailable_on: count(&|r| r.on_source == EstimateSource::Unavailable),
            computed_off: count(&|r| r.off_source == EstimateSource::Computed),
            unavailable_off: count(&|r| r.off_source == EstimateSource::Unavailable),
        }
    }
}

/// Ingests a log into a fresh tree and store and resolves the estimate
/// table once with inheritance and once without. Both tables share the same
/// leaf-level bootstrap draws.
pub fn replay_estimate(
    observations: &[Observation],
    schema: &TreeSchema,
    actions: ActionSpace,
    weights: &RewardWeights,
    estimator: &EstimatorConfig,
) -> Result<Replay> {
    if observations.is_empty() {
        return Err(HcubError::invalid("cannot replay an empty log"));
    }
    weights.validate()?;
    estimator.validate()?;
    let mut tree = ContextTree::new(schema.clone(), actions);
    let mut store = ObservationStore::new(actions, *weights);
    for obs in observations {
        store.record(&mut tree, obs)?;
    }
    tree.check_consistency()?;
    let mut est = TreeEstimator::new(*estimator);
    let with_inheritance = est.estimate(&store, &tree, true)?;
    let without_inheritance = est.estimate(&store, &tree, false)?;
    Ok(Replay {
        tree,
        store,
        with_inheritance,
        without_inheritance,
    })
}

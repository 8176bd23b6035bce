use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_uplift_with, EstimatorConfig};
use super::store::ObservationStore;
use super::{is_significant, EstimateSource, UpliftEstimate};
use crate::error::{HcubError, Result};
use crate::model::ActionSpace;
use crate::rng::SeedMixer;
use crate::tree::{ContextTree, NodeId};

/// Node x non-baseline-arm table of uplift estimates. The baseline arm has no
/// column: its uplift is zero by definition.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateTable {
    actions: ActionSpace,
    rows: BTreeMap<NodeId, Vec<UpliftEstimate>>,
}

/// Flat export row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub node_path: String,
    pub action_index: usize,
    pub median: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub n_treated: u64,
    pub n_baseline: u64,
    pub source: EstimateSource,
}

impl EstimateTable {
    pub fn new(actions: ActionSpace) -> Self {
        Self {
            actions,
            rows: BTreeMap::new(),
        }
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    /// Column of `action`, or `None` for the baseline and out-of-range indices.
    fn column(&self, action: usize) -> Option<usize> {
        let baseline = self.actions.baseline_index();
        match action {
            a if a >= self.actions.size() || a == baseline => None,
            a if a < baseline => Some(a),
            a => Some(a - 1),
        }
    }

    fn column_action(&self, column: usize) -> usize {
        if column < self.actions.baseline_index() {
            column
        } else {
            column + 1
        }
    }

    /// Non-baseline arm indices, i.e. the table's action axis.
    pub fn action_indices(&self) -> Vec<usize> {
        self.actions.treatment_indices()
    }

    pub fn width(&self) -> usize {
        self.actions.size() - 1
    }

    pub fn get(&self, node: &NodeId, action: usize) -> Option<&UpliftEstimate> {
        let column = self.column(action)?;
        self.rows.get(node).map(|row| &row[column])
    }

    pub fn set(&mut self, node: &NodeId, action: usize, estimate: UpliftEstimate) -> Result<()> {
        let column = self
            .column(action)
            .ok_or_else(|| HcubError::invalid(format!("action {action} has no column")))?;
        let width = self.width();
        let row = self
            .rows
            .entry(node.clone())
            .or_insert_with(|| vec![UpliftEstimate::unavailable(0, 0); width]);
        row[column] = estimate;
        Ok(())
    }

    /// Pairs of (action index, estimate) for one node.
    pub fn row(&self, node: &NodeId) -> Option<impl Iterator<Item = (usize, &UpliftEstimate)>> {
        self.rows.get(node).map(|row| {
            row.iter()
                .enumerate()
                .map(|(c, e)| (self.column_action(c), e))
        })
    }

    pub fn insert_row(&mut self, node: NodeId, row: Vec<UpliftEstimate>) -> Result<()> {
        if row.len() != self.width() {
            return Err(HcubError::invalid(format!(
                "row for {node} has {} entries, expected {}",
                row.len(),
                self.width()
            )));
        }
        self.rows.insert(node, row);
        Ok(())
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.rows.contains_key(node)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.rows.keys()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows ordered by node path, then action index.
    pub fn records(&self) -> Vec<EstimateRecord> {
        self.rows
            .iter()
            .flat_map(|(node, row)| {
                row.iter().enumerate().map(move |(c, e)| EstimateRecord {
                    node_path: node.to_string(),
                    action_index: self.column_action(c),
                    median: e.median,
                    ci_lower: e.ci_lower,
                    ci_upper: e.ci_upper,
                    n_treated: e.n_treated,
                    n_baseline: e.n_baseline,
                    source: e.source,
                })
            })
            .collect()
    }

    /// Adds rows for nodes on `path` (root first) that were materialized after
    /// the table was computed. Such nodes have no data of their own, so they
    /// either inherit their parent's resolved row or stay unavailable.
    pub fn extend_for_path(&mut self, path: &[NodeId], inheritance_enabled: bool) {
        let width = self.width();
        for node in path {
            if self.rows.contains_key(node) {
                continue;
            }
            let parent_row = node
                .parent()
                .and_then(|p| self.rows.get(&p))
                .filter(|_| inheritance_enabled);
            let row = match parent_row {
                Some(row) => row.iter().map(inherit).collect(),
                None => vec![UpliftEstimate::unavailable(0, 0); width],
            };
            self.rows.insert(node.clone(), row);
        }
    }
}

fn inherit(parent: &UpliftEstimate) -> UpliftEstimate {
    let mut e = *parent;
    if e.source != EstimateSource::Unavailable {
        e.source = EstimateSource::Inherited;
    }
    e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChildWeight {
    pub node: NodeId,
    pub weight: f64,
}

/// Cohort-size weights of `parent`'s children for `action`: each child counts
/// its samples of `action` plus its baseline samples. All-zero counts give
/// uniform weights.
pub fn child_weights(tree: &ContextTree, parent: &NodeId, action: usize) -> Result<Vec<ChildWeight>> {
    if tree.is_leaf(parent) {
        return Err(HcubError::invalid(format!("{parent} is a leaf")));
    }
    let baseline = tree.actions().baseline_index();
    let children = tree.children(parent)?;
    let sizes: Vec<f64> = children
        .iter()
        .map(|c| {
            let n = if action == baseline {
                tree.count(c, baseline)
            } else {
                tree.count(c, action) + tree.count(c, baseline)
            };
            n as f64
        })
        .collect();
    let total: f64 = sizes.iter().sum();
    let k = sizes.len() as f64;
    Ok(children
        .into_iter()
        .zip(&sizes)
        .map(|(node, &n)| ChildWeight {
            node: node.clone(),
            weight: if total > 0.0 { n / total } else { 1.0 / k },
        })
        .collect())
}

/// Weighted combination of child estimates. Unavailable children are
/// dropped and the remaining weights renormalized; medians and both interval
/// endpoints are combined with the same weights.
pub fn aggregate_children(
    child_estimates: &[UpliftEstimate],
    weights: &[ChildWeight],
) -> Result<UpliftEstimate> {
    if child_estimates.len() != weights.len() {
        return Err(HcubError::invalid(format!(
            "{} child estimates but {} weights",
            child_estimates.len(),
            weights.len()
        )));
    }
    let included: Vec<(&UpliftEstimate, f64)> = child_estimates
        .iter()
        .zip(weights)
        .filter(|(e, _)| e.is_available())
        .map(|(e, w)| (e, w.weight))
        .collect();
    if included.is_empty() {
        let n_t = child_estimates.iter().map(|e| e.n_treated).sum();
        let n_b = child_estimates.iter().map(|e| e.n_baseline).sum();
        return Ok(UpliftEstimate::unavailable(n_t, n_b));
    }
    let total: f64 = included.iter().map(|(_, w)| w).sum();
    let uniform = 1.0 / included.len() as f64;
    let mut out = UpliftEstimate {
        median: 0.0,
        ci_lower: 0.0,
        ci_upper: 0.0,
        n_treated: 0,
        n_baseline: 0,
        source: EstimateSource::Computed,
    };
    for (e, w) in included {
        let w = if total > 0.0 { w / total } else { uniform };
        out.median += w * e.median;
        out.ci_lower += w * e.ci_lower;
        out.ci_upper += w * e.ci_upper;
        out.n_treated += e.n_treated;
        out.n_baseline += e.n_baseline;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
struct Cached {
    n_treated: usize,
    n_baseline: usize,
    estimate: UpliftEstimate,
}

/// Estimation pipeline with a memo of leaf bootstraps.
///
/// Stores are append-only and each (leaf, arm) bootstrap draws from its own
/// stream derived from the root seed, so an entry whose group sizes have not
/// changed since the last call is reused verbatim. Results are identical to
/// a fresh estimator.
#[derive(Debug, Clone)]
pub struct TreeEstimator {
    config: EstimatorConfig,
    cache: HashMap<(NodeId, usize), Cached>,
}

impl TreeEstimator {
    pub fn new(config: EstimatorConfig) -> Self {
        Self {
            config,
            cache: HashMap::new(),
        }
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    fn leaf_estimate(&mut self, store: &ObservationStore, leaf: &NodeId, action: usize) -> UpliftEstimate {
        let treated = store.treated(leaf, action);
        let baseline = store.baseline(leaf);
        let key = (leaf.clone(), action);
        if let Some(hit) = self.cache.get(&key) {
            if hit.n_treated == treated.len() && hit.n_baseline == baseline.len() {
                return hit.estimate;
            }
        }
        let estimate = if treated.is_empty() || baseline.is_empty() {
            UpliftEstimate::unavailable(treated.len() as u64, baseline.len() as u64)
        } else {
            let mut rng = leaf
                .path()
                .iter()
                .fold(SeedMixer::new(self.config.rng_seed), |m, v| m.str(v))
                .u64(action as u64)
                .rng();
            bootstrap_uplift_with(treated, baseline, &self.config, &mut rng)
                .expect("groups are non-empty")
        };
        self.cache.insert(
            key,
            Cached {
                n_treated: treated.len(),
                n_baseline: baseline.len(),
                estimate,
            },
        );
        estimate
    }

    /// One estimate per (materialized leaf, non-baseline arm).
    pub fn leaf_estimates(&mut self, store: &ObservationStore, tree: &ContextTree) -> EstimateTable {
        let actions = *tree.actions();
        let mut table = EstimateTable::new(actions);
        let treatments = actions.treatment_indices();
        for leaf in tree.leaves() {
            let row = treatments
                .iter()
                .map(|&a| self.leaf_estimate(store, leaf, a))
                .collect();
            table.insert_row(leaf.clone(), row).expect("row width matches");
        }
        table
    }

    /// Leaf estimates, bottom-up aggregation and, when enabled, top-down inheritance.
    pub fn estimate(
        &mut self,
        store: &ObservationStore,
        tree: &ContextTree,
        inheritance_enabled: bool,
    ) -> Result<EstimateTable> {
        let mut table = self.leaf_estimates(store, tree);
        aggregate_bottom_up(tree, &mut table)?;
        if inheritance_enabled {
            resolve_in_place(tree, &mut table)?;
        }
        Ok(table)
    }
}

pub fn compute_leaf_estimates(
    store: &ObservationStore,
    tree: &ContextTree,
    config: &EstimatorConfig,
) -> EstimateTable {
    TreeEstimator::new(*config).leaf_estimates(store, tree)
}

fn aggregate_bottom_up(tree: &ContextTree, table: &mut EstimateTable) -> Result<()> {
    let treatments = table.action_indices();
    for node in tree.iter_bottom_up() {
        if tree.is_leaf(node) {
            continue;
        }
        let children = tree.children(node)?;
        let mut row = Vec::with_capacity(treatments.len());
        for &action in &treatments {
            let weights = child_weights(tree, node, action)?;
            let estimates = children
                .iter()
                .map(|c| {
                    table.get(c, action).copied().ok_or_else(|| {
                        HcubError::internal(format!("no estimate for {c} action {action}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            row.push(aggregate_children(&estimates, &weights)?);
        }
        table.insert_row(node.clone(), row)?;
    }
    Ok(())
}

fn resolve_in_place(tree: &ContextTree, table: &mut EstimateTable) -> Result<()> {
    let treatments = table.action_indices();
    for node in tree.iter_top_down() {
        if !table.contains(node) {
            return Err(HcubError::internal(format!("no estimates for {node}")));
        }
        let Some(parent) = tree.parent(node) else {
            continue;
        };
        for &action in &treatments {
            let own = *table.get(node, action).expect("row checked");
            if is_significant(&own) {
                continue;
            }
            let from_parent = table
                .get(parent, action)
                .map(inherit)
                .ok_or_else(|| HcubError::internal(format!("no estimates for {parent}")))?;
            table.set(node, action, from_parent)?;
        }
    }
    Ok(())
}

/// Top-down pass: the root keeps its own estimates; any other node keeps a
/// significant estimate and otherwise takes its parent's resolved one.
pub fn propagate_inheritance(tree: &ContextTree, estimates: &EstimateTable) -> Result<EstimateTable> {
    let mut table = estimates.clone();
    resolve_in_place(tree, &mut table)?;
    Ok(table)
}

pub fn compute_tree_estimates(
    store: &ObservationStore,
    tree: &ContextTree,
    config: &EstimatorConfig,
    inheritance_enabled: bool,
) -> Result<EstimateTable> {
    TreeEstimator::new(*config).estimate(store, tree, inheritance_enabled)
}

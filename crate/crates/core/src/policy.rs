//! Arm selection and the per-round learning loop.
//!
//! Each non-baseline arm at a leaf is scored as its resolved median uplift
//! plus an optimism bonus `c * (ci_upper - median)`, the upper spread of the
//! bootstrap distribution. Arms without an estimate get `optimistic_init`
//! instead, unless the leaf already holds enough treated samples for them and
//! only baseline data is missing; such arms score zero and the baseline
//! (which always scores zero) wins the tie, collecting the data they wait on.
//!
//! Ties are broken deterministically: the baseline wins ties at its score,
//! then the arm with fewer local samples, then the lower index.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{HcubError, Result};
use crate::model::{ActionSpace, ActionVector, Context, MetricVector, RewardWeights};
use crate::tree::{ContextTree, NodeId, TreeSchema};
use crate::uplift::{
    EstimateSource, EstimateTable, EstimatorConfig, Observation, ObservationStore, TreeEstimator,
    UpliftEstimate,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub exploration_coefficient: f64,
    /// Score given to arms with no usable estimate.
    pub optimistic_init: f64,
    /// Rounds between recomputations of the estimate table.
    pub refresh_interval: u64,
    pub inheritance_enabled: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            exploration_coefficient: 1.0,
            optimistic_init: 1.0e6,
            refresh_interval: 100,
            inheritance_enabled: true,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        let c = self.exploration_coefficient;
        if !c.is_finite() || c < 0.0 {
            return Err(HcubError::invalid(format!(
                "exploration_coefficient must be finite and >= 0, got {c}"
            )));
        }
        if !self.optimistic_init.is_finite() || self.optimistic_init <= 0.0 {
            return Err(HcubError::invalid(format!(
                "optimistic_init must be finite and positive, got {}",
                self.optimistic_init
            )));
        }
        if self.refresh_interval == 0 {
            return Err(HcubError::invalid("refresh_interval must be at least 1"));
        }
        Ok(())
    }

    /// Rejects an `optimistic_init` that a resolved score could reach, given
    /// a bound on the magnitude of scores the environment can produce.
    pub fn validate_against(&self, score_bound: f64) -> Result<()> {
        self.validate()?;
        if self.optimistic_init <= score_bound {
            return Err(HcubError::invalid(format!(
                "optimistic_init {} does not exceed the plausible score bound {score_bound}",
                self.optimistic_init
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcbScore {
    pub action: usize,
    pub exploitation: f64,
    pub exploration: f64,
    pub total: f64,
    /// `None` for the baseline arm.
    pub source: Option<EstimateSource>,
}

impl UcbScore {
    fn new(action: usize, exploitation: f64, exploration: f64, source: Option<EstimateSource>) -> Self {
        Self {
            action,
            exploitation,
            exploration,
            total: exploitation + exploration,
            source,
        }
    }

    pub fn source_label(&self) -> &'static str {
        self.source.map(EstimateSource::as_str).unwrap_or("baseline")
    }
}

pub fn exploration_term(estimate: &UpliftEstimate, config: &PolicyConfig) -> f64 {
    match estimate.source {
        EstimateSource::Computed | EstimateSource::Inherited => {
            config.exploration_coefficient * (estimate.ci_upper - estimate.median)
        }
        EstimateSource::Unavailable => config.optimistic_init,
    }
}

/// Scores every arm at a leaf, baseline included, in action-index order.
///
/// `row` is the leaf's resolved estimates by action index (baseline entry
/// ignored) and `local_counts` its per-arm sample counts.
pub fn score_arms(
    actions: &ActionSpace,
    row: &[UpliftEstimate],
    local_counts: &[u64],
    policy: &PolicyConfig,
    min_samples_per_group: usize,
) -> Vec<UcbScore> {
    (0..actions.size())
        .map(|a| {
            if actions.is_baseline(a) {
                return UcbScore::new(a, 0.0, 0.0, None);
            }
            let e = &row[a];
            match e.source {
                EstimateSource::Unavailable
                    if local_counts.get(a).copied().unwrap_or(0) >= min_samples_per_group as u64 =>
                {
                    UcbScore::new(a, 0.0, 0.0, Some(e.source))
                }
                EstimateSource::Unavailable => {
                    UcbScore::new(a, 0.0, exploration_term(e, policy), Some(e.source))
                }
                _ => UcbScore::new(a, e.median, exploration_term(e, policy), Some(e.source)),
            }
        })
        .collect()
}

/// Index into `scores` of the winning arm.
pub fn choose(scores: &[UcbScore], baseline: usize, local_counts: &[u64]) -> usize {
    let pulls = |a: usize| local_counts.get(a).copied().unwrap_or(0);
    let better = |x: &UcbScore, y: &UcbScore| -> Ordering {
        x.total
            .total_cmp(&y.total)
            .then_with(|| (x.action == baseline).cmp(&(y.action == baseline)))
            .then_with(|| pulls(y.action).cmp(&pulls(x.action)))
            .then_with(|| y.action.cmp(&x.action))
    };
    let mut best = 0;
    for i in 1..scores.len() {
        if better(&scores[i], &scores[best]) == Ordering::Greater {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub action: ActionVector,
    pub score: UcbScore,
    pub scores: Vec<UcbScore>,
}

/// Picks the arm for `leaf` from a resolved table. Every non-baseline arm
/// must have an entry for the leaf.
pub fn select_action(
    leaf: &NodeId,
    table: &EstimateTable,
    tree: &ContextTree,
    policy: &PolicyConfig,
    min_samples_per_group: usize,
) -> Result<Selection> {
    let actions = *table.actions();
    let mut row = vec![UpliftEstimate::unavailable(0, 0); actions.size()];
    let entries = table
        .row(leaf)
        .ok_or_else(|| HcubError::internal(format!("no estimates for leaf {leaf}")))?;
    for (a, e) in entries {
        row[a] = *e;
    }
    let counts = tree
        .counts(leaf)
        .map(<[u64]>::to_vec)
        .unwrap_or_else(|| vec![0; actions.size()]);
    select_from_row(&actions, &row, &counts, policy, min_samples_per_group)
}

fn select_from_row(
    actions: &ActionSpace,
    row: &[UpliftEstimate],
    counts: &[u64],
    policy: &PolicyConfig,
    min_samples_per_group: usize,
) -> Result<Selection> {
    let scores = score_arms(actions, row, counts, policy, min_samples_per_group);
    let best = choose(&scores, actions.baseline_index(), counts);
    let score = scores[best];
    Ok(Selection {
        action: actions.action(score.action)?,
        score,
        scores,
    })
}

/// Source of realized metrics for a served arm: a simulator or a replay.
pub trait FeedbackProvider {
    fn feedback(&mut self, context: &Context, action: &ActionVector) -> Result<MetricVector>;
}

impl<F> FeedbackProvider for F
where
    F: FnMut(&Context, &ActionVector) -> Result<MetricVector>,
{
    fn feedback(&mut self, context: &Context, action: &ActionVector) -> Result<MetricVector> {
        self(context, action)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub round: u64,
    pub leaf: NodeId,
    pub action: ActionVector,
    pub score: UcbScore,
    pub metrics: MetricVector,
    pub reward: f64,
    pub refreshed: bool,
}

/// Everything the learning loop carries between rounds.
#[derive(Debug, Clone)]
pub struct PolicyState {
    tree: ContextTree,
    store: ObservationStore,
    estimator: TreeEstimator,
    table: Option<EstimateTable>,
    policy: PolicyConfig,
    round: u64,
}

impl PolicyState {
    pub fn new(
        schema: TreeSchema,
        actions: ActionSpace,
        weights: RewardWeights,
        estimator: EstimatorConfig,
        policy: PolicyConfig,
    ) -> Result<Self> {
        weights.validate()?;
        estimator.validate()?;
        policy.validate()?;
        Ok(Self {
            tree: ContextTree::new(schema, actions),
            store: ObservationStore::new(actions, weights),
            estimator: TreeEstimator::new(estimator),
            table: None,
            policy,
            round: 0,
        })
    }

    pub fn tree(&self) -> &ContextTree {
        &self.tree
    }

    pub fn store(&self) -> &ObservationStore {
        &self.store
    }

    pub fn policy(&self) -> &PolicyConfig {
        &self.policy
    }

    pub fn estimator_config(&self) -> &EstimatorConfig {
        self.estimator.config()
    }

    /// Number of completed rounds.
    pub fn round(&self) -> u64 {
        self.round
    }

    /// The table the next selection would use if no refresh were due.
    pub fn table(&self) -> Option<&EstimateTable> {
        self.table.as_ref()
    }

    /// Recomputes the resolved table from everything observed so far.
    pub fn refresh(&mut self) -> Result<&EstimateTable> {
        let table = self
            .estimator
            .estimate(&self.store, &self.tree, self.policy.inheritance_enabled)?;
        Ok(self.table.insert(table))
    }

    /// Scores the arms for `context` without changing any state.
    pub fn preview(&self, context: &Context, table: &EstimateTable) -> Result<Selection> {
        self.tree.schema().check_context(context)?;
        let path = NodeId::new(context.values()).ancestry();
        let leaf = path.last().expect("path has a root");
        let actions = *self.tree.actions();
        let row = leaf_row(table, &path, self.policy.inheritance_enabled);
        let counts = self
            .tree
            .counts(leaf)
            .map(<[u64]>::to_vec)
            .unwrap_or_else(|| vec![0; actions.size()]);
        select_from_row(
            &actions,
            &row,
            &counts,
            &self.policy,
            self.estimator.config().min_samples_per_group,
        )
    }

    /// One round: refresh estimates when due, select an arm for the context,
    /// fetch feedback and record it. On error nothing observable changes and
    /// the round counter stays put.
    pub fn run_round<P: FeedbackProvider + ?Sized>(
        &mut self,
        context: &Context,
        feedback: &mut P,
    ) -> Result<RoundOutcome> {
        self.tree.schema().check_context(context)?;
        let due = self.table.is_none() || self.round.is_multiple_of(self.policy.refresh_interval);
        let fresh = if due {
            Some(
                self.estimator
                    .estimate(&self.store, &self.tree, self.policy.inheritance_enabled)?,
            )
        } else {
            None
        };
        let table = fresh
            .as_ref()
            .or(self.table.as_ref())
            .expect("table present when no refresh is due");
        let selection = self.preview(context, table)?;
        let metrics = feedback.feedback(context, &selection.action)?;
        let obs = Observation {
            context: context.clone(),
            action: selection.action.clone(),
            metrics,
            round: self.round,
        };
        let (leaf, reward) = self.store.record(&mut self.tree, &obs)?;
        if let Some(table) = fresh {
            self.table = Some(table);
        }
        let outcome = RoundOutcome {
            round: self.round,
            leaf,
            action: selection.action,
            score: selection.score,
            metrics,
            reward,
            refreshed: due,
        };
        self.round += 1;
        Ok(outcome)
    }
}

/// The leaf's resolved row by action index. A leaf (or any of its ancestors)
/// created after the table was computed has no data; it inherits the deepest
/// ancestor present when inheritance is on and is unavailable otherwise.
fn leaf_row(table: &EstimateTable, path: &[NodeId], inheritance: bool) -> Vec<UpliftEstimate> {
    let size = table.actions().size();
    let mut row = vec![UpliftEstimate::unavailable(0, 0); size];
    let leaf = path.last().expect("path has a root");
    let source = if table.contains(leaf) {
        Some((leaf, false))
    } else if inheritance {
        path.iter().rev().find(|n| table.contains(n)).map(|n| (n, true))
    } else {
        None
    };
    if let Some((node, inherited)) = source {
        for (a, e) in table.row(node).expect("row present") {
            let mut e = *e;
            if inherited && e.is_available() {
                e.source = EstimateSource::Inherited;
            }
            row[a] = e;
        }
    }
    row
}

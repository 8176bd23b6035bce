//! Uplift estimation over the context tree.
//!
//! Rewards are scalarized per observation with the run's reward weights, and
//! each (leaf, arm) uplift against the baseline arm is estimated by a
//! two-sample bootstrap of the mean difference. Leaf estimates are then
//! aggregated bottom-up with cohort-size weights, and optionally resolved
//! top-down: a node without a significant uplift for an arm adopts its
//! parent's resolved estimate.

mod bootstrap;
mod hierarchy;
mod store;

use serde::{Deserialize, Serialize};

pub use bootstrap::{
    bootstrap_differences, bootstrap_uplift, bootstrap_uplift_with, percentile_sorted,
    EstimatorConfig,
};
pub use hierarchy::{
    aggregate_children, child_weights, compute_leaf_estimates, compute_tree_estimates,
    propagate_inheritance, ChildWeight, EstimateRecord, EstimateTable, TreeEstimator,
};
pub use store::{record_observation, Observation, ObservationStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateSource {
    Computed,
    Inherited,
    Unavailable,
}

impl EstimateSource {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimateSource::Computed => "computed",
            EstimateSource::Inherited => "inherited",
            EstimateSource::Unavailable => "unavailable",
        }
    }
}

/// Uplift of one arm over the baseline at one node. Numeric fields of an
/// unavailable estimate are zero and carry no information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpliftEstimate {
    pub median: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub n_treated: u64,
    pub n_baseline: u64,
    pub source: EstimateSource,
}

impl UpliftEstimate {
    pub fn unavailable(n_treated: u64, n_baseline: u64) -> Self {
        Self {
            median: 0.0,
            ci_lower: 0.0,
            ci_upper: 0.0,
            n_treated,
            n_baseline,
            source: EstimateSource::Unavailable,
        }
    }

    pub fn computed(median: f64, ci_lower: f64, ci_upper: f64) -> Self {
        Self {
            median,
            ci_lower,
            ci_upper,
            n_treated: 0,
            n_baseline: 0,
            source: EstimateSource::Computed,
        }
    }

    pub fn is_available(&self) -> bool {
        self.source != EstimateSource::Unavailable
    }
}

/// True iff the estimate was computed and its interval excludes zero
/// strictly. An endpoint exactly at zero does not count.
pub fn is_significant(estimate: &UpliftEstimate) -> bool {
    estimate.source == EstimateSource::Computed && (estimate.ci_lower > 0.0 || estimate.ci_upper < 0.0)
}

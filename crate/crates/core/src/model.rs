//! Actions, metrics, reward weights and contexts.
//!
//! An arm assigns one of three size variants (Low, Medium, High) to each of
//! `B` catalog buckets, giving `3^B` arms. Arms are identified by their
//! mixed-radix base-3 index with the leftmost bucket most significant, so
//! every per-arm table in the crate is a dense vector indexed by
//! [`ActionVector::index`]. The all-Medium arm is the business-as-usual
//! baseline every uplift is measured against.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{HcubError, Result};

pub const DEFAULT_BUCKET_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BucketLevel {
    Low,
    Medium,
    High,
}

impl BucketLevel {
    pub const ALL: [BucketLevel; 3] = [BucketLevel::Low, BucketLevel::Medium, BucketLevel::High];

    pub fn digit(self) -> usize {
        match self {
            BucketLevel::Low => 0,
            BucketLevel::Medium => 1,
            BucketLevel::High => 2,
        }
    }

    pub fn from_digit(digit: usize) -> Option<Self> {
        Self::ALL.get(digit).copied()
    }

    pub fn symbol(self) -> char {
        match self {
            BucketLevel::Low => 'L',
            BucketLevel::Medium => 'M',
            BucketLevel::High => 'H',
        }
    }
}

/// The arm space for a fixed bucket count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionSpace {
    bucket_count: usize,
    size: usize,
}

impl ActionSpace {
    pub fn new(bucket_count: usize) -> Result<Self> {
        if bucket_count == 0 {
            return Err(HcubError::invalid("bucket count must be at least 1"));
        }
        let size = u32::try_from(bucket_count)
            .ok()
            .and_then(|b| 3usize.checked_pow(b))
            .ok_or_else(|| {
                HcubError::invalid(format!("3^{bucket_count} arms overflows the index type"))
            })?;
        Ok(Self { bucket_count, size })
    }

    pub fn bucket_count(&self) -> usize {
        self.bucket_count
    }

    /// Number of arms, `3^B`.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Index of the all-Medium baseline, `(3^B - 1) / 2`.
    pub fn baseline_index(&self) -> usize {
        (self.size - 1) / 2
    }

    pub fn baseline(&self) -> ActionVector {
        ActionVector {
            levels: vec![BucketLevel::Medium; self.bucket_count],
        }
    }

    pub fn is_baseline(&self, index: usize) -> bool {
        index == self.baseline_index()
    }

    pub fn action(&self, index: usize) -> Result<ActionVector> {
        if index >= self.size {
            return Err(HcubError::invalid(format!(
                "action index {index} out of range 0..{}",
                self.size - 1
            )));
        }
        let mut levels = vec![BucketLevel::Low; self.bucket_count];
        let mut rest = index;
        for slot in levels.iter_mut().rev() {
            *slot = BucketLevel::ALL[rest % 3];
            rest /= 3;
        }
        Ok(ActionVector { levels })
    }

    pub fn actions(&self) -> Vec<ActionVector> {
        (0..self.size)
            .map(|i| self.action(i).expect("index in range"))
            .collect()
    }

    /// Non-baseline arm indices in ascending order.
    pub fn treatment_indices(&self) -> Vec<usize> {
        (0..self.size).filter(|&i| !self.is_baseline(i)).collect()
    }

    pub fn check(&self, action: &ActionVector) -> Result<()> {
        if action.len() != self.bucket_count {
            return Err(HcubError::invalid(format!(
                "action {action} has {} buckets, expected {}",
                action.len(),
                self.bucket_count
            )));
        }
        Ok(())
    }
}

/// One arm: a size variant per bucket.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionVector {
    levels: Vec<BucketLevel>,
}

impl ActionVector {
    pub fn new(levels: Vec<BucketLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(HcubError::invalid("an action needs at least one bucket"));
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[BucketLevel] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Mixed-radix base-3 value, leftmost bucket most significant.
    pub fn index(&self) -> usize {
        self.levels.iter().fold(0, |acc, l| acc * 3 + l.digit())
    }

    pub fn is_baseline(&self) -> bool {
        self.levels.iter().all(|&l| l == BucketLevel::Medium)
    }
}

impl fmt::Display for ActionVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, level) in self.levels.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", level.symbol())?;
        }
        f.write_str("]")
    }
}

/// All `3^B` arms in ascending index order.
pub fn enumerate_actions(bucket_count: usize) -> Result<Vec<ActionVector>> {
    Ok(ActionSpace::new(bucket_count)?.actions())
}

pub fn baseline_action(bucket_count: usize) -> Result<ActionVector> {
    Ok(ActionSpace::new(bucket_count)?.baseline())
}

pub fn action_index(action: &ActionVector) -> usize {
    action.index()
}

/// Observed outcome metrics for one served catalog. Components are signed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub engagement: f64,
    pub retention_proxy: f64,
    pub revenue: f64,
}

impl MetricVector {
    pub fn new(engagement: f64, retention_proxy: f64, revenue: f64) -> Result<Self> {
        Self::from_array([engagement, retention_proxy, revenue])
    }

    pub fn from_array(values: [f64; 3]) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(HcubError::InvalidObservation(format!(
                "metrics must be finite, got {values:?}"
            )));
        }
        Ok(Self {
            engagement: values[0],
            retention_proxy: values[1],
            revenue: values[2],
        })
    }

    pub fn zero() -> Self {
        Self {
            engagement: 0.0,
            retention_proxy: 0.0,
            revenue: 0.0,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.engagement, self.retention_proxy, self.revenue]
    }
}

/// Weights `(λ1, λ2, λ3)` for engagement, retention proxy and revenue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl Default for RewardWeights {
    /// Revenue first, engagement and retention at half weight.
    fn default() -> Self {
        Self {
            lambda1: 0.5,
            lambda2: 0.5,
            lambda3: 1.0,
        }
    }
}

impl RewardWeights {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        let weights = Self {
            lambda1,
            lambda2,
            lambda3,
        };
        weights.validate()?;
        Ok(weights)
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.to_array();
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(HcubError::invalid(format!(
                "reward weights must be finite and non-negative, got {all:?}"
            )));
        }
        if all.iter().all(|&w| w == 0.0) {
            return Err(HcubError::invalid("at least one reward weight must be positive"));
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.lambda1, self.lambda2, self.lambda3]
    }

    /// Scalar reward of a metric vector. Metric vectors are finite by
    /// construction, so this cannot fail.
    pub fn scalarize(&self, metrics: &MetricVector) -> f64 {
        self.lambda1 * metrics.engagement
            + self.lambda2 * metrics.retention_proxy
            + self.lambda3 * metrics.revenue
    }
}

/// `λ1·v1 + λ2·v2 + λ3·v3`, applied to raw metrics or to per-metric uplifts.
pub fn weighted_combine(values: [f64; 3], weights: &RewardWeights) -> Result<f64> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(HcubError::invalid(format!("non-finite value in {values:?}")));
    }
    weights.validate()?;
    Ok(weights.lambda1 * values[0] + weights.lambda2 * values[1] + weights.lambda3 * values[2])
}

/// Feature values ordered from system level (root side) to user level (leaf side).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Context {
    features: Vec<(String, String)>,
}

impl Context {
    pub fn new<I, K, V>(features: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self {
            features: features
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        }
    }

    pub fn features(&self) -> &[(String, String)] {
        &self.features
    }

    pub fn values(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|(_, v)| v.as_str())
    }

    pub fn level_names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|(k, _)| k.as_str())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.features.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

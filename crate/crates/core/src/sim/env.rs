use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{HcubError, Result};
use crate::model::{ActionSpace, ActionVector, Context, MetricVector, RewardWeights};
use crate::rng::SeedMixer;
use crate::tree::{NodeId, TreeSchema};

/// How true mean metrics per (leaf, arm) come about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeanModel {
    /// Baseline means vary per leaf around `base_mean`. Every internal node
    /// draws an uplift per non-baseline arm and metric with sd
    /// `parent_signal_sd[depth]` (root at depth 0, one entry per schema
    /// level); a leaf's uplift is the sum over its ancestors plus its own
    /// perturbation with sd `leaf_perturbation_sd`.
    Generated {
        base_mean: [f64; 3],
        base_sd: f64,
        parent_signal_sd: Vec<f64>,
        leaf_perturbation_sd: f64,
    },
    /// Fixed means, one entry per leaf, each listing every arm by index.
    Explicit { leaves: Vec<ExplicitLeaf> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitLeaf {
    pub path: Vec<String>,
    pub means: Vec<[f64; 3]>,
}

/// Distribution of arriving contexts over leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContextDistribution {
    Uniform,
    /// Independent per-level weights over each vocabulary; a leaf's weight is
    /// the product along its path.
    PerLevel { weights: Vec<Vec<f64>> },
    /// One weight per leaf, leaves in vocabulary cross-product order.
    PerLeaf { weights: Vec<f64> },
    PointMass { leaf: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub schema: TreeSchema,
    pub bucket_count: usize,
    /// Feature values per schema level; leaves are their cross product.
    pub vocabularies: Vec<Vec<String>>,
    pub means: MeanModel,
    /// Per-metric observation noise standard deviations.
    pub noise_sd: [f64; 3],
    pub contexts: ContextDistribution,
    /// Round at which generated true means are redrawn.
    #[serde(default)]
    pub shift_round: Option<u64>,
    #[serde(default)]
    pub seed: u64,
}

impl EnvironmentSpec {
    pub fn validate(&self) -> Result<()> {
        ActionSpace::new(self.bucket_count)?;
        if self.vocabularies.len() != self.schema.depth() {
            return Err(HcubError::invalid(format!(
                "{} vocabularies for a {}-level schema",
                self.vocabularies.len(),
                self.schema.depth()
            )));
        }
        for (level, vocab) in self.schema.levels().iter().zip(&self.vocabularies) {
            if vocab.is_empty() {
                return Err(HcubError::invalid(format!("empty vocabulary for `{}`", level.name)));
            }
            for (i, v) in vocab.iter().enumerate() {
                if vocab[..i].contains(v) {
                    return Err(HcubError::invalid(format!(
                        "duplicate value `{v}` in vocabulary `{}`",
                        level.name
                    )));
                }
            }
        }
        if self.noise_sd.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(HcubError::invalid("noise standard deviations must be finite and >= 0"));
        }
        if let MeanModel::Generated {
            base_mean,
            base_sd,
            parent_signal_sd,
            leaf_perturbation_sd,
        } = &self.means
        {
            if parent_signal_sd.len() != self.schema.depth() {
                return Err(HcubError::invalid(format!(
                    "parent_signal_sd needs one entry per level ({}), got {}",
                    self.schema.depth(),
                    parent_signal_sd.len()
                )));
            }
            let sds = [*base_sd, *leaf_perturbation_sd];
            if sds.iter().chain(parent_signal_sd).any(|s| !s.is_finite() || *s < 0.0)
                || base_mean.iter().any(|m| !m.is_finite())
            {
                return Err(HcubError::invalid("generator parameters must be finite, sds >= 0"));
            }
        }
        Ok(())
    }

    /// Leaf paths in cross-product order, first level varying slowest.
    pub fn leaf_paths(&self) -> Vec<Vec<String>> {
        let mut paths = vec![Vec::new()];
        for vocab in &self.vocabularies {
            paths = paths
                .into_iter()
                .flat_map(|p| {
                    vocab.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push(v.clone());
                        q
                    })
                })
                .collect();
        }
        paths
    }
}

/// Materialized ground truth.
#[derive(Debug, Clone)]
pub struct Environment {
    spec: EnvironmentSpec,
    actions: ActionSpace,
    leaves: Vec<NodeId>,
    leaf_index: HashMap<NodeId, usize>,
    /// epoch -> leaf -> arm -> mean metrics
    epochs: Vec<Vec<Vec<MetricVector>>>,
    context_weights: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

impl Environment {
    pub fn build(spec: &EnvironmentSpec) -> Result<Self> {
        spec.validate()?;
        let actions = ActionSpace::new(spec.bucket_count)?;
        let paths = spec.leaf_paths();
        let leaves: Vec<NodeId> = paths.iter().map(|p| NodeId::new(p.iter().cloned())).collect();
        let leaf_index: HashMap<NodeId, usize> =
            leaves.iter().cloned().enumerate().map(|(i, l)| (l, i)).collect();

        let epochs = match &spec.means {
            MeanModel::Generated { .. } => {
                let count = if spec.shift_round.is_some() { 2 } else { 1 };
                (0..count).map(|e| generate(spec, &actions, &leaves, e)).collect()
            }
            MeanModel::Explicit { leaves: explicit } => {
                vec![explicit_means(explicit, &actions, &leaf_index)?]
            }
        };

        let context_weights = context_weights(spec, &leaves)?;
        let sampler = WeightedIndex::new(&context_weights)
            .map_err(|e| HcubError::invalid(format!("context weights: {e}")))?;
        Ok(Self {
            spec: spec.clone(),
            actions,
            leaves,
            leaf_index,
            epochs,
            context_weights,
            sampler,
        })
    }

    pub fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    pub fn schema(&self) -> &TreeSchema {
        &self.spec.schema
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn context_weights(&self) -> &[f64] {
        &self.context_weights
    }

    fn epoch(&self, round: u64) -> &[Vec<MetricVector>] {
        match self.spec.shift_round {
            Some(shift) if round >= shift && self.epochs.len() > 1 => &self.epochs[1],
            _ => &self.epochs[0],
        }
    }

    pub fn leaf_of(&self, context: &Context) -> Result<usize> {
        self.spec.schema.check_context(context)?;
        let id = NodeId::new(context.values());
        self.leaf_index
            .get(&id)
            .copied()
            .ok_or_else(|| HcubError::UnknownContext(format!("{context} is not a leaf of this environment")))
    }

    pub fn leaf_context(&self, leaf: usize) -> Context {
        self.spec
            .schema
            .context(self.leaves[leaf].path())
            .expect("leaf paths match the schema")
    }

    pub fn true_mean(&self, leaf: usize, action: usize, round: u64) -> MetricVector {
        self.epoch(round)[leaf][action]
    }

    pub fn expected_reward(&self, leaf: usize, action: usize, weights: &RewardWeights, round: u64) -> f64 {
        weights.scalarize(&self.true_mean(leaf, action, round))
    }

    pub fn sample_context<R: Rng + ?Sized>(&self, rng: &mut R) -> Context {
        self.leaf_context(self.sampler.sample(rng))
    }

    /// True mean plus independent Gaussian noise per metric.
    pub fn sample_metrics<R: Rng + ?Sized>(
        &self,
        context: &Context,
        action: &ActionVector,
        round: u64,
        rng: &mut R,
    ) -> Result<MetricVector> {
        self.actions.check(action)?;
        let leaf = self.leaf_of(context)?;
        let mean = self.true_mean(leaf, action.index(), round).to_array();
        let mut out = [0.0; 3];
        for k in 0..3 {
            out[k] = if self.spec.noise_sd[k] == 0.0 {
                mean[k]
            } else {
                let z: f64 = rng.sample(StandardNormal);
                mean[k] + self.spec.noise_sd[k] * z
            };
        }
        MetricVector::from_array(out)
    }

    /// Best arm (baseline included) by expected scalar reward; ties go to the
    /// lowest index.
    pub fn oracle_action(&self, leaf: usize, weights: &RewardWeights, round: u64) -> ActionVector {
        let mut best = 0;
        let mut best_value = self.expected_reward(leaf, 0, weights, round);
        for a in 1..self.actions.size() {
            let v = self.expected_reward(leaf, a, weights, round);
            if v > best_value {
                best = a;
                best_value = v;
            }
        }
        self.actions.action(best).expect("index in range")
    }

    /// Largest scalar uplift magnitude anywhere plus the scalar noise sd; a
    /// bound on scores a resolved estimate can plausibly reach (up to a small
    /// multiple).
    pub fn score_scale(&self, weights: &RewardWeights) -> f64 {
        let base = self.actions.baseline_index();
        let mut max_uplift: f64 = 0.0;
        for epoch in &self.epochs {
            for leaf in epoch {
                let b = weights.scalarize(&leaf[base]);
                for m in leaf {
                    max_uplift = max_uplift.max((weights.scalarize(m) - b).abs());
                }
            }
        }
        let w = weights.to_array();
        let noise = (0..3)
            .map(|k| (w[k] * self.spec.noise_sd[k]).powi(2))
            .sum::<f64>()
            .sqrt();
        max_uplift + noise
    }
}

pub fn build_environment(spec: &EnvironmentSpec) -> Result<Environment> {
    Environment::build(spec)
}

fn normal3(mixer: SeedMixer, sd: f64) -> [f64; 3] {
    if sd == 0.0 {
        return [0.0; 3];
    }
    let mut rng = mixer.rng();
    let mut out = [0.0; 3];
    for v in &mut out {
        let z: f64 = rng.sample(StandardNormal);
        *v = sd * z;
    }
    out
}

fn node_mixer(seed: u64, epoch: u64, tag: &str, node: &NodeId) -> SeedMixer {
    node.path()
        .iter()
        .fold(SeedMixer::new(seed).u64(epoch).str(tag).u64(node.depth() as u64), |m, v| m.str(v))
}

fn generate(spec: &EnvironmentSpec, actions: &ActionSpace, leaves: &[NodeId], epoch: u64) -> Vec<Vec<MetricVector>> {
    let MeanModel::Generated {
        base_mean,
        base_sd,
        parent_signal_sd,
        leaf_perturbation_sd,
    } = &spec.means
    else {
        unreachable!("generate called on explicit means")
    };
    // Baselines stay put across epochs; only uplifts shift.
    let seed = spec.seed;
    let baseline = actions.baseline_index();
    leaves
        .iter()
        .map(|leaf| {
            let jitter = normal3(node_mixer(seed, 0, "base", leaf), *base_sd);
            let base: [f64; 3] = std::array::from_fn(|k| base_mean[k] + jitter[k]);
            let ancestors = &leaf.ancestry()[..leaf.depth()];
            (0..actions.size())
                .map(|a| {
                    if a == baseline {
                        return MetricVector::from_array(base).expect("finite");
                    }
                    let mut uplift = normal3(
                        node_mixer(seed, epoch, "leaf", leaf).u64(a as u64),
                        *leaf_perturbation_sd,
                    );
                    for node in ancestors {
                        let s = normal3(
                            node_mixer(seed, epoch, "signal", node).u64(a as u64),
                            parent_signal_sd[node.depth()],
                        );
                        for k in 0..3 {
                            uplift[k] += s[k];
                        }
                    }
                    MetricVector::from_array(std::array::from_fn(|k| base[k] + uplift[k])).expect("finite")
                })
                .collect()
        })
        .collect()
}

fn explicit_means(
    explicit: &[ExplicitLeaf],
    actions: &ActionSpace,
    leaf_index: &HashMap<NodeId, usize>,
) -> Result<Vec<Vec<MetricVector>>> {
    let mut table: Vec<Option<Vec<MetricVector>>> = vec![None; leaf_index.len()];
    for entry in explicit {
        let id = NodeId::new(entry.path.iter().cloned());
        let slot = *leaf_index
            .get(&id)
            .ok_or_else(|| HcubError::invalid(format!("explicit means for unknown leaf {id}")))?;
        if entry.means.len() != actions.size() {
            return Err(HcubError::invalid(format!(
                "leaf {id} lists {} arms, expected {}",
                entry.means.len(),
                actions.size()
            )));
        }
        let means = entry
            .means
            .iter()
            .map(|m| MetricVector::from_array(*m).map_err(|e| HcubError::invalid(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        table[slot] = Some(means);
    }
    table
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            m.ok_or_else(|| HcubError::invalid(format!("no explicit means for leaf #{i}")))
        })
        .collect()
}

fn context_weights(spec: &EnvironmentSpec, leaves: &[NodeId]) -> Result<Vec<f64>> {
    let weights = match &spec.contexts {
        ContextDistribution::Uniform => vec![1.0; leaves.len()],
        ContextDistribution::PerLeaf { weights } => {
            if weights.len() != leaves.len() {
                return Err(HcubError::invalid(format!(
                    "{} leaf weights for {} leaves",
                    weights.len(),
                    leaves.len()
                )));
            }
            weights.clone()
        }
        ContextDistribution::PerLevel { weights } => {
            if weights.len() != spec.vocabularies.len()
                || weights.iter().zip(&spec.vocabularies).any(|(w, v)| w.len() != v.len())
            {
                return Err(HcubError::invalid("per-level weights must match the vocabularies"));
            }
            leaves
                .iter()
                .map(|leaf| {
                    leaf.path()
                        .iter()
                        .enumerate()
                        .map(|(level, value)| {
                            let pos = spec.vocabularies[level]
                                .iter()
                                .position(|v| v == value)
                                .expect("leaf built from vocabularies");
                            weights[level][pos]
                        })
                        .product()
                })
                .collect()
        }
        ContextDistribution::PointMass { leaf } => {
            let id = NodeId::new(leaf.iter().cloned());
            if !leaves.contains(&id) {
                return Err(HcubError::invalid(format!("point mass on unknown leaf {id}")));
            }
            leaves.iter().map(|l| if *l == id { 1.0 } else { 0.0 }).collect()
        }
    };
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(HcubError::invalid("context weights must be finite, >= 0 and not all zero"));
    }
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    pub(crate) fn spec(parent: f64, perturb: f64, noise: f64) -> EnvironmentSpec {
        EnvironmentSpec {
            schema: TreeSchema::from_names(&["tour", "round", "cohort"], 2).unwrap(),
            bucket_count: 2,
            vocabularies: vec![
                vec!["T1".into(), "T2".into()],
                vec!["R1".into(), "R2".into(), "R3".into()],
                vec!["C1".into(), "C2".into(), "C3".into(), "C4".into()],
            ],
            means: MeanModel::Generated {
                base_mean: [1.0, 1.0, 1.0],
                base_sd: 0.5,
                parent_signal_sd: vec![parent; 3],
                leaf_perturbation_sd: perturb,
            },
            noise_sd: [noise; 3],
            contexts: ContextDistribution::Uniform,
            shift_round: None,
            seed: 7,
        }
    }

    fn uplift(env: &Environment, leaf: usize, action: usize) -> [f64; 3] {
        let m = env.true_mean(leaf, action, 0).to_array();
        let b = env.true_mean(leaf, env.actions().baseline_index(), 0).to_array();
        std::array::from_fn(|k| m[k] - b[k])
    }

    #[test]
    fn zero_perturbation_siblings_share_uplifts() {
        let env = build_environment(&spec(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(env.leaves().len(), 24);
        for a in 0..9 {
            // leaves 0..4 are the cohorts under T1/R1
            let first = uplift(&env, 0, a);
            for leaf in 1..4 {
                let u = uplift(&env, leaf, a);
                for k in 0..3 {
                    assert!((u[k] - first[k]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn large_perturbation_decorrelates_siblings() {
        let env = build_environment(&spec(0.01, 10.0, 0.0)).unwrap();
        // sibling uplift differences are on the perturbation scale
        let d = (uplift(&env, 0, 0)[2] - uplift(&env, 1, 0)[2]).abs();
        assert!(d > 0.1, "{d}");
    }

    #[test]
    fn same_seed_same_table() {
        let a = build_environment(&spec(1.0, 0.3, 1.0)).unwrap();
        let b = build_environment(&spec(1.0, 0.3, 1.0)).unwrap();
        assert_eq!(a.epochs, b.epochs);
        let mut other = spec(1.0, 0.3, 1.0);
        other.seed = 8;
        assert_ne!(build_environment(&other).unwrap().epochs, a.epochs);
    }

    #[test]
    fn baseline_uplift_is_zero() {
        let env = build_environment(&spec(1.0, 0.3, 1.0)).unwrap();
        for leaf in 0..24 {
            assert_eq!(uplift(&env, leaf, 4), [0.0; 3]);
        }
    }

    #[test]
    fn uniform_contexts_are_balanced() {
        let env = build_environment(&spec(1.0, 0.3, 1.0)).unwrap();
        let mut rng = seeded(11);
        let mut counts = vec![0usize; 24];
        for _ in 0..24_000 {
            counts[env.leaf_of(&env.sample_context(&mut rng)).unwrap()] += 1;
        }
        let sigma = (24_000.0 * (1.0 / 24.0) * (23.0 / 24.0f64)).sqrt();
        for c in counts {
            assert!((c as f64 - 1000.0).abs() < 5.0 * sigma, "{c}");
        }
    }

    #[test]
    fn point_mass_always_same_leaf() {
        let mut s = spec(1.0, 0.3, 1.0);
        s.contexts = ContextDistribution::PointMass {
            leaf: vec!["T2".into(), "R3".into(), "C1".into()],
        };
        let env = build_environment(&s).unwrap();
        let mut rng = seeded(1);
        for _ in 0..100 {
            assert_eq!(env.sample_context(&mut rng).values().collect::<Vec<_>>(), ["T2", "R3", "C1"]);
        }
    }

    #[test]
    fn context_draws_repeat_by_seed() {
        let env = build_environment(&spec(1.0, 0.3, 1.0)).unwrap();
        let draw = |seed| {
            let mut rng = seeded(seed);
            (0..50).map(|_| env.sample_context(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
    }

    #[test]
    fn zero_noise_returns_mean() {
        let env = build_environment(&spec(1.0, 0.3, 0.0)).unwrap();
        let ctx = env.leaf_context(5);
        let a = env.actions().action(7).unwrap();
        let m = env.sample_metrics(&ctx, &a, 0, &mut seeded(0)).unwrap();
        assert_eq!(m, env.true_mean(5, 7, 0));
    }

    #[test]
    fn noise_is_centered() {
        let mut s = spec(0.0, 0.0, 1.0);
        s.means = MeanModel::Generated {
            base_mean: [0.0; 3],
            base_sd: 0.0,
            parent_signal_sd: vec![0.0; 3],
            leaf_perturbation_sd: 0.0,
        };
        let env = build_environment(&s).unwrap();
        let ctx = env.leaf_context(0);
        let a = env.actions().action(0).unwrap();
        let mut rng = seeded(99);
        let n = 100_000;
        let mut sum = [0.0; 3];
        for _ in 0..n {
            let m = env.sample_metrics(&ctx, &a, 0, &mut rng).unwrap().to_array();
            for k in 0..3 {
                sum[k] += m[k];
            }
        }
        for s in sum {
            assert!((s / n as f64).abs() < 5.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn metrics_for_unknown_leaf_fail() {
        let env = build_environment(&spec(1.0, 0.3, 1.0)).unwrap();
        let ctx = env.schema().context(&["T9", "R1", "C1"]).unwrap();
        let a = env.actions().action(0).unwrap();
        assert!(matches!(
            env.sample_metrics(&ctx, &a, 0, &mut seeded(0)),
            Err(HcubError::UnknownContext(_))
        ));
    }

    #[test]
    fn identical_means_oracle_is_lowest_index() {
        let env = build_environment(&spec(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(env.oracle_action(3, &RewardWeights::default(), 0).index(), 0);
    }

    #[test]
    fn shift_redraws_uplifts() {
        let mut s = spec(1.0, 0.3, 1.0);
        s.shift_round = Some(100);
        let env = build_environment(&s).unwrap();
        assert_eq!(env.true_mean(0, 4, 0), env.true_mean(0, 4, 100));
        assert_ne!(env.true_mean(0, 0, 99), env.true_mean(0, 0, 100));
        assert_eq!(env.true_mean(0, 0, 0), env.true_mean(0, 0, 99));
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = spec(1.0, 0.3, 1.0);
        s.vocabularies.pop();
        assert!(build_environment(&s).is_err());
        let mut s = spec(1.0, 0.3, 1.0);
        s.noise_sd[1] = -1.0;
        assert!(build_environment(&s).is_err());
        let mut s = spec(1.0, 0.3, 1.0);
        s.contexts = ContextDistribution::PerLeaf { weights: vec![1.0; 3] };
        assert!(build_environment(&s).is_err());
        let mut s = spec(1.0, 0.3, 1.0);
        s.contexts = ContextDistribution::PerLeaf { weights: vec![0.0; 24] };
        assert!(build_environment(&s).is_err());
    }
}

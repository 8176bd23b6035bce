use serde::{Deserialize, Serialize};

use super::env::{Environment, EnvironmentSpec};
use super::run::{run_simulation, SimulationResult};
use crate::error::{HcubError, Result};
use crate::model::RewardWeights;
use crate::policy::PolicyConfig;
use crate::rng::SeedMixer;
use crate::uplift::EstimatorConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedComparison {
    pub seed: u64,
    pub environment_seed: u64,
    pub regret_treatment: f64,
    pub regret_control: f64,
    /// `(control - treatment) / control`.
    pub relative_improvement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    /// Inheritance flag of the treatment arm of the comparison.
    pub treatment_inheritance: bool,
    pub control_inheritance: bool,
    pub horizon: u64,
    pub per_seed: Vec<SeedComparison>,
    pub mean_relative_improvement: f64,
    pub mean_regret_treatment: f64,
    pub mean_regret_control: f64,
    /// Seeds where the treatment had strictly lower regret.
    pub treatment_wins: usize,
    pub control_wins: usize,
    pub ties: usize,
    /// Two-sided exact sign test over non-tied seeds.
    pub sign_test_p_value: f64,
}

#[derive(Debug, Clone)]
pub struct AblationRun {
    pub seed: u64,
    pub treatment: SimulationResult,
    pub control: SimulationResult,
}

#[derive(Debug, Clone)]
pub struct Ablation {
    pub report: AblationReport,
    pub runs: Vec<AblationRun>,
}

/// Relative regret improvement of `treatment` over `control`. Zero control
/// regret yields 0 when both are zero and -1 otherwise.
pub fn relative_improvement(treatment: f64, control: f64) -> f64 {
    if control > 0.0 {
        (control - treatment) / control
    } else if treatment == 0.0 {
        0.0
    } else {
        -1.0
    }
}

/// Two-sided exact binomial sign test with p = 1/2.
pub fn sign_test_p_value(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let k = wins.min(losses);
    // log-space keeps large n finite
    let ln_choose = |n: usize, i: usize| -> f64 {
        (1..=i).map(|j| ((n - i + j) as f64).ln() - (j as f64).ln()).sum()
    };
    let half_n = n as f64 * std::f64::consts::LN_2;
    let tail: f64 = (0..=k).map(|i| (ln_choose(n, i) - half_n).exp()).sum();
    (2.0 * tail).min(1.0)
}

/// Environment seed used for run seed `seed`.
pub fn environment_seed(spec: &EnvironmentSpec, seed: u64) -> u64 {
    SeedMixer::new(spec.seed).str("environment").u64(seed).finish()
}

/// Inheritance on versus off, on the same environment and random streams per seed.
pub fn ablation_compare(
    spec: &EnvironmentSpec,
    estimator: &EstimatorConfig,
    policy: &PolicyConfig,
    weights: &RewardWeights,
    horizon: u64,
    seeds: &[u64],
) -> Result<Ablation> {
    compare_inheritance(spec, estimator, policy, weights, horizon, seeds, true, false)
}

/// Paired comparison of two inheritance settings with everything else fixed.
#[allow(clippy::too_many_arguments)]
pub fn compare_inheritance(
    spec: &EnvironmentSpec,
    estimator: &EstimatorConfig,
    policy: &PolicyConfig,
    weights: &RewardWeights,
    horizon: u64,
    seeds: &[u64],
    treatment_inheritance: bool,
    control_inheritance: bool,
) -> Result<Ablation> {
    if seeds.len() < 2 {
        return Err(HcubError::invalid("an ablation needs at least two seeds"));
    }
    let mut runs = Vec::with_capacity(seeds.len());
    let mut per_seed = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let env_seed = environment_seed(spec, seed);
        let env = Environment::build(&EnvironmentSpec {
            seed: env_seed,
            ..spec.clone()
        })?;
        let run = |flag: bool| {
            let p = PolicyConfig {
                inheritance_enabled: flag,
                ..*policy
            };
            run_simulation(&env, estimator, &p, weights, horizon, seed)
        };
        let treatment = run(treatment_inheritance)?;
        let control = run(control_inheritance)?;
        let (rt, rc) = (treatment.final_regret(), control.final_regret());
        per_seed.push(SeedComparison {
            seed,
            environment_seed: env_seed,
            regret_treatment: rt,
            regret_control: rc,
            relative_improvement: relative_improvement(rt, rc),
        });
        runs.push(AblationRun {
            seed,
            treatment,
            control,
        });
    }
    let n = per_seed.len() as f64;
    let treatment_wins = per_seed.iter().filter(|s| s.regret_treatment < s.regret_control).count();
    let control_wins = per_seed.iter().filter(|s| s.regret_treatment > s.regret_control).count();
    let report = AblationReport {
        treatment_inheritance,
        control_inheritance,
        horizon,
        mean_relative_improvement: per_seed.iter().map(|s| s.relative_improvement).sum::<f64>() / n,
        mean_regret_treatment: per_seed.iter().map(|s| s.regret_treatment).sum::<f64>() / n,
        mean_regret_control: per_seed.iter().map(|s| s.regret_control).sum::<f64>() / n,
        ties: per_seed.len() - treatment_wins - control_wins,
        sign_test_p_value: sign_test_p_value(treatment_wins, control_wins),
        treatment_wins,
        control_wins,
        per_seed,
    };
    Ok(Ablation { report, runs })
}

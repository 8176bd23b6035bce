//! Synthetic cohort-structured environments, regret simulation and the
//! inheritance ablation.

mod ablation;
mod env;
mod run;

pub use ablation::{
    ablation_compare, compare_inheritance, environment_seed, relative_improvement,
    sign_test_p_value, Ablation, AblationReport, AblationRun, SeedComparison,
};
pub use env::{
    build_environment, ContextDistribution, Environment, EnvironmentSpec, ExplicitLeaf, MeanModel,
};
pub use run::{
    estimator_seed, run_simulation, run_simulation_state, run_simulation_with, DecisionRule, RoundRecord,
    SimulationResult,
};

//! Configuration, observation logs, replay, reports and the command line.

mod cli;
mod config;
mod log;
mod replay;
mod report;

pub use cli::{run_cli, OUTPUT_DIR_ENV};
pub use config::{
    parse_config, parse_config_str, ConfigMode, EnvironmentSection, RunConfig, RunSection,
    SchemaSection, OPTIMISM_MARGIN,
};
pub use log::{
    load_observations, read_observations, write_observations, LoadedLog, LogMode, LogRecord,
    SkippedLine,
};
pub use replay::{replay_estimate, Replay, ReplayRow, ReplaySummary};
pub use report::{
    read_trajectory, render_tree, write_decisions, write_json, write_trajectory, AblationDocument,
    DecisionRow, SimulationSummary, TrajectoryRow, TRAJECTORY_HEADER,
};

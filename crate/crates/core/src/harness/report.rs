use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{HcubError, Result};
use crate::sim::{AblationReport, RoundRecord, SimulationResult};
use crate::tree::ContextTree;
use crate::uplift::EstimateTable;

/// Trajectory CSV columns, in order.
pub const TRAJECTORY_HEADER: [&str; 8] = [
    "t",
    "leaf_path",
    "action_index",
    "realized_reward",
    "expected_reward",
    "oracle_reward",
    "instant_regret",
    "cumulative_regret",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: u64,
    pub leaf_path: String,
    pub action_index: usize,
    pub realized_reward: f64,
    pub expected_reward: f64,
    pub oracle_reward: f64,
    pub instant_regret: f64,
    pub cumulative_regret: f64,
}

impl From<&RoundRecord> for TrajectoryRow {
    fn from(r: &RoundRecord) -> Self {
        Self {
            t: r.t,
            leaf_path: r.leaf_path.clone(),
            action_index: r.action_index,
            realized_reward: r.realized_reward,
            expected_reward: r.expected_reward,
            oracle_reward: r.oracle_reward,
            instant_regret: r.instant_regret,
            cumulative_regret: r.cumulative_regret,
        }
    }
}

fn csv_error(e: csv::Error) -> HcubError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HcubError::Io(io),
        other => HcubError::internal(format!("csv: {other:?}")),
    }
}

pub fn write_trajectory<W: Write>(writer: W, result: &SimulationResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for record in &result.records {
        w.serialize(TrajectoryRow::from(record)).map_err(csv_error)?;
    }
    if result.records.is_empty() {
        w.write_record(TRAJECTORY_HEADER).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRow>> {
    let mut r = csv::Reader::from_path(path.as_ref()).map_err(csv_error)?;
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

/// Per-round decision details that do not belong in the trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub t: u64,
    pub action_index: usize,
    pub score_total: f64,
    pub score_exploitation: f64,
    pub score_exploration: f64,
    pub score_source: String,
}

pub fn write_decisions<W: Write>(writer: W, result: &SimulationResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in &result.records {
        w.serialize(DecisionRow {
            t: r.t,
            action_index: r.action_index,
            score_total: r.score_total,
            score_exploitation: r.score_exploitation,
            score_exploration: r.score_exploration,
            score_source: r.score_source.clone(),
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub seed: u64,
    pub inheritance_enabled: bool,
    pub horizon: u64,
    pub final_cumulative_regret: f64,
    pub mean_instant_regret: f64,
    pub zero_regret_rounds: usize,
    pub leaves_visited: usize,
    pub effective_config: RunConfig,
}

impl SimulationSummary {
    pub fn new(result: &SimulationResult, config: &RunConfig) -> Self {
        let n = result.records.len();
        let mut leaves: Vec<&str> = result.records.iter().map(|r| r.leaf_path.as_str()).collect();
        leaves.sort_unstable();
        leaves.dedup();
        Self {
            seed: result.seed,
            inheritance_enabled: result.inheritance_enabled,
            horizon: n as u64,
            final_cumulative_regret: result.final_regret(),
            mean_instant_regret: if n == 0 { 0.0 } else { result.final_regret() / n as f64 },
            zero_regret_rounds: result.records.iter().filter(|r| r.instant_regret == 0.0).count(),
            leaves_visited: leaves.len(),
            effective_config: config.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationDocument {
    #[serde(flatten)]
    pub report: AblationReport,
    pub effective_config: RunConfig,
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| HcubError::internal(e.to_string()))?;
    std::fs::write(path.as_ref(), text + "\n")?;
    Ok(())
}

/// Indented tree with per-arm sample counts and resolved estimates.
pub fn render_tree(tree: &ContextTree, table: &EstimateTable) -> String {
    let actions = tree.actions();
    let baseline = actions.baseline_index();
    let mut out = String::new();
    for node in tree.iter_top_down() {
        let indent = "  ".repeat(node.depth());
        let counts = tree.counts(node).unwrap_or(&[]);
        let _ = writeln!(
            out,
            "{indent}{node}  n={} baseline={}",
            tree.total_count(node),
            counts.get(baseline).copied().unwrap_or(0)
        );
        let Some(row) = table.row(node) else {
            let _ = writeln!(out, "{indent}  (no estimates)");
            continue;
        };
        for (a, e) in row {
            let arm = actions.action(a).map(|v| v.to_string()).unwrap_or_default();
            let n = counts.get(a).copied().unwrap_or(0);
            if e.is_available() {
                let _ = writeln!(
                    out,
                    "{indent}  #{a:<3} {arm} n={n:<5} {:>9.4} [{:.4}, {:.4}] {}",
                    e.median,
                    e.ci_lower,
                    e.ci_upper,
                    e.source.as_str()
                );
            } else {
                let _ = writeln!(out, "{indent}  #{a:<3} {arm} n={n:<5} unavailable");
            }
        }
    }
    out
}

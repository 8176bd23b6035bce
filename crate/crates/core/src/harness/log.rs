use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HcubError, Result};
use crate::model::{ActionSpace, Context, MetricVector};
use crate::tree::TreeSchema;
use crate::uplift::Observation;

/// One line of an observation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRecord {
    pub round: u64,
    /// Feature value per schema level name.
    pub context: BTreeMap<String, String>,
    /// Mixed-radix arm index.
    pub action: usize,
    /// `[engagement, retention_proxy, revenue]`.
    pub metrics: [f64; 3],
}

impl LogRecord {
    pub fn from_observation(obs: &Observation) -> Self {
        Self {
            round: obs.round,
            context: obs.context.features().iter().cloned().collect(),
            action: obs.action.index(),
            metrics: obs.metrics.to_array(),
        }
    }

    /// Checks the record against a schema and action space.
    pub fn to_observation(&self, schema: &TreeSchema, actions: &ActionSpace) -> Result<Observation> {
        let mut features = Vec::with_capacity(schema.depth());
        for level in schema.levels() {
            let value = self
                .context
                .get(&level.name)
                .ok_or_else(|| HcubError::invalid(format!("context lacks level `{}`", level.name)))?;
            features.push((level.name.clone(), value.clone()));
        }
        if let Some(extra) = self.context.keys().find(|k| !schema.levels().iter().any(|l| &l.name == *k)) {
            return Err(HcubError::invalid(format!("context has unknown level `{extra}`")));
        }
        if self.action >= actions.size() {
            return Err(HcubError::invalid(format!(
                "action index {} out of range (valid 0..={})",
                self.action,
                actions.size() - 1
            )));
        }
        Ok(Observation {
            context: Context::new(features),
            action: actions.action(self.action)?,
            metrics: MetricVector::from_array(self.metrics)?,
            round: self.round,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogMode {
    /// Abort on the first malformed line.
    Strict,
    /// Skip malformed lines and report them.
    Lenient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedLine {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedLog {
    pub observations: Vec<Observation>,
    pub skipped: Vec<SkippedLine>,
}

/// Parses a log from any reader. Blank lines are ignored; rounds must not
/// decrease.
pub fn read_observations<R: BufRead>(
    reader: R,
    schema: &TreeSchema,
    actions: &ActionSpace,
    mode: LogMode,
) -> Result<LoadedLog> {
    let mut out = LoadedLog {
        observations: Vec::new(),
        skipped: Vec::new(),
    };
    let mut last_round = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<LogRecord>(&line)
            .map_err(|e| HcubError::invalid(e.to_string()))
            .and_then(|r| r.to_observation(schema, actions))
            .and_then(|obs| match last_round {
                Some(last) if obs.round < last => Err(HcubError::invalid(format!(
                    "round {} follows round {last}",
                    obs.round
                ))),
                _ => Ok(obs),
            });
        match parsed {
            Ok(obs) => {
                last_round = Some(obs.round);
                out.observations.push(obs);
            }
            Err(e) => {
                let message = match e {
                    HcubError::InvalidArgument(m) => m,
                    other => other.to_string(),
                };
                match mode {
                    LogMode::Strict => return Err(HcubError::Log { line: line_no, message }),
                    LogMode::Lenient => out.skipped.push(SkippedLine { line: line_no, message }),
                }
            }
        }
    }
    Ok(out)
}

pub fn load_observations(
    path: impl AsRef<Path>,
    schema: &TreeSchema,
    actions: &ActionSpace,
    mode: LogMode,
) -> Result<LoadedLog> {
    let file = std::fs::File::open(path.as_ref())?;
    read_observations(BufReader::new(file), schema, actions, mode)
}

/// Writes observations one JSON record per line.
pub fn write_observations<W: Write>(mut writer: W, observations: &[Observation]) -> Result<()> {
    for obs in observations {
        let line = serde_json::to_string(&LogRecord::from_observation(obs))
            .map_err(|e| HcubError::internal(e.to_string()))?;
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

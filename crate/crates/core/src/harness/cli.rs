use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use super::config::{parse_config, ConfigMode, RunConfig};
use super::log::{load_observations, LogMode, SkippedLine};
use super::replay::{replay_estimate, Replay, ReplayRow, ReplaySummary};
use super::report::{
    render_tree, write_decisions, write_json, write_trajectory, AblationDocument, SimulationSummary,
};
use crate::error::{HcubError, Result};
use crate::sim::{ablation_compare, run_simulation_state, SimulationResult};
use crate::uplift::EstimateRecord;

// stdout may be a closed pipe (`hcub ... | head`); that is not an error
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn say_raw(text: &str) {
    use std::io::Write as _;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

/// Optional override for every command's output directory.
pub const OUTPUT_DIR_ENV: &str = "HCUB_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "hcub", version, about = "Hierarchical contextual uplift bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation; writes trajectory.csv, decisions.csv and summary.json.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Run seed; defaults to the first seed of the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Inheritance on versus off over every configured seed.
    Ablate {
        #[command(flatten)]
        common: Common,
    },
    /// Estimate uplifts from an observation log, with and without inheritance.
    Replay {
        #[command(flatten)]
        common: Common,
        /// Log to read instead of the config's run.replay_log.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Skip malformed lines instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Print the context tree with counts and resolved estimates.
    InspectTree {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides policy.inheritance_enabled for the rendered table.
        #[arg(long, value_enum)]
        inheritance: Option<Switch>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Parse and validate a config, then print its effective form.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; beats HCUB_OUTPUT_DIR and run.output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 2 on usage errors, 1 on any other failure. Failures print
/// `error class=<class>: <message>` to stderr.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error class={}: {e}", e.class());
            1
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate { common, seed } => simulate(&common, seed),
        Command::Ablate { common } => ablate(&common),
        Command::Replay { common, log, lenient } => replay(&common, log, lenient),
        Command::InspectTree {
            common,
            log,
            seed,
            inheritance,
            format,
        } => inspect(&common, log, seed, inheritance, format),
        Command::ValidateConfig { config } => {
            let c = parse_config(&config)?;
            let text = toml::to_string(&c).map_err(|e| HcubError::internal(e.to_string()))?;
            let actions = c.actions()?;
            let source = match c.mode() {
                ConfigMode::Environment => "environment",
                ConfigMode::Replay => "replay",
            };
            say!(
                "# valid: {} levels, {} arms (baseline #{}), source {source}",
                c.schema().depth(),
                actions.size(),
                actions.baseline_index()
            );
            say_raw(&text);
            Ok(())
        }
    }
}

/// Loads the config and settles the output directory.
fn prepare(common: &Common) -> Result<(RunConfig, PathBuf)> {
    let mut config = parse_config(&common.config)?;
    let out = common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| config.run.output_dir.clone());
    config.run.output_dir = out.clone();
    Ok((config, out))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn simulate_one(config: &RunConfig, seed: u64) -> Result<(SimulationResult, crate::policy::PolicyState)> {
    let env = config.build_environment()?;
    run_simulation_state(&env, &config.estimator, &config.policy, &config.weights, config.run.horizon, seed)
}

fn simulate(common: &Common, seed: Option<u64>) -> Result<()> {
    let (config, out) = prepare(common)?;
    let seed = seed.unwrap_or(config.run.seeds[0]);
    let (result, _) = simulate_one(&config, seed)?;
    std::fs::create_dir_all(&out)?;
    write_trajectory(create(&out.join("trajectory.csv"))?, &result)?;
    write_decisions(create(&out.join("decisions.csv"))?, &result)?;
    let summary = SimulationSummary::new(&result, &config);
    write_json(out.join("summary.json"), &summary)?;
    say!(
        "seed {seed}: {} rounds, final cumulative regret {:.6}, outputs in {}",
        summary.horizon,
        summary.final_cumulative_regret,
        out.display()
    );
    Ok(())
}

fn ablate(common: &Common) -> Result<()> {
    let (config, out) = prepare(common)?;
    let spec = config
        .environment_spec()
        .ok_or_else(|| HcubError::invalid("ablate needs an [environment] section"))?;
    let ablation = ablation_compare(
        &spec,
        &config.estimator,
        &config.policy,
        &config.weights,
        config.run.horizon,
        &config.run.seeds,
    )?;
    std::fs::create_dir_all(&out)?;
    for run in &ablation.runs {
        write_trajectory(create(&out.join(format!("trajectory_seed{}_on.csv", run.seed)))?, &run.treatment)?;
        write_trajectory(create(&out.join(format!("trajectory_seed{}_off.csv", run.seed)))?, &run.control)?;
    }
    let report = ablation.report;
    say!(
        "{} seeds: mean relative improvement {:+.2}%, on wins {} / off wins {} / ties {}, sign test p = {:.3e}",
        report.per_seed.len(),
        100.0 * report.mean_relative_improvement,
        report.treatment_wins,
        report.control_wins,
        report.ties,
        report.sign_test_p_value
    );
    write_json(
        out.join("ablation_report.json"),
        &AblationDocument {
            report,
            effective_config: config,
        },
    )?;
    Ok(())
}

fn load_replay(config: &RunConfig, log: Option<PathBuf>, mode: LogMode) -> Result<(Replay, Vec<SkippedLine>)> {
    let path = log
        .or_else(|| config.run.replay_log.clone())
        .ok_or_else(|| HcubError::invalid("no log given: pass --log or set run.replay_log"))?;
    let actions = config.actions()?;
    let loaded = load_observations(&path, config.schema(), &actions, mode)?;
    let replay = replay_estimate(&loaded.observations, config.schema(), actions, &config.weights, &config.estimator)?;
    Ok((replay, loaded.skipped))
}

#[derive(Serialize)]
struct SkippedJson {
    line: usize,
    message: String,
}

#[derive(Serialize)]
struct ReplayDocument {
    summary: ReplaySummary,
    skipped_lines: Vec<SkippedJson>,
    rows: Vec<ReplayRow>,
    effective_config: RunConfig,
}

fn replay(common: &Common, log: Option<PathBuf>, lenient: bool) -> Result<()> {
    let (config, out) = prepare(common)?;
    let mode = if lenient { LogMode::Lenient } else { LogMode::Strict };
    let (replay, skipped) = load_replay(&config, log, mode)?;
    let rows = replay.rows();
    let summary = replay.summary();
    std::fs::create_dir_all(&out)?;
    let mut w = csv::Writer::from_writer(create(&out.join("replay_estimates.csv"))?);
    for row in &rows {
        w.serialize(row)
            .map_err(|e| HcubError::internal(format!("csv: {e}")))?;
    }
    w.flush()?;
    say!(
        "{} observations ({} skipped), {} nodes; with inheritance: {} computed, {} inherited, {} unavailable; without: {} computed, {} unavailable",
        summary.observations,
        skipped.len(),
        summary.nodes,
        summary.computed_on,
        summary.inherited_on,
        summary.unavailable_on,
        summary.computed_off,
        summary.unavailable_off
    );
    write_json(
        out.join("replay_report.json"),
        &ReplayDocument {
            summary,
            skipped_lines: skipped
                .into_iter()
                .map(|s| SkippedJson {
                    line: s.line,
                    message: s.message,
                })
                .collect(),
            rows,
            effective_config: config,
        },
    )
}

#[derive(Serialize)]
struct TreeDocument {
    inheritance_enabled: bool,
    nodes: Vec<TreeNodeJson>,
    estimates: Vec<EstimateRecord>,
}

#[derive(Serialize)]
struct TreeNodeJson {
    node_path: String,
    depth: usize,
    total: u64,
    counts: Vec<u64>,
}

fn inspect(
    common: &Common,
    log: Option<PathBuf>,
    seed: Option<u64>,
    inheritance: Option<Switch>,
    format: Format,
) -> Result<()> {
    let (config, out) = prepare(common)?;
    let inheritance = match inheritance {
        Some(Switch::On) => true,
        Some(Switch::Off) => false,
        None => config.policy.inheritance_enabled,
    };
    let (tree, table) = if log.is_some() || config.mode() == ConfigMode::Replay {
        let (replay, _) = load_replay(&config, log, LogMode::Strict)?;
        let table = if inheritance {
            replay.with_inheritance
        } else {
            replay.without_inheritance
        };
        (replay.tree, table)
    } else {
        let mut config = config.clone();
        config.policy.inheritance_enabled = inheritance;
        let (_, mut state) = simulate_one(&config, seed.unwrap_or(config.run.seeds[0]))?;
        let table = state.refresh()?.clone();
        (state.tree().clone(), table)
    };
    let (text, file) = match format {
        Format::Text => (render_tree(&tree, &table), "tree.txt"),
        Format::Json => {
            let doc = TreeDocument {
                inheritance_enabled: inheritance,
                nodes: tree
                    .iter_top_down()
                    .into_iter()
                    .map(|n| TreeNodeJson {
                        node_path: n.to_string(),
                        depth: n.depth(),
                        total: tree.total_count(n),
                        counts: tree.counts(n).map(<[u64]>::to_vec).unwrap_or_default(),
                    })
                    .collect(),
                estimates: table.records(),
            };
            let text = serde_json::to_string_pretty(&doc).map_err(|e| HcubError::internal(e.to_string()))?;
            (text + "\n", "tree.json")
        }
    };
    say_raw(&text);
    if common.out.is_some() || std::env::var_os(OUTPUT_DIR_ENV).is_some() {
        std::fs::create_dir_all(&out)?;
        std::fs::write(out.join(file), &text)?;
    }
    Ok(())
}

//! The `build`, `run` and `verify` commands, as library functions that write
//! their report to any [`Write`].

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Error;
use crate::harness::{
    self, brute_force_game, build_game, build_game_with, median, Game, RunSummary, Scenario,
    SummaryOptions, DEFAULT_PROFILE_LIMIT,
};
use crate::learning::RngStream;
use crate::scenario::load_scenario;
use crate::scoring::{score_report, total_value, wonderful_life_utility, ActionProfile, Value};
use crate::trajectory::{
    enumerate_feasible, verify_action_set, ActionSet, CacheKey, DEFAULT_ENUMERATION_LIMIT,
};

/// Environment variable naming the default output directory of `run`.
pub const OUT_DIR_ENV: &str = "DTE_OUT_DIR";

/// Why a command failed, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(Error),
    #[error("{0}")]
    Limit(Error),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{0}")]
    Other(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Limit(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::EnumerationOverflow { .. } | Error::ProfileLimit { .. } => CliError::Limit(e),
            Error::Io { .. } => CliError::Other(e),
            _ => CliError::Parse(e),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Other(Error::io(path, e))
}

fn report(out: &mut dyn Write, line: std::fmt::Arguments<'_>) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| CliError::Other(Error::io("<stdout>", e)))
}

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    /// Directory to write action set caches into.
    pub cache_dir: Option<PathBuf>,
    pub no_prune: bool,
}

/// Prints `|P_i|` and `|A_i|` for every robot.
pub fn cmd_build(path: &Path, opts: &BuildOptions, out: &mut dyn Write) -> Result<Game, CliError> {
    let scenario = load_scenario(path)?;
    let pruning = scenario.pruning && !opts.no_prune;
    let game = build_game_with(&scenario, pruning, DEFAULT_ENUMERATION_LIMIT)?;
    report(out, format_args!("robot  station  cell     |P_i|  |A_i|"))?;
    for r in 0..game.robot_count() {
        let cell = scenario.station_of(r);
        report(
            out,
            format_args!(
                "{:<6} s_{:<6} {:<8} {:>5}  {:>5}",
                r + 1,
                scenario.robots[r],
                cell.to_string(),
                game.feasible_count(r),
                game.action_set(r).len()
            ),
        )?;
    }
    if let Some(dir) = &opts.cache_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut written = BTreeMap::new();
        for r in 0..game.robot_count() {
            let set = game.action_set(r);
            let key = CacheKey::new(&scenario.environment, set.station(), scenario.cycle_length, pruning);
            let file = dir.join(key.file_name());
            if written.insert(file.clone(), ()).is_none() {
                set.write_cache(&file, &key)?;
                report(out, format_args!("wrote {}", file.display()))?;
            }
        }
    }
    Ok(game)
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub cycles: usize,
    /// Overrides the scenario seed; replicate `i` uses `seed + i`.
    pub seed: Option<u64>,
    pub replicates: usize,
    pub out_dir: PathBuf,
    pub no_prune: bool,
    pub summary: SummaryOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub pruning: bool,
    pub feasible_counts: Vec<usize>,
    pub action_counts: Vec<usize>,
    pub target_value: Value,
    pub optimum: Option<Value>,
    pub replicates: Vec<RunSummary>,
    pub median_steady_state_fraction: Option<f64>,
    pub median_first_sustained_completion: Option<f64>,
    pub mean_final_long_run_average: Option<f64>,
}

/// Runs the replicates, writing `trace-<seed>.csv` for each and a
/// `summary.json` into the output directory.
pub fn cmd_run(path: &Path, opts: &RunOptions, out: &mut dyn Write) -> Result<RunReport, CliError> {
    if opts.cycles == 0 {
        return Err(CliError::Parse(Error::scenario("--cycles", "must be at least 1")));
    }
    let scenario = load_scenario(path)?;
    let pruning = scenario.pruning && !opts.no_prune;
    let game = build_game_with(&scenario, pruning, DEFAULT_ENUMERATION_LIMIT)?;
    let optimum = harness::optimum_if_small(&game, DEFAULT_PROFILE_LIMIT);
    let target = optimum.unwrap_or_else(|| scenario.max_possible_value());
    let base = opts.seed.unwrap_or(scenario.seed);
    let seeds: Vec<u64> = (0..opts.replicates.max(1) as u64).map(|i| base + i).collect();
    let scenario = Scenario { pruning, ..scenario };

    fs::create_dir_all(&opts.out_dir).map_err(io_err(&opts.out_dir))?;
    let summaries = harness::run_replicates(
        &scenario,
        &game,
        opts.cycles,
        &seeds,
        target,
        optimum,
        &opts.summary,
        |i, trace| {
            let file = opts.out_dir.join(format!("trace-{}.csv", seeds[i]));
            let f = fs::File::create(&file).map_err(|e| Error::io(&file, e))?;
            let mut w = BufWriter::new(f);
            trace.write_csv(&mut w).map_err(|e| Error::io(&file, e))?;
            w.flush().map_err(|e| Error::io(&file, e))
        },
    )?;

    let mut steady: Vec<f64> = summaries.iter().map(|s| s.steady_state_fraction).collect();
    let mut onsets: Vec<f64> = summaries
        .iter()
        .filter_map(|s| s.first_sustained_completion.map(|c| c as f64))
        .collect();
    let finals: Vec<f64> = summaries.iter().map(|s| s.final_long_run_average).collect();
    let report_data = RunReport {
        scenario: path.display().to_string(),
        pruning,
        feasible_counts: (0..game.robot_count()).map(|r| game.feasible_count(r)).collect(),
        action_counts: game.action_counts(),
        target_value: target,
        optimum,
        median_steady_state_fraction: median(&mut steady),
        median_first_sustained_completion: median(&mut onsets),
        mean_final_long_run_average: Some(finals.iter().sum::<f64>() / finals.len() as f64),
        replicates: summaries,
    };
    let summary_path = opts.out_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&report_data).expect("summary serializes");
    fs::write(&summary_path, json + "\n").map_err(io_err(&summary_path))?;

    report(out, format_args!("target value {target} (optimum: {})", optimum.map_or("unknown".into(), |o| o.to_string())))?;
    for s in &report_data.replicates {
        report(
            out,
            format_args!(
                "seed {:<6} cycles {:<9} long-run avg {:.4}  steady fraction {:.4}  sustained from {}",
                s.seed,
                s.cycles,
                s.final_long_run_average,
                s.steady_state_fraction,
                s.first_sustained_completion
                    .map_or("never".to_string(), |c| c.to_string())
            ),
        )?;
    }
    report(out, format_args!("wrote {}", summary_path.display()))?;
    Ok(report_data)
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Read pruned action sets from here when a matching cache file exists.
    pub cache_dir: Option<PathBuf>,
    pub trials: usize,
    pub seed: u64,
    pub profile_limit: u128,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            cache_dir: None,
            trials: 1000,
            seed: 0,
            profile_limit: DEFAULT_PROFILE_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckOutcome {
    Pass(String),
    Fail(String),
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub checks: Vec<(String, CheckOutcome)>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        !self.checks.iter().any(|(_, o)| matches!(o, CheckOutcome::Fail(_)))
    }

    pub fn outcome(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|(n, _)| n == name).map(|(_, o)| o)
    }
}

/// Checks the pruned action sets, that pruning keeps the optimum, and that
/// utility changes under unilateral deviations equal changes in total value.
///
/// Returns the report on success and [`CliError::Verification`] if any check
/// fails; the report is printed either way.
pub fn cmd_verify(path: &Path, opts: &VerifyOptions, out: &mut dyn Write) -> Result<VerifyReport, CliError> {
    let scenario = load_scenario(path)?;
    let report_data = verify_scenario(&scenario, opts)?;
    for (name, outcome) in &report_data.checks {
        let line = match outcome {
            CheckOutcome::Pass(m) => format!("PASS  {name}: {m}"),
            CheckOutcome::Fail(m) => format!("FAIL  {name}: {m}"),
            CheckOutcome::Skipped(m) => format!("SKIP  {name}: {m}"),
        };
        report(out, format_args!("{line}"))?;
    }
    if report_data.passed() {
        Ok(report_data)
    } else {
        let failed: Vec<&str> = report_data
            .checks
            .iter()
            .filter(|(_, o)| matches!(o, CheckOutcome::Fail(_)))
            .map(|(n, _)| n.as_str())
            .collect();
        Err(CliError::Verification(failed.join(", ")))
    }
}

pub fn verify_scenario(scenario: &Scenario, opts: &VerifyOptions) -> Result<VerifyReport, CliError> {
    let mut checks = Vec::new();
    let mut stations: Vec<usize> = scenario.robots.clone();
    stations.sort_unstable();
    stations.dedup();

    let full_game = build_game_with(scenario, false, DEFAULT_ENUMERATION_LIMIT)?;
    let computed = build_game_with(scenario, true, DEFAULT_ENUMERATION_LIMIT)?;
    let mut pruned_by_station = BTreeMap::new();
    for &k in &stations {
        let robot = scenario.robots.iter().position(|&s| s == k).expect("station in use");
        let cell = scenario.station_of(robot);
        let key = CacheKey::new(&scenario.environment, cell, scenario.cycle_length, true);
        let cached = match &opts.cache_dir {
            Some(dir) if dir.join(key.file_name()).exists() => Some(ActionSet::read_cache(
                &dir.join(key.file_name()),
                &key,
                &scenario.environment,
            )?),
            _ => None,
        };
        let source = if cached.is_some() { "cached" } else { "computed" };
        let pruned = cached.unwrap_or_else(|| computed.action_set(robot).clone());
        let all = enumerate_feasible(&scenario.environment, cell, scenario.cycle_length, DEFAULT_ENUMERATION_LIMIT)?;
        let outcome = match verify_action_set(&all, &pruned) {
            Ok(()) => CheckOutcome::Pass(format!(
                "{source} set of {} actions covers all {} feasible trajectories",
                pruned.len(),
                all.len()
            )),
            Err(v) => CheckOutcome::Fail(format!("{source} set: {v}")),
        };
        checks.push((format!("action set s_{k}"), outcome));
        pruned_by_station.insert(k, pruned);
    }

    let per_robot: Vec<ActionSet> = scenario
        .robots
        .iter()
        .map(|k| pruned_by_station[k].clone())
        .collect();
    let pruned_game = harness::game_from_action_sets(per_robot, &scenario.tasks)?;

    let optimum_check = "pruning keeps the optimum";
    let size = full_game.joint_size();
    if size > opts.profile_limit {
        checks.push((
            optimum_check.to_string(),
            CheckOutcome::Skipped(format!(
                "full joint space has {size} profiles, above the limit of {}",
                opts.profile_limit
            )),
        ));
    } else {
        let full = brute_force_game(&full_game, opts.profile_limit)?;
        let pruned = brute_force_game(&pruned_game, opts.profile_limit)?;
        let msg = format!("optimum {} over full sets, {} over pruned sets", full.value, pruned.value);
        checks.push((
            optimum_check.to_string(),
            if full.value == pruned.value {
                CheckOutcome::Pass(msg)
            } else {
                CheckOutcome::Fail(msg)
            },
        ));
    }

    let game = if scenario.pruning { &pruned_game } else { &full_game };
    checks.push((
        "utility differences equal value differences".to_string(),
        deviation_check(game, opts.trials, opts.seed),
    ));
    Ok(VerifyReport { checks })
}

/// Draws random profiles and unilateral deviations and compares the change
/// in the deviator's utility with the change in total value, using the
/// reference scoring functions. Also cross-checks the compiled scorer.
pub fn deviation_check(game: &Game, trials: usize, seed: u64) -> CheckOutcome {
    let n = game.robot_count();
    let tasks = game.tasks();
    let mut rng = RngStream::new(seed, 0);
    let mut utilities = vec![Value::ZERO; n];
    for trial in 0..trials {
        let actions: Vec<usize> = (0..n).map(|r| rng.index(game.action_set(r).len())).collect();
        let i = rng.index(n);
        let alt = rng.index(game.action_set(i).len());
        let trajs: Vec<_> = (0..n).map(|r| game.trajectory(r, actions[r])).collect();
        let before = ActionProfile::new(trajs).expect("equal lengths");
        let after = before.with(i, game.trajectory(i, alt));
        let du = wonderful_life_utility(&after, tasks, i).expect("index in range")
            - wonderful_life_utility(&before, tasks, i).expect("index in range");
        let df = total_value(&after, tasks) - total_value(&before, tasks);
        if du != df {
            return CheckOutcome::Fail(format!(
                "trial {trial}: robot {} moving {} -> {alt} changes utility by {du} but value by {df}",
                i + 1,
                actions[i]
            ));
        }
        let reference = score_report(&before, tasks);
        let f = game.compiled().evaluate(&actions, &mut utilities);
        if f != reference.total_value || utilities != reference.per_robot_utility {
            return CheckOutcome::Fail(format!(
                "trial {trial}: compiled scorer disagrees with reference on {actions:?}"
            ));
        }
    }
    CheckOutcome::Pass(format!("{trials} random deviations"))
}

/// Loads a scenario and builds its game, for callers that only need the
/// action sets.
pub fn load_game(path: &Path) -> Result<(Scenario, Game), CliError> {
    let scenario = load_scenario(path)?;
    let game = build_game(&scenario)?;
    Ok((scenario, game))
}

//! Repeated play: build a game from a scenario, run the learners cycle by
//! cycle and summarise what happened.

use std::collections::HashMap;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::environment::{Cell, GridEnvironment};
use crate::learning::{InitialAction, LearnerParams, LearnerState, RngStream};
use crate::scoring::{CompiledGame, Task, Value};
use crate::trajectory::{enumerate_feasible, prune_action_set, ActionSet, Trajectory, DEFAULT_ENUMERATION_LIMIT};

/// Default cap on joint profiles visited by [`brute_force_optimum`].
pub const DEFAULT_PROFILE_LIMIT: u128 = 100_000_000;

/// Everything needed to run one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub environment: GridEnvironment,
    pub cycle_length: usize,
    /// 1-based station number of every robot.
    pub robots: Vec<usize>,
    pub tasks: Vec<Task>,
    pub learner_params: LearnerParams,
    pub initial_action: InitialAction,
    pub pruning: bool,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.cycle_length == 0 || self.cycle_length > crate::trajectory::MAX_CYCLE_LENGTH {
            return Err(Error::CycleLength {
                got: self.cycle_length,
                max: crate::trajectory::MAX_CYCLE_LENGTH,
            });
        }
        if self.robots.is_empty() {
            return Err(Error::scenario("robots", "at least one robot is required"));
        }
        for (i, &k) in self.robots.iter().enumerate() {
            if self.environment.station(k).is_none() {
                return Err(Error::scenario(
                    format!("robots[{i}]"),
                    format!(
                        "station {k} does not exist (the map has {} stations)",
                        self.environment.stations().len()
                    ),
                ));
            }
        }
        for (j, task) in self.tasks.iter().enumerate() {
            task.validate(self.cycle_length, Some(&self.environment))
                .map_err(|message| Error::Task { index: j, message })?;
        }
        Ok(())
    }

    pub fn station_of(&self, robot: usize) -> Cell {
        self.environment
            .station(self.robots[robot])
            .expect("validated scenario")
    }

    /// Sum of all task values, an upper bound on the total value.
    pub fn max_possible_value(&self) -> Value {
        self.tasks.iter().map(|t| t.value).sum()
    }

    pub fn with_seed(&self, seed: u64) -> Scenario {
        Scenario {
            seed,
            ..self.clone()
        }
    }
}

/// Per-station action sets shared between robots, plus the compiled scorer.
#[derive(Debug, Clone)]
pub struct Game {
    /// Distinct action sets, one per station in use.
    sets: Vec<ActionSet>,
    /// Feasible trajectory count per entry of `sets`.
    feasible_counts: Vec<usize>,
    /// Index into `sets` for every robot.
    robot_set: Vec<usize>,
    compiled: CompiledGame,
    tasks: Vec<Task>,
}

impl Game {
    pub fn robot_count(&self) -> usize {
        self.robot_set.len()
    }

    pub fn action_set(&self, robot: usize) -> &ActionSet {
        &self.sets[self.robot_set[robot]]
    }

    /// Number of feasible trajectories for the robot, before any pruning.
    pub fn feasible_count(&self, robot: usize) -> usize {
        self.feasible_counts[self.robot_set[robot]]
    }

    pub fn action_counts(&self) -> Vec<usize> {
        (0..self.robot_count()).map(|r| self.action_set(r).len()).collect()
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn compiled(&self) -> &CompiledGame {
        &self.compiled
    }

    pub fn trajectory(&self, robot: usize, action: usize) -> &Trajectory {
        &self.action_set(robot).actions()[action]
    }

    /// Product of action set sizes.
    pub fn joint_size(&self) -> u128 {
        self.action_counts().iter().map(|&n| n as u128).product()
    }
}

/// Enumerates and (optionally) prunes every robot's action set. Robots that
/// share a station share one computation.
pub fn build_game(scenario: &Scenario) -> Result<Game> {
    build_game_with(scenario, scenario.pruning, DEFAULT_ENUMERATION_LIMIT)
}

pub fn build_game_with(scenario: &Scenario, pruning: bool, limit: usize) -> Result<Game> {
    scenario.validate()?;
    let mut by_station: HashMap<usize, usize> = HashMap::new();
    let mut sets = Vec::new();
    let mut feasible_counts = Vec::new();
    let mut robot_set = Vec::with_capacity(scenario.robots.len());
    for (r, &k) in scenario.robots.iter().enumerate() {
        let idx = match by_station.get(&k) {
            Some(&i) => i,
            None => {
                let all = enumerate_feasible(
                    &scenario.environment,
                    scenario.station_of(r),
                    scenario.cycle_length,
                    limit,
                )?;
                feasible_counts.push(all.len());
                sets.push(if pruning {
                    prune_action_set(&all)?
                } else {
                    ActionSet::from_trajectories(all)?
                });
                by_station.insert(k, sets.len() - 1);
                sets.len() - 1
            }
        };
        robot_set.push(idx);
    }
    game_from_sets(sets, feasible_counts, robot_set, &scenario.tasks)
}

/// Builds a game from explicit per-robot action sets, for example ones read
/// back from a cache.
pub fn game_from_action_sets(action_sets: Vec<ActionSet>, tasks: &[Task]) -> Result<Game> {
    let n = action_sets.len();
    let counts = action_sets.iter().map(ActionSet::len).collect();
    game_from_sets(action_sets, counts, (0..n).collect(), tasks)
}

fn game_from_sets(
    sets: Vec<ActionSet>,
    feasible_counts: Vec<usize>,
    robot_set: Vec<usize>,
    tasks: &[Task],
) -> Result<Game> {
    let per_robot: Vec<&ActionSet> = robot_set.iter().map(|&i| &sets[i]).collect();
    let compiled = CompiledGame::new(&per_robot, tasks)?;
    Ok(Game {
        sets,
        feasible_counts,
        robot_set,
        compiled,
        tasks: tasks.to_vec(),
    })
}

/// Per-cycle records, stored column-wise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunTrace {
    robots: usize,
    totals: Vec<Value>,
    utilities: Vec<Value>,
    actions: Vec<u32>,
    experimenting: Vec<bool>,
    fingerprint: String,
}

/// One row of a [`RunTrace`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleRecord<'a> {
    pub cycle: usize,
    pub total_value: Value,
    pub utilities: &'a [Value],
    pub actions: &'a [u32],
    pub experimenting: &'a [bool],
}

impl RunTrace {
    pub fn new(robots: usize, fingerprint: impl Into<String>) -> Self {
        RunTrace {
            robots,
            totals: Vec::new(),
            utilities: Vec::new(),
            actions: Vec::new(),
            experimenting: Vec::new(),
            fingerprint: fingerprint.into(),
        }
    }

    pub fn with_capacity(robots: usize, cycles: usize, fingerprint: impl Into<String>) -> Self {
        RunTrace {
            robots,
            totals: Vec::with_capacity(cycles),
            utilities: Vec::with_capacity(cycles * robots),
            actions: Vec::with_capacity(cycles * robots),
            experimenting: Vec::with_capacity(cycles * robots),
            fingerprint: fingerprint.into(),
        }
    }

    pub fn push(&mut self, total: Value, utilities: &[Value], actions: &[usize], experimenting: &[bool]) {
        debug_assert_eq!(utilities.len(), self.robots);
        self.totals.push(total);
        self.utilities.extend_from_slice(utilities);
        self.actions.extend(actions.iter().map(|&a| a as u32));
        self.experimenting.extend_from_slice(experimenting);
    }

    pub fn len(&self) -> usize {
        self.totals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    pub fn robot_count(&self) -> usize {
        self.robots
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Total value per cycle.
    pub fn totals(&self) -> &[Value] {
        &self.totals
    }

    pub fn record(&self, cycle: usize) -> CycleRecord<'_> {
        let span = cycle * self.robots..(cycle + 1) * self.robots;
        CycleRecord {
            cycle,
            total_value: self.totals[cycle],
            utilities: &self.utilities[span.clone()],
            actions: &self.actions[span.clone()],
            experimenting: &self.experimenting[span],
        }
    }

    pub fn records(&self) -> impl Iterator<Item = CycleRecord<'_>> {
        (0..self.len()).map(|c| self.record(c))
    }

    /// Writes `cycle,f,utility_1,action_1,experimenting_1,...` with 1-based
    /// robot numbers and 0-based action indices.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut header = String::from("cycle,f");
        for r in 1..=self.robots {
            header.push_str(&format!(",utility_{r},action_{r},experimenting_{r}"));
        }
        writeln!(out, "{header}")?;
        for rec in self.records() {
            write!(out, "{},{}", rec.cycle, rec.total_value)?;
            for r in 0..self.robots {
                write!(
                    out,
                    ",{},{},{}",
                    rec.utilities[r], rec.actions[r], rec.experimenting[r] as u8
                )?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// The running state of one repeated game.
pub struct Simulation<'g> {
    game: &'g Game,
    params: LearnerParams,
    learners: Vec<LearnerState>,
    rngs: Vec<RngStream>,
    actions: Vec<usize>,
    flags: Vec<bool>,
    utilities: Vec<Value>,
    cycle: usize,
}

impl<'g> Simulation<'g> {
    /// Robot `r` draws from stream `r + 1` of `seed`; stream 0 is left for
    /// the harness.
    pub fn new(game: &'g Game, params: LearnerParams, initial: InitialAction, seed: u64) -> Result<Self> {
        let n = game.robot_count();
        let mut rngs: Vec<RngStream> = (0..n).map(|r| RngStream::new(seed, r as u64 + 1)).collect();
        let learners = (0..n)
            .map(|r| LearnerState::new(game.action_set(r).len(), initial, &mut rngs[r]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Simulation {
            game,
            params,
            actions: learners.iter().map(|l| l.current_action).collect(),
            flags: vec![false; n],
            utilities: vec![Value::ZERO; n],
            learners,
            rngs,
            cycle: 0,
        })
    }

    pub fn cycle(&self) -> usize {
        self.cycle
    }

    pub fn learners(&self) -> &[LearnerState] {
        &self.learners
    }

    /// Plays one cycle and lets every robot update. The closure sees the
    /// cycle as played, before the updates.
    pub fn step<F>(&mut self, mut record: F)
    where
        F: FnMut(Value, &[Value], &[usize], &[bool]),
    {
        for (r, l) in self.learners.iter().enumerate() {
            self.actions[r] = l.current_action;
            self.flags[r] = l.experimenting;
        }
        let total = self.game.compiled().evaluate(&self.actions, &mut self.utilities);
        record(total, &self.utilities, &self.actions, &self.flags);
        for (r, l) in self.learners.iter_mut().enumerate() {
            l.observe(self.utilities[r]);
            l.step(&self.params, &mut self.rngs[r], self.game.action_set(r).len());
        }
        self.cycle += 1;
    }
}

/// Identifies the scenario a trace came from.
pub fn fingerprint(scenario: &Scenario) -> String {
    format!(
        "env={} T={} robots={:?} tasks={} eps={} m={} prune={} seed={}",
        crate::trajectory::environment_hash(&scenario.environment),
        scenario.cycle_length,
        scenario.robots,
        scenario.tasks.len(),
        scenario.learner_params.epsilon(),
        scenario.learner_params.m_exponent(),
        scenario.pruning,
        scenario.seed
    )
}

/// Runs `cycles` cycles of the scenario with its own seed.
pub fn run(scenario: &Scenario, cycles: usize) -> Result<RunTrace> {
    let game = build_game(scenario)?;
    run_game(&game, scenario, cycles)
}

/// Like [`run`] but reuses an already built game.
pub fn run_game(game: &Game, scenario: &Scenario, cycles: usize) -> Result<RunTrace> {
    let mut sim = Simulation::new(game, scenario.learner_params, scenario.initial_action, scenario.seed)?;
    let mut trace = RunTrace::with_capacity(game.robot_count(), cycles, fingerprint(scenario));
    for _ in 0..cycles {
        sim.step(|f, u, a, x| trace.push(f, u, a, x));
    }
    Ok(trace)
}

/// Running mean of the total value: element `t` is the average over cycles
/// `0..=t`.
pub fn long_run_average(trace: &RunTrace) -> Vec<f64> {
    let mut sum = Value::ZERO;
    trace
        .totals()
        .iter()
        .enumerate()
        .map(|(t, &f)| {
            sum += f;
            sum.to_f64() / (t + 1) as f64
        })
        .collect()
}

/// Share of cycles `from_cycle..` whose total value equals `value`.
pub fn fraction_at_value(trace: &RunTrace, value: Value, from_cycle: usize) -> f64 {
    let tail = &trace.totals()[from_cycle.min(trace.len())..];
    if tail.is_empty() {
        return 0.0;
    }
    tail.iter().filter(|&&f| f == value).count() as f64 / tail.len() as f64
}

/// Earliest cycle `t` such that at least `threshold` of the cycles in
/// `t..t + window` reach `value`. Only full windows are considered.
pub fn first_sustained_completion(totals: &[Value], value: Value, window: usize, threshold: f64) -> Option<usize> {
    if window == 0 || totals.len() < window {
        return None;
    }
    let needed = (threshold * window as f64).ceil() as usize;
    let mut hits = totals[..window].iter().filter(|&&f| f == value).count();
    for t in 0..=totals.len() - window {
        if t > 0 {
            hits -= (totals[t - 1] == value) as usize;
            hits += (totals[t + window - 1] == value) as usize;
        }
        if hits >= needed {
            return Some(t);
        }
    }
    None
}

/// The best joint action found by exhaustive search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Optimum {
    pub value: Value,
    /// Action index per robot; the lexicographically smallest maximizer.
    pub actions: Vec<usize>,
}

/// Maximizes the total value over the product of the robots' action sets.
///
/// With `use_pruned = false` the full feasible sets are searched even if the
/// scenario prunes.
pub fn brute_force_optimum(scenario: &Scenario, use_pruned: bool, limit: u128) -> Result<Optimum> {
    let game = build_game_with(scenario, use_pruned, DEFAULT_ENUMERATION_LIMIT)?;
    brute_force_game(&game, limit)
}

pub fn brute_force_game(game: &Game, limit: u128) -> Result<Optimum> {
    let counts = game.action_counts();
    let size = game.joint_size();
    if size > limit {
        return Err(Error::ProfileLimit { size, limit });
    }
    let compiled = game.compiled();
    let mut idx = vec![0usize; counts.len()];
    let mut best = Optimum {
        value: compiled.total_value(&idx),
        actions: idx.clone(),
    };
    // Odometer with the last robot varying fastest, so profiles are visited
    // in lexicographic order and ties keep the first one seen.
    'outer: loop {
        let mut r = counts.len();
        loop {
            if r == 0 {
                break 'outer;
            }
            r -= 1;
            idx[r] += 1;
            if idx[r] < counts[r] {
                break;
            }
            idx[r] = 0;
        }
        let v = compiled.total_value(&idx);
        if v > best.value {
            best = Optimum {
                value: v,
                actions: idx.clone(),
            };
        }
    }
    Ok(best)
}

/// Metrics of one run, as written to summary files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub cycles: usize,
    pub final_long_run_average: f64,
    /// The value steady-state metrics are measured against.
    pub target_value: Value,
    pub steady_state_from: usize,
    pub steady_state_fraction: f64,
    pub first_sustained_completion: Option<usize>,
    /// Exhaustive-search optimum, when the joint space was small enough.
    pub optimum: Option<Value>,
}

/// Settings for turning a trace into a [`RunSummary`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryOptions {
    /// Steady-state fraction is measured over the last `steady_window`
    /// cycles (clamped to the run length).
    pub steady_window: usize,
    pub sustain_window: usize,
    pub sustain_threshold: f64,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions {
            steady_window: 100_000,
            sustain_window: 10_000,
            sustain_threshold: 0.95,
        }
    }
}

pub fn summarize(trace: &RunTrace, seed: u64, target: Value, optimum: Option<Value>, opts: &SummaryOptions) -> RunSummary {
    let n = trace.len();
    let from = n.saturating_sub(opts.steady_window.max(1));
    RunSummary {
        seed,
        cycles: n,
        final_long_run_average: long_run_average(trace).last().copied().unwrap_or(0.0),
        target_value: target,
        steady_state_from: from,
        steady_state_fraction: fraction_at_value(trace, target, from),
        first_sustained_completion: first_sustained_completion(
            trace.totals(),
            target,
            opts.sustain_window.min(n).max(1),
            opts.sustain_threshold,
        ),
        optimum,
    }
}

/// Optimum of the built game if the joint space is within `limit`.
pub fn optimum_if_small(game: &Game, limit: u128) -> Option<Value> {
    brute_force_game(game, limit).ok().map(|o| o.value)
}

/// Runs one replicate per seed over a shared game, in parallel, and hands
/// each finished trace to `each` before summarizing it. Results come back in
/// seed order.
pub fn run_replicates<F>(
    scenario: &Scenario,
    game: &Game,
    cycles: usize,
    seeds: &[u64],
    target: Value,
    optimum: Option<Value>,
    opts: &SummaryOptions,
    each: F,
) -> Result<Vec<RunSummary>>
where
    F: Fn(usize, &RunTrace) -> Result<()> + Sync,
{
    seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let s = scenario.with_seed(seed);
            let trace = run_game(game, &s, cycles)?;
            each(i, &trace)?;
            Ok(summarize(&trace, seed, target, optimum, opts))
        })
        .collect()
}

/// Median of a sample; the mean of the two middle values for even sizes.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        (values[m - 1] + values[m]) / 2.0
    })
}

//! Task completion and the wonderful-life utility.
//!
//! A task at cell `l` with window `[arrival, departure]` is completed when at
//! least `required_count` robots stay at `l` during one step `t -> t+1` with
//! `arrival <= t <= departure - 1`. A robot's utility is the value of the
//! completed tasks that would no longer be completed if the robot were
//! removed, which makes the total value a potential for the game: any
//! unilateral change of trajectory moves the deviator's utility and the total
//! value by exactly the same amount.
//!
//! Task values are held as fixed-point [`Value`]s so those differences are
//! exact.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::environment::{Cell, GridEnvironment};
use crate::trajectory::{ActionSet, Trajectory, MAX_CYCLE_LENGTH};

/// A task value or utility in millionths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Value(i64);

impl Value {
    pub const ZERO: Value = Value(0);
    const SCALE: i64 = 1_000_000;

    pub const fn from_micros(micros: i64) -> Self {
        Value(micros)
    }

    pub const fn from_int(units: i64) -> Self {
        Value(units * Self::SCALE)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / Self::SCALE as f64
    }
}

impl FromStr for Value {
    type Err = Error;

    /// Parses a non-negative decimal like `3`, `2.5` or `0.125`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Value(s.to_string());
        let s = s.trim();
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty() || frac.len() > 6 {
            return Err(bad());
        }
        if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let int: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac_micros: i64 = if frac.is_empty() {
            0
        } else {
            format!("{frac:0<6}").parse().map_err(|_| bad())?
        };
        int.checked_mul(Self::SCALE)
            .and_then(|v| v.checked_add(frac_micros))
            .map(Value)
            .ok_or_else(bad)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let (int, frac) = (abs / Self::SCALE as u64, abs % Self::SCALE as u64);
        if frac == 0 {
            write!(f, "{sign}{int}")
        } else {
            let digits = format!("{frac:06}");
            write!(f, "{sign}{int}.{}", digits.trim_end_matches('0'))
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

impl Add for Value {
    type Output = Value;
    fn add(self, rhs: Value) -> Value {
        Value(self.0 + rhs.0)
    }
}

impl AddAssign for Value {
    fn add_assign(&mut self, rhs: Value) {
        self.0 += rhs.0;
    }
}

impl Sub for Value {
    type Output = Value;
    fn sub(self, rhs: Value) -> Value {
        Value(self.0 - rhs.0)
    }
}

impl Sum for Value {
    fn sum<I: Iterator<Item = Value>>(iter: I) -> Value {
        iter.fold(Value::ZERO, Add::add)
    }
}

/// A cooperative task that recurs every cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub required_count: usize,
    pub location: Cell,
    pub arrival: usize,
    pub departure: usize,
    pub value: Value,
}

impl Task {
    /// Checks the task against a cycle length and (optionally) an environment.
    pub fn validate(&self, cycle_length: usize, env: Option<&GridEnvironment>) -> Result<(), String> {
        if self.required_count == 0 {
            return Err("required_count must be at least 1".into());
        }
        if self.value <= Value::ZERO {
            return Err(format!("value must be positive, got {}", self.value));
        }
        if self.arrival >= self.departure {
            return Err(format!(
                "arrival {} must be before departure {}",
                self.arrival, self.departure
            ));
        }
        if self.departure > cycle_length {
            return Err(format!(
                "departure {} is after the end of the cycle (T = {cycle_length})",
                self.departure
            ));
        }
        if let Some(env) = env {
            if !env.is_feasible(self.location) {
                return Err(format!("location {} is not a feasible cell", self.location));
            }
        }
        Ok(())
    }

    /// Admissible start times of a completing stay, `arrival ..= departure - 1`.
    pub fn window(&self) -> std::ops::Range<usize> {
        self.arrival..self.departure
    }
}

/// One trajectory per robot for a single cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionProfile<'a> {
    trajectories: Vec<&'a Trajectory>,
}

impl<'a> ActionProfile<'a> {
    pub fn new(trajectories: Vec<&'a Trajectory>) -> Result<Self> {
        if let Some(first) = trajectories.first() {
            let t = first.len();
            if let Some(i) = trajectories.iter().position(|p| p.len() != t) {
                return Err(Error::Profile(format!(
                    "robot {} has a {}-step trajectory, robot 1 has {t}",
                    i + 1,
                    trajectories[i].len()
                )));
            }
        }
        Ok(ActionProfile { trajectories })
    }

    pub fn trajectories(&self) -> &[&'a Trajectory] {
        &self.trajectories
    }

    pub fn robot_count(&self) -> usize {
        self.trajectories.len()
    }

    /// `None` for an empty profile.
    pub fn cycle_length(&self) -> Option<usize> {
        self.trajectories.first().map(|p| p.len())
    }

    /// The profile with robot `i` removed.
    pub fn without(&self, i: usize) -> ActionProfile<'a> {
        let mut trajectories = self.trajectories.clone();
        trajectories.remove(i);
        ActionProfile { trajectories }
    }

    /// The profile with robot `i` switched to `trajectory`.
    pub fn with(&self, i: usize, trajectory: &'a Trajectory) -> ActionProfile<'a> {
        let mut trajectories = self.trajectories.clone();
        trajectories[i] = trajectory;
        ActionProfile { trajectories }
    }
}

/// Number of robots staying at `location` during `t -> t+1`.
pub fn stay_counter(profile: &ActionProfile<'_>, location: Cell, t: usize) -> Result<usize> {
    match profile.cycle_length() {
        Some(len) if t >= len => Err(Error::Profile(format!(
            "time step {t} is outside 0..{len}"
        ))),
        None => Ok(0),
        Some(_) => Ok(profile
            .trajectories
            .iter()
            .filter(|p| p.stays_at(t, location))
            .count()),
    }
}

fn counter(profile: &ActionProfile<'_>, location: Cell, t: usize) -> usize {
    profile
        .trajectories
        .iter()
        .filter(|p| t < p.len() && p.stays_at(t, location))
        .count()
}

/// Earliest admissible step at which the task has enough robots.
pub fn completion_time(profile: &ActionProfile<'_>, task: &Task) -> Option<usize> {
    task.window()
        .find(|&t| counter(profile, task.location, t) >= task.required_count)
}

/// Indices of the completed tasks.
pub fn completed_tasks(profile: &ActionProfile<'_>, tasks: &[Task]) -> BTreeSet<usize> {
    tasks
        .iter()
        .enumerate()
        .filter(|(_, task)| completion_time(profile, task).is_some())
        .map(|(j, _)| j)
        .collect()
}

/// Sum of the values of completed tasks, accumulated in task order.
pub fn total_value(profile: &ActionProfile<'_>, tasks: &[Task]) -> Value {
    completed_tasks(profile, tasks)
        .into_iter()
        .map(|j| tasks[j].value)
        .sum()
}

/// Value of the tasks that are completed with robot `i` but not without it.
pub fn wonderful_life_utility(profile: &ActionProfile<'_>, tasks: &[Task], i: usize) -> Result<Value> {
    if i >= profile.robot_count() {
        return Err(Error::Profile(format!(
            "robot index {i} out of range for {} robots",
            profile.robot_count()
        )));
    }
    let with = completed_tasks(profile, tasks);
    let without = completed_tasks(&profile.without(i), tasks);
    Ok(with.difference(&without).map(|&j| tasks[j].value).sum())
}

/// Everything the harness records about one cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScoreReport {
    pub completed: BTreeSet<usize>,
    pub total_value: Value,
    pub completion_times: BTreeMap<usize, usize>,
    pub per_robot_utility: Vec<Value>,
}

/// Scores a profile in one pass over the task locations: counters are
/// tabulated once per (task, step), then completion with and without each
/// robot is read off the table.
pub fn score_report(profile: &ActionProfile<'_>, tasks: &[Task]) -> ScoreReport {
    let n = profile.robot_count();
    let mut completed = BTreeSet::new();
    let mut completion_times = BTreeMap::new();
    let mut per_robot_utility = vec![Value::ZERO; n];
    let mut total = Value::ZERO;
    for (j, task) in tasks.iter().enumerate() {
        let stayers: Vec<Vec<bool>> = task
            .window()
            .map(|t| {
                profile
                    .trajectories
                    .iter()
                    .map(|p| t < p.len() && p.stays_at(t, task.location))
                    .collect()
            })
            .collect();
        let counts: Vec<usize> = stayers
            .iter()
            .map(|s| s.iter().filter(|b| **b).count())
            .collect();
        let Some(first) = counts.iter().position(|&c| c >= task.required_count) else {
            continue;
        };
        completed.insert(j);
        completion_times.insert(j, task.arrival + first);
        total += task.value;
        for (i, u) in per_robot_utility.iter_mut().enumerate() {
            let still = counts
                .iter()
                .zip(&stayers)
                .any(|(&c, s)| c - s[i] as usize >= task.required_count);
            if !still {
                *u += task.value;
            }
        }
    }
    ScoreReport {
        completed,
        total_value: total,
        completion_times,
        per_robot_utility,
    }
}

/// Tasks compiled against fixed action sets, for scoring many profiles of
/// the same game quickly.
///
/// For every (robot, action, task) the steps at which the action stays at the
/// task's location inside its window are packed into a `u64`.
#[derive(Debug, Clone)]
pub struct CompiledGame {
    tasks: Vec<CompiledTask>,
    /// `masks[robot][action * task_count + task]`
    masks: Vec<Vec<u64>>,
}

#[derive(Debug, Clone)]
struct CompiledTask {
    required: u32,
    value: Value,
}

impl CompiledGame {
    pub fn new(action_sets: &[&ActionSet], tasks: &[Task]) -> Result<Self> {
        let k = tasks.len();
        let mut masks = Vec::with_capacity(action_sets.len());
        for set in action_sets {
            if set.cycle_length() > MAX_CYCLE_LENGTH {
                return Err(Error::CycleLength {
                    got: set.cycle_length(),
                    max: MAX_CYCLE_LENGTH,
                });
            }
            let mut m = Vec::with_capacity(set.len() * k);
            for action in set.actions() {
                for task in tasks {
                    let mut bits = 0u64;
                    for t in task.window().filter(|&t| t < action.len()) {
                        if action.stays_at(t, task.location) {
                            bits |= 1 << t;
                        }
                    }
                    m.push(bits);
                }
            }
            masks.push(m);
        }
        Ok(CompiledGame {
            tasks: tasks
                .iter()
                .map(|t| CompiledTask {
                    required: t.required_count as u32,
                    value: t.value,
                })
                .collect(),
            masks,
        })
    }

    pub fn robot_count(&self) -> usize {
        self.masks.len()
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    /// Total value of a joint action given as action indices.
    pub fn total_value(&self, actions: &[usize]) -> Value {
        let k = self.tasks.len();
        let mut total = Value::ZERO;
        let mut counts = [0u32; MAX_CYCLE_LENGTH];
        for (j, task) in self.tasks.iter().enumerate() {
            counts.fill(0);
            let mut any = 0u64;
            for (r, &a) in actions.iter().enumerate() {
                let bits = self.masks[r][a * k + j];
                any |= bits;
                add_bits(&mut counts, bits);
            }
            if mask_reaches(&counts, any, task.required) {
                total += task.value;
            }
        }
        total
    }

    /// Total value and every robot's utility, written into `utilities`.
    pub fn evaluate(&self, actions: &[usize], utilities: &mut [Value]) -> Value {
        let k = self.tasks.len();
        utilities.fill(Value::ZERO);
        let mut total = Value::ZERO;
        let mut counts = [0u32; MAX_CYCLE_LENGTH];
        for (j, task) in self.tasks.iter().enumerate() {
            counts.fill(0);
            let mut any = 0u64;
            for (r, &a) in actions.iter().enumerate() {
                let bits = self.masks[r][a * k + j];
                any |= bits;
                add_bits(&mut counts, bits);
            }
            // Steps with enough robots, and steps with exactly the minimum.
            let mut full = 0u64;
            let mut tight = 0u64;
            let mut rest = any;
            while rest != 0 {
                let t = rest.trailing_zeros();
                rest &= rest - 1;
                let c = counts[t as usize];
                if c >= task.required {
                    full |= 1 << t;
                    if c == task.required {
                        tight |= 1 << t;
                    }
                }
            }
            if full == 0 {
                continue;
            }
            total += task.value;
            let slack = full & !tight;
            for (r, &a) in actions.iter().enumerate() {
                let bits = self.masks[r][a * k + j];
                // Removing robot r only lowers counts where it stays; a step
                // stays full unless it was tight and r was one of its stayers.
                if slack == 0 && tight & !bits == 0 {
                    utilities[r] += task.value;
                }
            }
        }
        total
    }
}

#[inline]
fn add_bits(counts: &mut [u32; MAX_CYCLE_LENGTH], mut bits: u64) {
    while bits != 0 {
        counts[bits.trailing_zeros() as usize] += 1;
        bits &= bits - 1;
    }
}

#[inline]
fn mask_reaches(counts: &[u32; MAX_CYCLE_LENGTH], mut any: u64, required: u32) -> bool {
    while any != 0 {
        if counts[any.trailing_zeros() as usize] >= required {
            return true;
        }
        any &= any - 1;
    }
    false
}

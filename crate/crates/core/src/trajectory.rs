//! Cyclic trajectories and the pruned action sets built from them.
//!
//! A robot's feasible trajectories are every closed walk of `T` steps that
//! starts and ends at its station. Only *stays* (two consecutive time steps
//! spent in the same cell) can ever contribute to a task, so a trajectory is
//! summarised for pruning purposes by its [`StaySignature`]. The pruned
//! [`ActionSet`] keeps one trajectory for every signature that no other
//! trajectory strictly extends.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::environment::{Cell, GridEnvironment};

/// Default cap on the number of trajectories a single enumeration may produce.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 10_000_000;

/// Longest supported cycle. Stay sets are packed into 64-bit masks.
pub const MAX_CYCLE_LENGTH: usize = 64;

/// Cells `p^0 ..= p^T` visited by one robot during a cycle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trajectory {
    cells: Vec<Cell>,
}

impl Trajectory {
    /// Builds a trajectory, checking the closed-walk and motion constraints
    /// against `env`.
    pub fn new(env: &GridEnvironment, cells: Vec<Cell>) -> Result<Self> {
        let traj = Trajectory::from_cells_unchecked(cells);
        traj.validate(env)?;
        Ok(traj)
    }

    pub(crate) fn from_cells_unchecked(cells: Vec<Cell>) -> Self {
        Trajectory { cells }
    }

    pub fn validate(&self, env: &GridEnvironment) -> Result<()> {
        let bad = |m: String| Error::Profile(format!("trajectory {self}: {m}"));
        if self.cells.len() < 2 {
            return Err(bad("needs at least two cells".into()));
        }
        if self.cells.first() != self.cells.last() {
            return Err(bad("does not return to its start".into()));
        }
        if let Some(c) = self.cells.iter().find(|c| !env.is_feasible(**c)) {
            return Err(bad(format!("visits infeasible cell {c}")));
        }
        if let Some(w) = self.cells.windows(2).find(|w| w[0].chebyshev(w[1]) > 1) {
            return Err(bad(format!("jumps from {} to {}", w[0], w[1])));
        }
        Ok(())
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Cycle length `T`.
    pub fn len(&self) -> usize {
        self.cells.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn station(&self) -> Cell {
        self.cells[0]
    }

    /// True when the robot spends the step `t -> t+1` in `cell`.
    #[inline]
    pub fn stays_at(&self, t: usize, cell: Cell) -> bool {
        self.cells[t] == cell && self.cells[t + 1] == cell
    }

    pub fn stay_signature(&self) -> StaySignature {
        StaySignature {
            slots: self
                .cells
                .windows(2)
                .map(|w| (w[0] == w[1]).then_some(w[0]))
                .collect(),
        }
    }
}

impl fmt::Display for Trajectory {
    /// Space separated `(x,y)` cells, the cache file line format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.cells.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Trajectory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let cells = s
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<Vec<Cell>, _>>()?;
        if cells.len() < 2 {
            return Err(format!("trajectory needs at least two cells: {s:?}"));
        }
        Ok(Trajectory::from_cells_unchecked(cells))
    }
}

/// The `(t, cell)` pairs at which a trajectory stays put. Slot `t` holds the
/// cell occupied during `t -> t+1`, or `None` when the robot moved.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StaySignature {
    slots: Vec<Option<Cell>>,
}

impl StaySignature {
    pub fn stays(&self) -> impl Iterator<Item = (usize, Cell)> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(t, c)| c.map(|c| (t, c)))
    }

    pub fn len(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.iter().all(Option::is_none)
    }

    /// Every stay of `self` is also a stay of `other`.
    pub fn is_subset(&self, other: &StaySignature) -> bool {
        self.slots.len() == other.slots.len()
            && self
                .slots
                .iter()
                .zip(&other.slots)
                .all(|(a, b)| a.is_none() || a == b)
    }

    pub fn is_strict_subset(&self, other: &StaySignature) -> bool {
        self.is_subset(other) && self.len() < other.len()
    }
}

/// Every trajectory of `cycle_length` steps that starts and ends at `station`,
/// in lexicographic order of the cell sequence.
///
/// Partial walks are only extended into cells from which the station is
/// still reachable in the remaining steps.
pub fn enumerate_feasible(
    env: &GridEnvironment,
    station: Cell,
    cycle_length: usize,
    limit: usize,
) -> Result<Vec<Trajectory>> {
    if !env.stations().contains(&station) {
        return Err(Error::NotAStation(station));
    }
    if cycle_length == 0 || cycle_length > MAX_CYCLE_LENGTH {
        return Err(Error::CycleLength {
            got: cycle_length,
            max: MAX_CYCLE_LENGTH,
        });
    }
    let home = env.distances_to(station)?;
    let mut out = Vec::new();
    let mut path = Vec::with_capacity(cycle_length + 1);
    path.push(station);

    fn walk(
        env: &GridEnvironment,
        home: &crate::environment::DistanceMap,
        cycle_length: usize,
        limit: usize,
        path: &mut Vec<Cell>,
        out: &mut Vec<Trajectory>,
    ) -> Result<()> {
        let step = path.len() - 1;
        if step == cycle_length {
            if out.len() == limit {
                return Err(Error::EnumerationOverflow { limit });
            }
            out.push(Trajectory::from_cells_unchecked(path.clone()));
            return Ok(());
        }
        let remaining = (cycle_length - step - 1) as u32;
        let here = path[step];
        for next in env.neighbors_unchecked(here) {
            if home.get(next).is_some_and(|d| d <= remaining) {
                path.push(next);
                walk(env, home, cycle_length, limit, path, out)?;
                path.pop();
            }
        }
        Ok(())
    }

    walk(env, &home, cycle_length, limit, &mut path, &mut out)?;
    Ok(out)
}

/// A robot's action set: trajectories sharing one station and cycle length,
/// kept in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSet {
    actions: Vec<Trajectory>,
}

impl ActionSet {
    /// Wraps an explicit list (for example all feasible trajectories when
    /// pruning is off). The list is sorted and deduplicated.
    pub fn from_trajectories(mut actions: Vec<Trajectory>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::EmptyTrajectorySet);
        }
        actions.sort();
        actions.dedup();
        let (station, len) = (actions[0].station(), actions[0].len());
        if let Some(odd) = actions
            .iter()
            .find(|a| a.station() != station || a.len() != len)
        {
            return Err(Error::Profile(format!(
                "action set mixes trajectories: {odd} vs station {station}, T={len}"
            )));
        }
        Ok(ActionSet { actions })
    }

    pub fn actions(&self) -> &[Trajectory] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Trajectory> {
        self.actions.get(index)
    }

    pub fn station(&self) -> Cell {
        self.actions[0].station()
    }

    pub fn cycle_length(&self) -> usize {
        self.actions[0].len()
    }

    /// Writes the cache format: a `#` header followed by one trajectory per
    /// line.
    pub fn write_cache(&self, path: &Path, key: &CacheKey) -> Result<()> {
        let mut text = format!("# {key}\n");
        for a in &self.actions {
            text.push_str(&a.to_string());
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Reads a cache file written by [`ActionSet::write_cache`]. The file is
    /// rejected if its header does not match `key`; the trajectories
    /// themselves are checked against `env` but not re-pruned.
    pub fn read_cache(path: &Path, key: &CacheKey, env: &GridEnvironment) -> Result<Self> {
        let bad = |message: String| Error::Cache {
            path: path.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header.trim_start_matches('#').trim() != key.to_string() {
            return Err(bad(format!("header {header:?} does not match `{key}`")));
        }
        let mut actions = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let traj: Trajectory = line.parse().map_err(|e| bad(format!("line {}: {e}", i + 2)))?;
            traj.validate(env)
                .map_err(|e| bad(format!("line {}: {e}", i + 2)))?;
            if traj.station() != key.station || traj.len() != key.cycle_length {
                return Err(bad(format!("line {}: wrong station or length", i + 2)));
            }
            actions.push(traj);
        }
        ActionSet::from_trajectories(actions).map_err(|e| bad(e.to_string()))
    }
}

/// Identifies which action set a cache file holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheKey {
    pub environment_hash: String,
    pub station: Cell,
    pub cycle_length: usize,
    pub pruned: bool,
}

impl CacheKey {
    pub fn new(env: &GridEnvironment, station: Cell, cycle_length: usize, pruned: bool) -> Self {
        CacheKey {
            environment_hash: environment_hash(env),
            station,
            cycle_length,
            pruned,
        }
    }

    pub fn file_name(&self) -> String {
        format!(
            "actions-{}-{}_{}-T{}{}.txt",
            self.environment_hash,
            self.station.x,
            self.station.y,
            self.cycle_length,
            if self.pruned { "" } else { "-full" }
        )
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "env {} station {} T {} {}",
            self.environment_hash,
            self.station,
            self.cycle_length,
            if self.pruned { "pruned" } else { "full" }
        )
    }
}

/// First 16 hex digits of the SHA-256 of the serialized map.
pub fn environment_hash(env: &GridEnvironment) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(env.to_string().as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Keeps one trajectory per maximal stay signature.
///
/// Signatures are first deduplicated through a hash map (keeping the
/// lexicographically smallest trajectory of each), empty signatures are
/// dropped, and then every signature strictly contained in another is
/// discarded.
pub fn prune_action_set(all: &[Trajectory]) -> Result<ActionSet> {
    if all.is_empty() {
        return Err(Error::EmptyTrajectorySet);
    }
    let mut best: HashMap<StaySignature, &Trajectory> = HashMap::new();
    for traj in all {
        let sig = traj.stay_signature();
        if sig.is_empty() {
            continue;
        }
        best.entry(sig)
            .and_modify(|t| {
                if traj < *t {
                    *t = traj;
                }
            })
            .or_insert(traj);
    }
    // Sorting by descending stay count means a signature can only be
    // strictly contained in one that appears before it.
    let mut sigs: Vec<(StaySignature, &Trajectory)> = best.into_iter().collect();
    sigs.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.1.cmp(b.1)));
    let mut kept: Vec<usize> = Vec::new();
    for (i, (sig, _)) in sigs.iter().enumerate() {
        let dominated = sigs[..i]
            .iter()
            .any(|(other, _)| sig.is_strict_subset(other));
        if !dominated {
            kept.push(i);
        }
    }
    ActionSet::from_trajectories(kept.into_iter().map(|i| sigs[i].1.clone()).collect())
}

/// Which pruning constraint a candidate action set breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionSetViolation {
    /// A kept trajectory never stays anywhere.
    NoStay(Trajectory),
    /// A kept trajectory is not one of the feasible trajectories.
    Foreign(Trajectory),
    /// No kept trajectory covers every stay of this excluded one.
    Uncovered(Trajectory),
    /// The set is not as small as the number of maximal stay patterns.
    NotMinimal { expected: usize, actual: usize },
}

impl fmt::Display for ActionSetViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionSetViolation::NoStay(t) => write!(f, "kept trajectory has no stay: {t}"),
            ActionSetViolation::Foreign(t) => write!(f, "kept trajectory is not feasible: {t}"),
            ActionSetViolation::Uncovered(t) => {
                write!(f, "excluded trajectory is not covered by any kept one: {t}")
            }
            ActionSetViolation::NotMinimal { expected, actual } => write!(
                f,
                "{actual} actions kept but there are {expected} maximal stay patterns"
            ),
        }
    }
}

/// Checks a pruned set against the full feasible set by evaluating the
/// constraints directly: every kept trajectory stays somewhere, every
/// excluded trajectory has its stays covered by a kept one, and the size
/// equals the number of maximal stay sets.
///
/// Deliberately does not use [`StaySignature`] or [`prune_action_set`] so it
/// can serve as an independent check.
pub fn verify_action_set(all: &[Trajectory], pruned: &ActionSet) -> Result<(), ActionSetViolation> {
    fn stays(t: &Trajectory) -> BTreeSet<(usize, Cell)> {
        let c = t.cells();
        (0..c.len() - 1)
            .filter(|&i| c[i] == c[i + 1])
            .map(|i| (i, c[i]))
            .collect()
    }

    let kept: BTreeSet<&Trajectory> = pruned.actions().iter().collect();
    let universe: BTreeSet<&Trajectory> = all.iter().collect();
    for p in pruned.actions() {
        if !universe.contains(p) {
            return Err(ActionSetViolation::Foreign(p.clone()));
        }
        if stays(p).is_empty() {
            return Err(ActionSetViolation::NoStay(p.clone()));
        }
    }
    for q in all.iter().filter(|q| !kept.contains(q)) {
        let q_stays = stays(q);
        let covered = pruned.actions().iter().any(|p| {
            let c = p.cells();
            q_stays.iter().all(|&(t, cell)| c[t] == cell && c[t + 1] == cell)
        });
        if !covered {
            return Err(ActionSetViolation::Uncovered(q.clone()));
        }
    }
    let distinct: BTreeSet<BTreeSet<(usize, Cell)>> = all
        .iter()
        .map(stays)
        .filter(|s| !s.is_empty())
        .collect();
    let maximal = distinct
        .iter()
        .filter(|a| !distinct.iter().any(|b| a.len() < b.len() && a.is_subset(b)))
        .count();
    if maximal != pruned.len() {
        return Err(ActionSetViolation::NotMinimal {
            expected: maximal,
            actual: pruned.len(),
        });
    }
    Ok(())
}

//! The discretized world robots move in.
//!
//! Coordinates are 1-based: `(1, 1)` is the bottom-left cell, `x` grows to
//! the right and `y` grows upwards. Map files are written top row first so a
//! file reads like a picture of the grid.
//!
//! ```text
//! #.      row y = 2
//! .1      row y = 1
//! ```
//!
//! `.` is a free cell, `#` an obstacle and a digit `k` marks station `s_k`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    /// Chebyshev distance, the number of steps between two cells on an open
    /// grid with 8-connected moves.
    pub fn chebyshev(self, other: Cell) -> u32 {
        (self.x - other.x)
            .unsigned_abs()
            .max((self.y - other.y).unsigned_abs())
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

impl From<(i32, i32)> for Cell {
    fn from((x, y): (i32, i32)) -> Self {
        Cell { x, y }
    }
}

impl FromStr for Cell {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let inner = s
            .trim()
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(|| format!("expected `(x,y)`, got {s:?}"))?;
        let (x, y) = inner
            .split_once(',')
            .ok_or_else(|| format!("expected `(x,y)`, got {s:?}"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<i32>()
                .map_err(|e| format!("bad coordinate {v:?} in {s:?}: {e}"))
        };
        Ok(Cell::new(parse(x)?, parse(y)?))
    }
}

/// A rectangular grid with obstacles and an ordered list of stations.
///
/// Immutable once constructed, so it can be shared freely between runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridEnvironment {
    width: i32,
    height: i32,
    obstacles: BTreeSet<Cell>,
    stations: Vec<Cell>,
}

impl GridEnvironment {
    pub fn new(
        width: i32,
        height: i32,
        obstacles: impl IntoIterator<Item = Cell>,
        stations: Vec<Cell>,
    ) -> Result<Self> {
        let invalid = |message: String| Error::Map { line: 0, message };
        if width < 1 || height < 1 {
            return Err(invalid(format!("empty grid {width}x{height}")));
        }
        let obstacles: BTreeSet<Cell> = obstacles.into_iter().collect();
        let in_bounds = |c: &Cell| (1..=width).contains(&c.x) && (1..=height).contains(&c.y);
        if let Some(c) = obstacles.iter().find(|c| !in_bounds(c)) {
            return Err(invalid(format!("obstacle {c} outside the grid")));
        }
        if stations.is_empty() {
            return Err(invalid("no stations".into()));
        }
        for (k, s) in stations.iter().enumerate() {
            if !in_bounds(s) || obstacles.contains(s) {
                return Err(invalid(format!("station s_{} at {s} is not feasible", k + 1)));
            }
            if stations[..k].contains(s) {
                return Err(invalid(format!("station s_{} duplicates cell {s}", k + 1)));
            }
        }
        Ok(GridEnvironment {
            width,
            height,
            obstacles,
            stations,
        })
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn obstacles(&self) -> &BTreeSet<Cell> {
        &self.obstacles
    }

    /// Stations in order, `stations()[0]` is `s_1`.
    pub fn stations(&self) -> &[Cell] {
        &self.stations
    }

    /// The station with 1-based number `k`.
    pub fn station(&self, k: usize) -> Option<Cell> {
        k.checked_sub(1).and_then(|i| self.stations.get(i)).copied()
    }

    pub fn is_feasible(&self, c: Cell) -> bool {
        (1..=self.width).contains(&c.x)
            && (1..=self.height).contains(&c.y)
            && !self.obstacles.contains(&c)
    }

    /// Cells reachable in one time step from `c`, `c` itself included, in
    /// lexicographic order.
    pub fn neighborhood(&self, c: Cell) -> Result<Vec<Cell>> {
        if !self.is_feasible(c) {
            return Err(Error::InfeasibleCell(c));
        }
        Ok(self.neighbors_unchecked(c).collect())
    }

    pub(crate) fn neighbors_unchecked(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        (-1..=1).flat_map(move |dx| {
            (-1..=1).filter_map(move |dy| {
                let n = Cell::new(c.x + dx, c.y + dy);
                self.is_feasible(n).then_some(n)
            })
        })
    }

    pub fn feasible_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (1..=self.width)
            .flat_map(move |x| (1..=self.height).map(move |y| Cell::new(x, y)))
            .filter(|c| !self.obstacles.contains(c))
    }

    /// Shortest step counts from every feasible cell to `target` under the
    /// 8-connected motion model, routing around obstacles.
    pub fn distances_to(&self, target: Cell) -> Result<DistanceMap> {
        if !self.is_feasible(target) {
            return Err(Error::InfeasibleCell(target));
        }
        let mut dist = DistanceMap {
            width: self.width,
            steps: vec![None; (self.width * self.height) as usize],
        };
        let mut queue = VecDeque::from([target]);
        dist.set(target, 0);
        while let Some(c) = queue.pop_front() {
            let d = dist.get(c).unwrap_or(0);
            for n in self.neighbors_unchecked(c) {
                if dist.get(n).is_none() {
                    dist.set(n, d + 1);
                    queue.push_back(n);
                }
            }
        }
        Ok(dist)
    }
}

/// Result of [`GridEnvironment::distances_to`].
#[derive(Debug, Clone)]
pub struct DistanceMap {
    width: i32,
    steps: Vec<Option<u32>>,
}

impl DistanceMap {
    fn index(&self, c: Cell) -> usize {
        ((c.y - 1) * self.width + (c.x - 1)) as usize
    }

    fn set(&mut self, c: Cell, d: u32) {
        let i = self.index(c);
        self.steps[i] = Some(d);
    }

    /// `None` for unreachable or infeasible cells.
    pub fn get(&self, c: Cell) -> Option<u32> {
        if c.x < 1 || c.y < 1 || c.x > self.width {
            return None;
        }
        self.steps.get(self.index(c)).copied().flatten()
    }
}

impl FromStr for GridEnvironment {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.trim().is_empty())
            .collect();
        if lines.is_empty() {
            return Err(Error::Map {
                line: 1,
                message: "empty map".into(),
            });
        }
        let width = lines[0].chars().count();
        let height = lines.len();
        let mut obstacles = BTreeSet::new();
        let mut by_digit: [Option<(Cell, usize)>; 9] = [None; 9];
        for (row, line) in lines.iter().enumerate() {
            let lineno = row + 1;
            let len = line.chars().count();
            if len != width {
                return Err(Error::Map {
                    line: lineno,
                    message: format!("ragged line: {len} characters, expected {width}"),
                });
            }
            let y = (height - row) as i32;
            for (col, ch) in line.chars().enumerate() {
                let cell = Cell::new(col as i32 + 1, y);
                match ch {
                    '.' => {}
                    '#' => {
                        obstacles.insert(cell);
                    }
                    '1'..='9' => {
                        let k = ch as usize - '1' as usize;
                        if let Some((_, first)) = by_digit[k] {
                            return Err(Error::Map {
                                line: lineno,
                                message: format!(
                                    "duplicate station digit '{ch}' (first seen on line {first})"
                                ),
                            });
                        }
                        by_digit[k] = Some((cell, lineno));
                    }
                    other => {
                        return Err(Error::Map {
                            line: lineno,
                            message: format!("unexpected character {other:?} in column {}", col + 1),
                        })
                    }
                }
            }
        }
        let count = by_digit.iter().rposition(Option::is_some).map_or(0, |i| i + 1);
        if count == 0 {
            return Err(Error::Map {
                line: 1,
                message: "no stations: mark at least one cell with '1'".into(),
            });
        }
        let mut stations = Vec::with_capacity(count);
        for (k, slot) in by_digit[..count].iter().enumerate() {
            match slot {
                Some((cell, _)) => stations.push(*cell),
                None => {
                    return Err(Error::Map {
                        line: 1,
                        message: format!(
                            "station digit '{}' is missing but '{}' is present",
                            k + 1,
                            count
                        ),
                    })
                }
            }
        }
        GridEnvironment::new(width as i32, height as i32, obstacles, stations)
    }
}

impl fmt::Display for GridEnvironment {
    /// Writes the map format accepted by [`FromStr`], one line per row.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for y in (1..=self.height).rev() {
            for x in 1..=self.width {
                let c = Cell::new(x, y);
                let ch = if let Some(k) = self.stations.iter().position(|s| *s == c) {
                    char::from_digit(k as u32 + 1, 10).unwrap_or('?')
                } else if self.obstacles.contains(&c) {
                    '#'
                } else {
                    '.'
                };
                write!(f, "{ch}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

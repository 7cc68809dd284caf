//! Random small instances shared by the integration tests.
#![allow(dead_code)]

use dte::harness::Scenario;
use dte::learning::{InitialAction, LearnerParams};
use dte::{Cell, GridEnvironment, Task, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_side: i32,
    pub max_cycle: usize,
    pub max_robots: usize,
    pub max_tasks: usize,
}

impl Limits {
    pub const SMALL: Limits = Limits {
        max_side: 5,
        max_cycle: 4,
        max_robots: 2,
        max_tasks: 3,
    };
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A grid of at most `max_side` x `max_side` with up to two stations and
/// roughly a fifth of the other cells blocked.
pub fn random_environment(rng: &mut impl Rng, max_side: i32) -> GridEnvironment {
    let w = rng.gen_range(2..=max_side);
    let h = rng.gen_range(2..=max_side);
    let cells: Vec<Cell> = (1..=w).flat_map(|x| (1..=h).map(move |y| Cell::new(x, y))).collect();
    let n_stations = rng.gen_range(1..=2);
    let mut stations = Vec::new();
    while stations.len() < n_stations {
        let c = cells[rng.gen_range(0..cells.len())];
        if !stations.contains(&c) {
            stations.push(c);
        }
    }
    let obstacles: Vec<Cell> = cells
        .iter()
        .copied()
        .filter(|c| !stations.contains(c) && rng.gen_bool(0.2))
        .collect();
    GridEnvironment::new(w, h, obstacles, stations).expect("stations kept free")
}

pub fn random_value(rng: &mut impl Rng) -> Value {
    if rng.gen_bool(0.5) {
        Value::from_int(rng.gen_range(1..=5))
    } else {
        Value::from_micros(rng.gen_range(1..=5_000_000))
    }
}

pub fn random_task(rng: &mut impl Rng, env: &GridEnvironment, cycle_length: usize, max_required: usize) -> Task {
    let cells: Vec<Cell> = env.feasible_cells().collect();
    let arrival = rng.gen_range(0..cycle_length);
    let departure = rng.gen_range(arrival + 1..=cycle_length);
    Task {
        required_count: rng.gen_range(1..=max_required),
        location: cells[rng.gen_range(0..cells.len())],
        arrival,
        departure,
        value: random_value(rng),
    }
}

pub fn random_scenario(rng: &mut impl Rng, limits: Limits) -> Scenario {
    let environment = random_environment(rng, limits.max_side);
    let cycle_length = rng.gen_range(1..=limits.max_cycle);
    let robot_count = rng.gen_range(1..=limits.max_robots);
    let robots = (0..robot_count)
        .map(|_| rng.gen_range(1..=environment.stations().len()))
        .collect();
    let task_count = rng.gen_range(0..=limits.max_tasks);
    let tasks = (0..task_count)
        .map(|_| random_task(rng, &environment, cycle_length, robot_count))
        .collect();
    Scenario {
        environment,
        cycle_length,
        robots,
        tasks,
        learner_params: LearnerParams::new(0.05, 1.5).unwrap(),
        initial_action: InitialAction::Uniform,
        pruning: true,
        seed: rng.gen(),
    }
}

/// Same as [`random_scenario`] but with a fixed number of robots.
pub fn random_scenario_with_robots(rng: &mut impl Rng, limits: Limits, robots: usize) -> Scenario {
    let mut s = random_scenario(rng, Limits { max_robots: robots, ..limits });
    while s.robots.len() < robots {
        s.robots.push(rng.gen_range(1..=s.environment.stations().len()));
    }
    s
}

pub fn open_grid(side: i32, station: Cell) -> GridEnvironment {
    GridEnvironment::new(side, side, [], vec![station]).unwrap()
}

pub fn cells(list: &[(i32, i32)]) -> Vec<Cell> {
    list.iter().map(|&(x, y)| Cell::new(x, y)).collect()
}

/// Path to a file under the repository's `scenarios/` directory.
pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

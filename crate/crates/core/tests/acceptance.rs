//! Acceptance suite. Prints one PASS or FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use common::{random_scenario, rng, scenario_path, Limits};
use dte::cli::{cmd_run, deviation_check, CheckOutcome, RunOptions};
use dte::harness::{
    brute_force_game, build_game_with, first_sustained_completion, median, Game, Simulation, SummaryOptions,
    DEFAULT_PROFILE_LIMIT,
};
use dte::scenario::load_scenario;
use dte::scoring::{completed_tasks, completion_time, score_report, ActionProfile};
use dte::trajectory::{enumerate_feasible, prune_action_set, verify_action_set, DEFAULT_ENUMERATION_LIMIT};
use dte::{Cell, GridEnvironment, LearnerParams, Scenario, Task, Trajectory, Value};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("worked pruning example", secs(1), worked_pruning),
        ("worked utility example", secs(1), worked_utility),
        ("utility change equals value change", secs(10), deviations),
        ("pruning keeps the optimum", secs(120), optimum_kept),
        ("pruned sets are minimal and sound", secs(60), minimality),
        ("two robots, one task", secs(300), case1),
        ("pruning speeds up convergence", secs(1800), speedup),
        ("seven robots, three tasks", secs(1800), case2),
        ("lower noise keeps the optimum longer", secs(1800), noise_trend),
        ("runs are reproducible", secs(300), determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|x| *x == id || name.contains(x.as_str())) {
            continue;
        }
        let start = Instant::now();
        let mut out = f();
        let took = start.elapsed();
        if took > *budget {
            out.pass = false;
            out.detail += &format!("; over the {} s budget", budget.as_secs());
        }
        if !out.pass {
            failed += 1;
        }
        println!(
            "{} [{id:>2}] {name}: {} ({:.1} s)",
            if out.pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn load(name: &str) -> Scenario {
    load_scenario(&scenario_path(name)).expect("bundled scenario loads")
}

fn traj(env: &GridEnvironment, cells: &[(i32, i32)]) -> Trajectory {
    Trajectory::new(env, common::cells(cells)).expect("feasible")
}

fn worked_pruning() -> Outcome {
    let env: GridEnvironment = "####\n...#\n.1.#\n...#".parse().expect("map");
    let all = enumerate_feasible(&env, Cell::new(2, 2), 3, DEFAULT_ENUMERATION_LIMIT).expect("enumerates");
    let pruned = prune_action_set(&all).expect("prunes");
    let mut expected: BTreeSet<Trajectory> = [(1, 1), (1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2), (3, 3)]
        .into_iter()
        .map(|c| traj(&env, &[(2, 2), c, c, (2, 2)]))
        .collect();
    expected.insert(traj(&env, &[(2, 2); 4]));
    let got: BTreeSet<Trajectory> = pruned.actions().iter().cloned().collect();
    check(
        all.len() == 49 && got == expected && pruned.len() == 9,
        format!("|P| = {}, |A| = {}, matches the listed nine: {}", all.len(), pruned.len(), got == expected),
    )
}

fn worked_utility() -> Outcome {
    let env: GridEnvironment = "...\n.1.\n...".parse().expect("map");
    let ps = [
        traj(&env, &[(2, 2); 5]),
        traj(&env, &[(2, 2), (2, 2), (2, 1), (2, 1), (2, 2)]),
        traj(&env, &[(2, 2), (2, 3), (2, 3), (2, 2), (2, 2)]),
    ];
    let task = Task {
        required_count: 2,
        location: Cell::new(2, 2),
        arrival: 0,
        departure: 4,
        value: Value::from_int(1),
    };
    let p = ActionProfile::new(ps.iter().collect()).expect("profile");
    let tasks = [task];
    let report = score_report(&p, &tasks);
    let u: Vec<i64> = report.per_robot_utility.iter().map(|v| v.micros() / 1_000_000).collect();
    let ok = completed_tasks(&p, &tasks) == BTreeSet::from([0])
        && completion_time(&p, &tasks[0]) == Some(0)
        && report.per_robot_utility == [Value::from_int(1), Value::ZERO, Value::ZERO]
        && report.total_value == Value::from_int(1);
    check(ok, format!("completed {:?}, U = {u:?}, f = {}", report.completed, report.total_value))
}

fn deviations() -> Outcome {
    let limits = Limits { max_robots: 4, ..Limits::SMALL };
    for i in 0..1000u64 {
        let s = random_scenario(&mut rng(10_000 + i), limits);
        let game = build_game_with(&s, false, DEFAULT_ENUMERATION_LIMIT).expect("builds");
        if let CheckOutcome::Fail(m) = deviation_check(&game, 1, i) {
            return check(false, format!("instance {i}: {m}"));
        }
    }
    check(true, "1000 deviations on 1000 random scenarios, all exact")
}

/// The 50 small instances shared by the optimum and minimality checks.
fn small_instances() -> Vec<Scenario> {
    (0..50).map(|i| random_scenario(&mut rng(20_000 + i), Limits::SMALL)).collect()
}

fn optimum_kept() -> Outcome {
    for (i, s) in small_instances().iter().enumerate() {
        let full = build_game_with(s, false, DEFAULT_ENUMERATION_LIMIT).expect("builds");
        let pruned = build_game_with(s, true, DEFAULT_ENUMERATION_LIMIT).expect("builds");
        let a = brute_force_game(&full, DEFAULT_PROFILE_LIMIT).expect("small").value;
        let b = brute_force_game(&pruned, DEFAULT_PROFILE_LIMIT).expect("small").value;
        if a != b {
            return check(false, format!("instance {i}: full optimum {a}, pruned optimum {b}"));
        }
    }
    check(true, "50 instances, equal optima")
}

/// Number of stay signatures not strictly contained in another.
fn maximal_signature_count(all: &[Trajectory]) -> usize {
    let sigs: Vec<BTreeSet<(usize, Cell)>> = all
        .iter()
        .map(|t| t.stay_signature().stays().collect())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    sigs.iter()
        .filter(|a| !sigs.iter().any(|b| b.len() > a.len() && a.is_subset(b)))
        .count()
}

fn minimality() -> Outcome {
    let mut sets = 0;
    for (i, s) in small_instances().iter().enumerate() {
        for &station in s.environment.stations() {
            let all = enumerate_feasible(&s.environment, station, s.cycle_length, DEFAULT_ENUMERATION_LIMIT)
                .expect("enumerates");
            let pruned = prune_action_set(&all).expect("prunes");
            if let Err(v) = verify_action_set(&all, &pruned) {
                return check(false, format!("instance {i}, station {station}: {v}"));
            }
            let maximal = maximal_signature_count(&all);
            if pruned.len() != maximal {
                return check(
                    false,
                    format!("instance {i}, station {station}: |A| = {} but {maximal} maximal signatures", pruned.len()),
                );
            }
            sets += 1;
        }
    }
    check(true, format!("{sets} action sets verified"))
}

/// Plays `cycles` cycles and returns the total value of each.
fn totals(game: &Game, params: LearnerParams, scenario: &Scenario, seed: u64, cycles: usize) -> Vec<Value> {
    let mut sim = Simulation::new(game, params, scenario.initial_action, seed).expect("valid");
    let mut out = Vec::with_capacity(cycles);
    for _ in 0..cycles {
        sim.step(|f, _, _, _| out.push(f));
    }
    out
}

fn tail_fraction(totals: &[Value], value: Value, tail: usize) -> f64 {
    let from = totals.len().saturating_sub(tail);
    let hits = totals[from..].iter().filter(|&&v| v == value).count();
    hits as f64 / (totals.len() - from) as f64
}

/// Tail fractions at `value` over five seeds, and how many reach `need`.
fn reproduce(name: &str, cycles: usize, tail: usize, value: i64, need: f64) -> Outcome {
    let s = load(name);
    let game = build_game_with(&s, true, DEFAULT_ENUMERATION_LIMIT).expect("builds");
    let fractions: Vec<f64> = (1..=5)
        .map(|seed| tail_fraction(&totals(&game, s.learner_params, &s, seed, cycles), Value::from_int(value), tail))
        .collect();
    let good = fractions.iter().filter(|&&f| f >= need).count();
    let shown: Vec<String> = fractions.iter().map(|f| format!("{f:.4}")).collect();
    check(
        good >= 4,
        format!("f = {value} over the last {tail} cycles: [{}], {good}/5 at or above {need}", shown.join(", ")),
    )
}

fn case1() -> Outcome {
    reproduce("case1.scenario", 500_000, 100_000, 3, 0.98)
}

fn case2() -> Outcome {
    reproduce("case2.scenario", 2_000_000, 200_000, 9, 0.98)
}

/// First sustained completion, simulating in chunks and stopping as soon as
/// it is found. Runs that never get there count as `horizon`.
fn onset(game: &Game, s: &Scenario, seed: u64, value: Value, horizon: usize) -> usize {
    const WINDOW: usize = 10_000;
    const CHUNK: usize = 100_000;
    let mut sim = Simulation::new(game, s.learner_params, s.initial_action, seed).expect("valid");
    let mut seen: Vec<Value> = Vec::new();
    while seen.len() < horizon {
        // Windows starting before this point were fully inside earlier data.
        let from = seen.len().saturating_sub(WINDOW - 1);
        for _ in 0..CHUNK.min(horizon - seen.len()) {
            sim.step(|f, _, _, _| seen.push(f));
        }
        if let Some(t) = first_sustained_completion(&seen[from..], value, WINDOW, 0.95) {
            return from + t;
        }
    }
    horizon
}

fn speedup() -> Outcome {
    const PAIRS: u64 = 12;
    const HORIZON: usize = 20_000_000;
    let s = load("case1.scenario");
    let three = Value::from_int(3);
    let pruned = build_game_with(&s, true, DEFAULT_ENUMERATION_LIMIT).expect("builds");
    let full = build_game_with(&s, false, DEFAULT_ENUMERATION_LIMIT).expect("builds");
    let mut a: Vec<f64> = (1..=PAIRS).map(|seed| onset(&pruned, &s, seed, three, HORIZON) as f64).collect();
    let mut b: Vec<f64> = (1..=PAIRS).map(|seed| onset(&full, &s, seed, three, HORIZON) as f64).collect();
    let capped = b.iter().filter(|&&x| x >= HORIZON as f64).count();
    let (ma, mb) = (median(&mut a).expect("non-empty"), median(&mut b).expect("non-empty"));
    check(
        ma * 3.0 <= mb,
        format!(
            "median onset {ma:.0} pruned vs {mb:.0} unpruned over {PAIRS} seeds, ratio {:.1}, {capped} unpruned runs capped at {HORIZON}",
            mb / ma
        ),
    )
}

fn noise_trend() -> Outcome {
    let s = load("case1.scenario");
    let game = build_game_with(&s, true, DEFAULT_ENUMERATION_LIMIT).expect("builds");
    let means: Vec<f64> = [0.05, 0.02, 0.007]
        .iter()
        .map(|&eps| {
            let params = LearnerParams::new(eps, s.learner_params.m_exponent()).expect("valid");
            let sum: f64 = (1..=5)
                .map(|seed| tail_fraction(&totals(&game, params, &s, seed, 500_000), Value::from_int(3), 100_000))
                .sum();
            sum / 5.0
        })
        .collect();
    let drops: Vec<f64> = means.windows(2).map(|w| w[0] - w[1]).filter(|&d| d > 0.0).collect();
    let ok = drops.is_empty() || (drops.len() == 1 && drops[0] <= 0.01);
    check(
        ok,
        format!("mean fraction at f = 3 for epsilon 0.05, 0.02, 0.007: {:.4}, {:.4}, {:.4}", means[0], means[1], means[2]),
    )
}

fn run_once(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let opts = RunOptions {
        cycles: 50_000,
        seed: Some(7),
        replicates: 2,
        out_dir: dir.to_path_buf(),
        no_prune: false,
        summary: SummaryOptions::default(),
    };
    cmd_run(&scenario_path("case1.scenario"), &opts, &mut std::io::sink()).expect("runs");
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("readable")
        .map(|e| {
            let p = e.expect("entry").path();
            (p.file_name().expect("name").to_string_lossy().into_owned(), std::fs::read(&p).expect("readable"))
        })
        .filter(|(n, _)| n.ends_with(".csv"))
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().expect("tempdir"), tempfile::tempdir().expect("tempdir"));
    let (x, y) = (run_once(a.path()), run_once(b.path()));
    let names: Vec<&str> = x.iter().map(|(n, _)| n.as_str()).collect();
    check(
        !x.is_empty() && x == y,
        format!("{} trace files ({}) identical across two invocations: {}", x.len(), names.join(", "), x == y),
    )
}

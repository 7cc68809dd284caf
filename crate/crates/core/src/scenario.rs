//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! cycle_length = 3
//! robots = [1, 1]          # station number of each robot
//! pruning = true
//!
//! [environment]
//! map = """
//! ...
//! .1.
//! ...
//! """
//! # or: file = "maps/reference.map", relative to the scenario file
//!
//! [[tasks]]
//! required_count = 2
//! x = 2
//! y = 2
//! arrival = 0
//! departure = 3
//! value = 1.5
//!
//! [learning]
//! epsilon = 0.007
//! m_exponent = 1.5
//! seed = 1                   # quote seeds above 9223372036854775807
//! initial_action = "uniform"   # or a 0-based action index
//! ```
//!
//! Task values may be written as integers, decimals or quoted decimal
//! strings; they are read into exact fixed-point values with up to six
//! fractional digits.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::environment::{Cell, GridEnvironment};
use crate::error::{Error, Result};
use crate::harness::Scenario;
use crate::learning::{InitialAction, LearnerParams};
use crate::scoring::{Task, Value};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    cycle_length: i64,
    robots: Vec<i64>,
    #[serde(default = "default_true")]
    pruning: bool,
    environment: RawEnvironment,
    #[serde(default)]
    tasks: Vec<RawTask>,
    learning: RawLearning,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnvironment {
    map: Option<String>,
    file: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    required_count: i64,
    x: i64,
    y: i64,
    arrival: i64,
    departure: i64,
    value: Decimal,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Decimal {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Decimal {
    fn to_value(&self) -> Result<Value> {
        match self {
            Decimal::Int(i) if *i >= 0 => Ok(Value::from_int(*i)),
            Decimal::Int(i) => Err(Error::Value(i.to_string())),
            // `{}` prints the shortest text that reads back as the same
            // float, which is the decimal that was written in the file.
            Decimal::Float(f) => format!("{f}").parse(),
            Decimal::Text(s) => s.parse(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLearning {
    epsilon: f64,
    m_exponent: f64,
    #[serde(default)]
    seed: Option<RawSeed>,
    #[serde(default)]
    initial_action: Option<RawInitial>,
}

// TOML integers are signed 64-bit, so seeds above `i64::MAX` are written as
// quoted strings.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawSeed {
    Int(i64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawInitial {
    Index(i64),
    Policy(String),
}

fn non_negative(field: &str, v: i64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::scenario(field, format!("must be non-negative, got {v}")))
}

/// Parses scenario text. Relative map `file` paths are resolved against
/// `base_dir`.
pub fn parse_scenario(text: &str, base_dir: Option<&Path>) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| {
        let field = e
            .span()
            .map(|s| {
                let line = text[..s.start].matches('\n').count() + 1;
                format!("line {line}")
            })
            .unwrap_or_else(|| "document".into());
        Error::scenario(field, e.message().to_string())
    })?;

    let environment = match (&raw.environment.map, &raw.environment.file) {
        (Some(map), None) => map.parse::<GridEnvironment>(),
        (None, Some(file)) => {
            let path = base_dir.map_or_else(|| Path::new(file).to_path_buf(), |d| d.join(file));
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            text.parse::<GridEnvironment>()
        }
        _ => {
            return Err(Error::scenario(
                "environment",
                "give exactly one of `map` or `file`",
            ))
        }
    }
    .map_err(|e| Error::scenario("environment", e.to_string()))?;

    let cycle_length = non_negative("cycle_length", raw.cycle_length)?;
    let robots = raw
        .robots
        .iter()
        .enumerate()
        .map(|(i, &k)| non_negative(&format!("robots[{i}]"), k))
        .collect::<Result<Vec<_>>>()?;

    let mut tasks = Vec::with_capacity(raw.tasks.len());
    for (j, t) in raw.tasks.iter().enumerate() {
        let field = |name: &str| format!("tasks[{j}].{name}");
        let value = t
            .value
            .to_value()
            .map_err(|e| Error::scenario(field("value"), e.to_string()))?;
        let coord = |name: &str, v: i64| {
            i32::try_from(v).map_err(|_| Error::scenario(field(name), format!("out of range: {v}")))
        };
        tasks.push(Task {
            required_count: non_negative(&field("required_count"), t.required_count)?,
            location: Cell::new(coord("x", t.x)?, coord("y", t.y)?),
            arrival: non_negative(&field("arrival"), t.arrival)?,
            departure: non_negative(&field("departure"), t.departure)?,
            value,
        });
    }

    let learner_params = LearnerParams::new(raw.learning.epsilon, raw.learning.m_exponent)
        .map_err(|e| Error::scenario("learning", e.to_string()))?;
    let initial_action = match raw.learning.initial_action {
        None => InitialAction::Uniform,
        Some(RawInitial::Policy(p)) if p == "uniform" => InitialAction::Uniform,
        Some(RawInitial::Policy(p)) => {
            return Err(Error::scenario(
                "learning.initial_action",
                format!("expected \"uniform\" or an action index, got {p:?}"),
            ))
        }
        Some(RawInitial::Index(i)) => {
            InitialAction::Fixed(non_negative("learning.initial_action", i)?)
        }
    };
    let seed = match raw.learning.seed {
        None => 0,
        Some(RawSeed::Int(i)) => u64::try_from(i)
            .map_err(|_| Error::scenario("learning.seed", "must be non-negative"))?,
        Some(RawSeed::Text(t)) => t
            .parse()
            .map_err(|_| Error::scenario("learning.seed", format!("not an unsigned integer: {t:?}")))?,
    };

    let scenario = Scenario {
        environment,
        cycle_length,
        robots,
        tasks,
        learner_params,
        initial_action,
        pruning: raw.pruning,
        seed,
    };
    scenario.validate().map_err(|e| match e {
        Error::Task { index, message } => Error::scenario(format!("tasks[{index}]"), message),
        Error::CycleLength { .. } => Error::scenario("cycle_length", e.to_string()),
        other => other,
    })?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text, path.parent())
}

/// Writes a scenario in normalized form, with the map inlined.
pub fn scenario_to_string(s: &Scenario) -> String {
    let mut out = String::new();
    let robots: Vec<String> = s.robots.iter().map(|r| r.to_string()).collect();
    let _ = writeln!(out, "cycle_length = {}", s.cycle_length);
    let _ = writeln!(out, "robots = [{}]", robots.join(", "));
    let _ = writeln!(out, "pruning = {}", s.pruning);
    let _ = writeln!(out, "\n[environment]\nmap = \"\"\"\n{}\"\"\"", s.environment);
    for t in &s.tasks {
        let _ = writeln!(
            out,
            "\n[[tasks]]\nrequired_count = {}\nx = {}\ny = {}\narrival = {}\ndeparture = {}\nvalue = \"{}\"",
            t.required_count, t.location.x, t.location.y, t.arrival, t.departure, t.value
        );
    }
    let initial = match s.initial_action {
        InitialAction::Uniform => "\"uniform\"".to_string(),
        InitialAction::Fixed(i) => i.to_string(),
    };
    let seed = if i64::try_from(s.seed).is_ok() {
        s.seed.to_string()
    } else {
        format!("\"{}\"", s.seed)
    };
    let _ = writeln!(
        out,
        "\n[learning]\nepsilon = {:?}\nm_exponent = {:?}\nseed = {}\ninitial_action = {}",
        s.learner_params.epsilon(),
        s.learner_params.m_exponent(),
        seed,
        initial
    );
    out
}

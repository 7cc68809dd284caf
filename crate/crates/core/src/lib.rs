//! Multi-robot trajectory planning for cooperative tasks with time windows,
//! cast as a potential game and solved with payoff-based log-linear
//! learning.
//!
//! The pieces, bottom up:
//!
//! - [`environment`]: the grid, obstacles, stations and the 8-connected
//!   motion model.
//! - [`trajectory`]: closed walks from a station, stay signatures and the
//!   pruned action sets.
//! - [`scoring`]: task completion, total value and wonderful-life utilities.
//! - [`learning`]: the per-robot learner.
//! - [`harness`]: repeated play, traces, metrics and an exhaustive-search
//!   optimum.
//! - [`scenario`] and [`cli`]: the scenario file format and the `dte`
//!   commands.
//!
//! ```
//! use dte::environment::{Cell, GridEnvironment};
//! use dte::trajectory::{enumerate_feasible, prune_action_set, DEFAULT_ENUMERATION_LIMIT};
//!
//! let env: GridEnvironment = "...\n.1.\n...".parse()?;
//! let all = enumerate_feasible(&env, Cell::new(2, 2), 3, DEFAULT_ENUMERATION_LIMIT)?;
//! let pruned = prune_action_set(&all)?;
//! assert_eq!((all.len(), pruned.len()), (49, 9));
//! # Ok::<(), dte::Error>(())
//! ```

pub mod cli;
pub mod environment;
mod error;
pub mod harness;
pub mod learning;
pub mod scenario;
pub mod scoring;
pub mod trajectory;

pub use environment::{Cell, GridEnvironment};
pub use error::{Error, Result};
pub use harness::{RunTrace, Scenario};
pub use learning::{LearnerParams, LearnerState};
pub use scoring::{Task, Value};
pub use trajectory::{ActionSet, Trajectory};

//! Payoff-based log-linear learning.
//!
//! Each robot only sees the utility it actually received. A settled robot
//! keeps its action, except that with probability `epsilon^m` it tries an
//! action drawn uniformly from its whole action set. In the cycle after a
//! trial it settles on either the trial or the action it had before, keeping
//! the old one with probability
//!
//! ```text
//! alpha = eps^-u_old / (eps^-u_old + eps^-u_trial) = 1 / (1 + eps^(u_old - u_trial))
//! ```
//!
//! so for small `epsilon` it almost always keeps whichever paid more.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scoring::Value;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerParams {
    epsilon: f64,
    m_exponent: f64,
}

impl LearnerParams {
    pub fn new(epsilon: f64, m_exponent: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Params(format!("epsilon must be in (0, 1), got {epsilon}")));
        }
        if !(m_exponent > 0.0 && m_exponent.is_finite()) {
            return Err(Error::Params(format!("m_exponent must be positive, got {m_exponent}")));
        }
        Ok(LearnerParams { epsilon, m_exponent })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn m_exponent(&self) -> f64 {
        self.m_exponent
    }

    /// Per-cycle probability that a settled robot tries a new action.
    pub fn experiment_probability(&self) -> f64 {
        self.epsilon.powf(self.m_exponent)
    }
}

/// Probability of reverting to the old action after a trial.
///
/// Computed as `1 / (1 + eps^(u_prev - u_curr))`, which only depends on the
/// utility difference and cannot overflow for large utilities.
pub fn numerically_stable_alpha(u_prev: f64, u_curr: f64, epsilon: f64) -> f64 {
    1.0 / (1.0 + epsilon.powf(u_prev - u_curr))
}

/// A seeded random stream. Streams built from the same seed and stream id
/// produce the same draws; different ids give independent sequences.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream(rng)
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.0.gen()
    }

    /// Uniform in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.0.gen_range(0..n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialAction {
    Uniform,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub experimenting: bool,
    pub current_action: usize,
    /// The action to fall back on after a trial.
    pub previous_action: usize,
    /// Utility realized by `previous_action` in the cycle before the trial.
    pub previous_utility: Value,
    /// Utility realized in the cycle just played.
    pub current_utility: Value,
}

impl LearnerState {
    pub fn new(action_count: usize, initial: InitialAction, rng: &mut RngStream) -> Result<Self> {
        if action_count == 0 {
            return Err(Error::Params("a learner needs at least one action".into()));
        }
        let action = match initial {
            InitialAction::Uniform => rng.index(action_count),
            InitialAction::Fixed(a) if a < action_count => a,
            InitialAction::Fixed(a) => {
                return Err(Error::Params(format!(
                    "initial action {a} out of range for {action_count} actions"
                )))
            }
        };
        Ok(LearnerState {
            experimenting: false,
            current_action: action,
            previous_action: action,
            previous_utility: Value::ZERO,
            current_utility: Value::ZERO,
        })
    }

    /// Records the utility received for the cycle just played.
    pub fn observe(&mut self, utility: Value) {
        self.current_utility = utility;
    }

    /// Picks the action for the next cycle and returns it.
    ///
    /// A settled robot draws one uniform number, plus an action index if it
    /// starts a trial. A robot coming off a trial draws one uniform number
    /// to settle.
    pub fn step(&mut self, params: &LearnerParams, rng: &mut RngStream, action_count: usize) -> usize {
        if self.experimenting {
            self.experimenting = false;
            let alpha = numerically_stable_alpha(
                self.previous_utility.to_f64(),
                self.current_utility.to_f64(),
                params.epsilon,
            );
            if rng.unit() < alpha {
                self.current_action = self.previous_action;
            }
        } else if rng.unit() < params.experiment_probability() {
            self.previous_action = self.current_action;
            self.previous_utility = self.current_utility;
            self.current_action = rng.index(action_count);
            self.experimenting = true;
        }
        self.current_action
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        ((a - b) / b).abs() <= rel
    }

    #[test]
    fn params_validation() {
        assert!(LearnerParams::new(0.007, 1.5).is_ok());
        assert!(LearnerParams::new(0.0, 1.5).is_err());
        assert!(LearnerParams::new(1.0, 1.5).is_err());
        assert!(LearnerParams::new(f64::NAN, 1.5).is_err());
        assert!(LearnerParams::new(0.5, 0.0).is_err());
    }

    #[test]
    fn alpha_reference_values() {
        // Reference values from 40-digit arithmetic.
        assert_eq!(numerically_stable_alpha(0.0, 0.0, 0.3), 0.5);
        assert_eq!(numerically_stable_alpha(2.0, 2.0, 0.007), 0.5);
        assert!(close(
            numerically_stable_alpha(0.0, 3.0, 0.007),
            3.429_998_823_510_403_5e-7,
            1e-12
        ));
        let a = numerically_stable_alpha(5.0, 0.0, 0.007);
        assert!(close(1.0 - a, 1.680_699_999_971_752_5e-11, 1e-4));
        assert!(close(
            numerically_stable_alpha(0.0, 3.0, 0.05),
            1.249_843_769_528_808_9e-4,
            1e-12
        ));
        // Direct form for moderate utilities.
        let e: f64 = 0.007;
        let direct = e.powf(-1.0) / (e.powf(-1.0) + e.powf(-2.5));
        assert!(close(numerically_stable_alpha(1.0, 2.5, e), direct, 1e-12));
    }

    #[test]
    fn alpha_survives_large_utilities() {
        let a = numerically_stable_alpha(1000.0, 1001.0, 0.001);
        assert!(close(a, 1.0 / 1001.0, 1e-12));
        assert_eq!(numerically_stable_alpha(0.0, 1e6, 0.001), 0.0);
    }

    #[test]
    fn experiment_probability_reference_values() {
        let p = LearnerParams::new(0.007, 1.5).unwrap();
        assert!(close(p.experiment_probability(), 5.856_620_185_738_529e-4, 1e-12));
        let p = LearnerParams::new(0.007, 1.8).unwrap();
        assert!(close(p.experiment_probability(), 1.321_832_641_003_178e-4, 1e-12));
    }

    #[test]
    fn init() {
        let mut rng = RngStream::new(1, 0);
        let s = LearnerState::new(9, InitialAction::Fixed(0), &mut rng).unwrap();
        assert!(!s.experimenting);
        assert_eq!((s.current_action, s.previous_action), (0, 0));
        assert_eq!(s.current_utility, Value::ZERO);
        assert!(LearnerState::new(9, InitialAction::Fixed(9), &mut rng).is_err());
        assert!(LearnerState::new(0, InitialAction::Uniform, &mut rng).is_err());
        for seed in 0..20 {
            let mut rng = RngStream::new(seed, 3);
            let s = LearnerState::new(1, InitialAction::Uniform, &mut rng).unwrap();
            assert_eq!(s.current_action, 0);
        }
        let draw = |seed| {
            let mut rng = RngStream::new(seed, 1);
            LearnerState::new(9, InitialAction::Uniform, &mut rng).unwrap().current_action
        };
        assert_eq!(draw(42), draw(42));
        assert!((0..50).map(draw).any(|a| a != draw(0)));
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let take = |seed, stream| {
            let mut r = RngStream::new(seed, stream);
            (0..8).map(|_| r.index(1000)).collect::<Vec<_>>()
        };
        assert_eq!(take(7, 2), take(7, 2));
        assert_ne!(take(7, 2), take(7, 3));
        assert_ne!(take(7, 2), take(8, 2));
    }

    #[test]
    fn settles_back_on_the_better_action() {
        let params = LearnerParams::new(0.007, 1.5).unwrap();
        let mut rng = RngStream::new(5, 0);
        let mut reverts = 0;
        for _ in 0..1000 {
            let mut s = LearnerState {
                experimenting: true,
                current_action: 4,
                previous_action: 2,
                previous_utility: Value::from_int(3),
                current_utility: Value::ZERO,
            };
            if s.step(&params, &mut rng, 9) == 2 {
                reverts += 1;
            }
            assert!(!s.experimenting);
        }
        assert_eq!(reverts, 1000);
    }

    #[test]
    fn experimentation_rate() {
        let params = LearnerParams::new(0.3, 2.0).unwrap();
        let mut rng = RngStream::new(11, 0);
        let mut s = LearnerState::new(5, InitialAction::Fixed(0), &mut rng).unwrap();
        let n = 1_000_000;
        let mut settled = 0u64;
        let mut starts = 0u64;
        for _ in 0..n {
            let was = s.experimenting;
            s.observe(Value::ZERO);
            s.step(&params, &mut rng, 5);
            if !was {
                settled += 1;
                starts += s.experimenting as u64;
            } else {
                assert!(!s.experimenting);
            }
        }
        let p = params.experiment_probability();
        let rate = starts as f64 / settled as f64;
        let sd = (p * (1.0 - p) / settled as f64).sqrt();
        assert!((rate - p).abs() < 5.0 * sd, "rate {rate} vs {p}");
    }

    #[test]
    fn settled_robot_without_trial_keeps_action() {
        let params = LearnerParams::new(0.001, 3.0).unwrap();
        let mut rng = RngStream::new(3, 0);
        let mut s = LearnerState::new(9, InitialAction::Fixed(6), &mut rng).unwrap();
        for _ in 0..10_000 {
            let before = s.current_action;
            let a = s.step(&params, &mut rng, 9);
            if !s.experimenting {
                assert_eq!(a, before);
            }
        }
    }
}

//! Payoff-based independent learning in two-player zero-sum games.
//!
//! Both players run smoothed best-response dynamics driven only by their own
//! realized payoffs: [`dynamics::matrix`] for matrix games and the nested
//! value-iteration scheme of [`dynamics::stochastic`] for discounted stochastic
//! games. [`operators`] and [`metrics`] provide the exact oracles (matrix-game
//! values, best responses, Nash distributions, Nash gaps) used to measure them,
//! and [`harness`] runs seeded multi-trajectory experiments.

pub mod dynamics;
pub mod error;
pub mod game;
pub mod harness;
pub mod metrics;
pub mod operators;
pub mod random;
pub mod record;

pub use error::{Error, Result};
pub use game::{Game, GameSpec, JointPolicy, MatrixGame, Player, Policy, StochasticGame};

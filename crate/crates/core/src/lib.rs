//! Decoupled Q-learning laboratory.
//!
//! The action-value function is split into a survival part, trained only on
//! environment punishments, and a task part, trained only on task rewards:
//! `Q(s, a) = Q_env(s, a) + Q_task(s, a)`. The survival part can be frozen and
//! reused when the task changes, and it masks exploration to a set of safe
//! actions.
//!
//! Module map:
//!
//! - [`mdp`] and [`rng`]: shared interaction types and seeded random streams.
//! - [`env`]: the collect-and-avoid gridworld and the cliff walk.
//! - [`qcore`]: tabular and MLP value functions, Adam, decomposed updates.
//! - [`exploration`]: epsilon schedules and the safe action mask.
//! - [`replay`]: ring-buffer experience replay and its seeding strategies.
//! - [`dp`]: exact value iteration used as a test oracle.
//! - [`harness`]: the two-phase naive / transfer / decoupled experiment.
//! - [`plot`]: static SVG learning curves.

pub mod dp;
pub mod env;
pub mod error;
pub mod exploration;
pub mod harness;
pub mod mdp;
pub mod plot;
pub mod qcore;
pub mod replay;
pub mod rng;
pub mod snapshot;
pub mod stats;

pub use error::{Error, Result};
pub use mdp::{ActionId, DecomposedReward, EpisodeTrace, Transition};
pub use rng::{RngStream, Substream};

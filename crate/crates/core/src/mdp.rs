//! Episodic interaction types shared by every environment and learner.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the four grid moves. The integer encoding is part of the snapshot
/// and replay file formats and must not change.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum ActionId {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

pub const NUM_ACTIONS: usize = 4;

impl ActionId {
    pub const ALL: [ActionId; NUM_ACTIONS] =
        [ActionId::Up, ActionId::Down, ActionId::Left, ActionId::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<ActionId> {
        ActionId::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Usage(format!("action index {i} out of range 0..4")))
    }

    /// Row/column displacement. Row 0 is the bottom row, so `Up` increases the row.
    pub fn delta(self) -> (i32, i32) {
        match self {
            ActionId::Up => (1, 0),
            ActionId::Down => (-1, 0),
            ActionId::Left => (0, -1),
            ActionId::Right => (0, 1),
        }
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ActionId::Up => "up",
            ActionId::Down => "down",
            ActionId::Left => "left",
            ActionId::Right => "right",
        };
        f.write_str(s)
    }
}

/// Reward split into the environment part (punishments, routed to the
/// survival function) and the task part (routed to the task function).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecomposedReward {
    pub r_env: f64,
    pub r_task: f64,
}

impl DecomposedReward {
    pub const ZERO: DecomposedReward = DecomposedReward { r_env: 0.0, r_task: 0.0 };

    pub fn new(r_env: f64, r_task: f64) -> Self {
        Self { r_env, r_task }
    }

    /// The scalar reward seen by a monolithic learner.
    pub fn total(&self) -> f64 {
        self.r_env + self.r_task
    }
}

/// One interaction step. `terminal` means the next state is absorbing and the
/// bootstrap term must be dropped; a horizon cut-off is *not* terminal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition<S> {
    pub state: S,
    pub action: ActionId,
    pub reward: DecomposedReward,
    pub next_state: S,
    pub terminal: bool,
}

impl<S> Transition<S> {
    /// Same transition over a different state representation.
    pub fn map_states<T>(self, mut f: impl FnMut(S) -> T) -> Transition<T> {
        Transition {
            state: f(self.state),
            action: self.action,
            reward: self.reward,
            next_state: f(self.next_state),
            terminal: self.terminal,
        }
    }
}

/// An ordered episode. At most one terminal transition, and only at the end.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace<S> {
    transitions: Vec<Transition<S>>,
}

impl<S> Default for EpisodeTrace<S> {
    fn default() -> Self {
        Self { transitions: Vec::new() }
    }
}

impl<S> EpisodeTrace<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: Transition<S>) -> Result<()> {
        if self.is_finished() {
            return Err(Error::Usage("episode already ended in a terminal transition".into()));
        }
        self.transitions.push(t);
        Ok(())
    }

    pub fn is_finished(&self) -> bool {
        self.transitions.last().is_some_and(|t| t.terminal)
    }

    pub fn step_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn transitions(&self) -> &[Transition<S>] {
        &self.transitions
    }

    /// Undiscounted sum of total rewards.
    pub fn total_return(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward.total()).sum()
    }
}

impl<S> TryFrom<Vec<Transition<S>>> for EpisodeTrace<S> {
    type Error = Error;

    fn try_from(transitions: Vec<Transition<S>>) -> Result<Self> {
        let mut trace = EpisodeTrace::new();
        for t in transitions {
            trace.push(t)?;
        }
        Ok(trace)
    }
}

/// `sum_t gamma^t * (r_env_t + r_task_t)`.
pub fn discounted_return<S>(trace: &EpisodeTrace<S>, gamma: f64) -> f64 {
    let mut discount = 1.0;
    let mut acc = 0.0;
    for t in trace.transitions() {
        acc += discount * t.reward.total();
        discount *= gamma;
    }
    acc
}

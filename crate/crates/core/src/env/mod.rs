//! Environments and the observation encodings the learners consume.

pub mod cliffwalk;
pub mod gridworld;

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mdp::{ActionId, DecomposedReward};
use crate::rng::RngStream;

pub use cliffwalk::{CliffConfig, CliffState, CliffWalk};
pub use gridworld::{CellContent, GridConfig, GridState, GridWorld, TaskSpec};

/// Grid coordinate; row 0 is the bottom row.
pub type Pos = (usize, usize);

/// Result of one environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome<S> {
    pub state: S,
    pub reward: DecomposedReward,
    /// The episode is over (absorbing event or horizon reached).
    pub done: bool,
    /// Ended by an environment punishment (obstacle or cliff).
    pub crashed: bool,
    /// Ended only because the step budget ran out.
    pub timeout: bool,
}

impl<S> StepOutcome<S> {
    /// Whether the next state is absorbing, i.e. the bootstrap term is zero.
    pub fn absorbing(&self) -> bool {
        self.done && !self.timeout
    }
}

/// How a state is presented to a learner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Encoding {
    /// A single table index. Gridworld: egocentric window of side `window`.
    /// Cliff walk: the agent position (window ignored).
    Tabular { window: usize },
    /// Binary channels flattened into a feature vector.
    OneHot,
}

impl Encoding {
    pub fn id(&self) -> String {
        match self {
            Encoding::Tabular { window } => format!("tabular-w{window}"),
            Encoding::OneHot => "onehot".to_string(),
        }
    }
}

/// An encoded state. One-hot observations are stored sparsely as the sorted
/// indices of their set bits.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Obs {
    Index(u64),
    OneHot { dim: u32, active: Vec<u32> },
}

impl Obs {
    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            Obs::Index(i) => vec![*i as f64],
            Obs::OneHot { dim, active } => {
                let mut v = vec![0.0; *dim as usize];
                for &i in active {
                    v[i as usize] = 1.0;
                }
                v
            }
        }
    }
}

/// A task-parameterised episodic environment.
pub trait Environment: Send + Sync {
    type State: Clone + Debug + PartialEq + Send + Sync + Serialize;

    fn reset(&self, rng: &mut RngStream) -> Result<Self::State>;

    fn step(
        &self,
        state: &Self::State,
        action: ActionId,
        task: TaskSpec,
        rng: &mut RngStream,
    ) -> Result<StepOutcome<Self::State>>;

    fn encode(&self, state: &Self::State, encoding: Encoding) -> Result<Obs>;

    /// Number of table rows (tabular) or feature width (one-hot).
    fn obs_dim(&self, encoding: Encoding) -> Result<usize>;

    fn render(&self, state: &Self::State) -> String;

    fn max_steps(&self) -> usize;
}

/// Rendering characters shared by both worlds.
pub(crate) mod glyph {
    pub const AGENT: char = 'A';
    pub const HAZARD: char = '#';
    pub const EMPTY: char = '.';
    pub const GOAL: char = 'G';
}

//! Collect-and-avoid gridworld.
//!
//! The agent spawns on a random cell; every other cell independently holds an
//! obstacle, a collectible of one of two types, or nothing. Walking into an
//! obstacle ends the episode with an environment reward of -1. Picking up a
//! collectible respawns one of the same type on a random empty cell and pays
//! +1 task reward when the type matches the current task.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{glyph, Encoding, Environment, Obs, Pos, StepOutcome};
use crate::error::{Error, Result};
use crate::mdp::{ActionId, DecomposedReward};
use crate::rng::RngStream;

const MAX_RESET_ATTEMPTS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub p_obstacle: f64,
    /// Total collectible probability per cell, split evenly over the types.
    /// With `collectible_prob_per_type` it is the probability of each type.
    pub p_collectible: f64,
    pub collectible_prob_per_type: bool,
    pub n_collectible_types: usize,
    pub max_steps: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            width: 11,
            height: 11,
            p_obstacle: 0.15,
            p_collectible: 0.05,
            collectible_prob_per_type: false,
            n_collectible_types: 2,
            max_steps: 50,
        }
    }
}

impl GridConfig {
    fn collectible_coverage(&self) -> f64 {
        if self.collectible_prob_per_type {
            self.p_collectible * self.n_collectible_types as f64
        } else {
            self.p_collectible
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.width * self.height < 2 {
            return bad(format!("grid {}x{} needs at least 2 cells", self.width, self.height));
        }
        if self.n_collectible_types != 2 {
            return bad(format!(
                "n_collectible_types must be 2 (got {})",
                self.n_collectible_types
            ));
        }
        for (name, p) in [("p_obstacle", self.p_obstacle), ("p_collectible", self.p_collectible)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if self.p_obstacle + self.collectible_coverage() >= 1.0 {
            return bad(format!(
                "p_obstacle + collectible coverage = {} leaves no room for empty cells",
                self.p_obstacle + self.collectible_coverage()
            ));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellContent {
    Empty,
    Obstacle,
    Collectible(u8),
}

impl CellContent {
    /// Base-4 digit used by the local-window encoding.
    fn digit(self) -> u64 {
        match self {
            CellContent::Empty => 0,
            CellContent::Obstacle => 1,
            CellContent::Collectible(k) => 2 + u64::from(k),
        }
    }

    fn glyph(self) -> char {
        match self {
            CellContent::Empty => glyph::EMPTY,
            CellContent::Obstacle => glyph::HAZARD,
            CellContent::Collectible(k) => char::from(b'0' + k),
        }
    }
}

/// Which collectible type pays task reward.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskSpec {
    pub desired_type: u8,
}

impl TaskSpec {
    pub fn new(desired_type: u8) -> Self {
        Self { desired_type }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridState {
    pub agent_pos: Pos,
    /// Row-major, `cells[row * width + col]`.
    pub cells: Vec<CellContent>,
    pub steps_elapsed: usize,
    pub terminated: bool,
}

impl GridState {
    pub fn count(&self, content: CellContent) -> usize {
        self.cells.iter().filter(|c| **c == content).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridWorld {
    config: GridConfig,
}

impl GridWorld {
    pub fn new(config: GridConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    fn idx(&self, (row, col): Pos) -> usize {
        row * self.config.width + col
    }

    fn draw_cell(&self, rng: &mut RngStream) -> CellContent {
        let c = &self.config;
        let u: f64 = rng.gen();
        if u < c.p_obstacle {
            return CellContent::Obstacle;
        }
        let u = u - c.p_obstacle;
        if c.collectible_prob_per_type {
            let k = (u / c.p_collectible) as usize;
            if c.p_collectible > 0.0 && k < c.n_collectible_types {
                return CellContent::Collectible(k as u8);
            }
        } else if u < c.p_collectible {
            return CellContent::Collectible(rng.gen_range(0..c.n_collectible_types) as u8);
        }
        CellContent::Empty
    }

    /// Fresh episode. Redraws until at least one empty non-agent cell exists,
    /// which guarantees every later respawn has somewhere to go.
    pub fn reset(&self, rng: &mut RngStream) -> Result<GridState> {
        let c = &self.config;
        for _ in 0..MAX_RESET_ATTEMPTS {
            let agent_pos = (rng.gen_range(0..c.height), rng.gen_range(0..c.width));
            let agent_idx = self.idx(agent_pos);
            let cells: Vec<CellContent> = (0..c.width * c.height)
                .map(|i| if i == agent_idx { CellContent::Empty } else { self.draw_cell(rng) })
                .collect();
            let empties = cells.iter().filter(|x| **x == CellContent::Empty).count();
            if empties >= 2 {
                return Ok(GridState { agent_pos, cells, steps_elapsed: 0, terminated: false });
            }
        }
        Err(Error::Config(format!(
            "could not draw a grid with a free cell in {MAX_RESET_ATTEMPTS} attempts"
        )))
    }

    fn target(&self, (row, col): Pos, action: ActionId) -> Pos {
        let (dr, dc) = action.delta();
        let r = row as i64 + i64::from(dr);
        let c = col as i64 + i64::from(dc);
        if r < 0 || c < 0 || r >= self.config.height as i64 || c >= self.config.width as i64 {
            (row, col)
        } else {
            (r as usize, c as usize)
        }
    }

    pub fn step(
        &self,
        state: &GridState,
        action: ActionId,
        task: TaskSpec,
        rng: &mut RngStream,
    ) -> Result<StepOutcome<GridState>> {
        if state.terminated {
            return Err(Error::Usage("step called on a terminated gridworld state".into()));
        }
        if usize::from(task.desired_type) >= self.config.n_collectible_types {
            return Err(Error::Config(format!("task type {} does not exist", task.desired_type)));
        }
        let mut next = state.clone();
        next.steps_elapsed += 1;
        let to = self.target(state.agent_pos, action);
        let to_idx = self.idx(to);
        let mut reward = DecomposedReward::ZERO;
        let mut crashed = false;

        match state.cells[to_idx] {
            CellContent::Obstacle => {
                reward.r_env = -1.0;
                crashed = true;
            }
            CellContent::Collectible(k) => {
                next.cells[to_idx] = CellContent::Empty;
                next.agent_pos = to;
                let free: Vec<usize> = next
                    .cells
                    .iter()
                    .enumerate()
                    .filter(|(i, c)| **c == CellContent::Empty && *i != to_idx)
                    .map(|(i, _)| i)
                    .collect();
                // The cell the agent just left is always free.
                let spot = free[rng.gen_range(0..free.len())];
                next.cells[spot] = CellContent::Collectible(k);
                if k == task.desired_type {
                    reward.r_task = 1.0;
                }
            }
            CellContent::Empty => next.agent_pos = to,
        }

        let timeout = !crashed && next.steps_elapsed >= self.config.max_steps;
        next.terminated = crashed || timeout;
        Ok(StepOutcome { done: next.terminated, state: next, reward, crashed, timeout })
    }

    /// Four binary channels (agent, obstacle, type 0, type 1), each
    /// `width * height` long, concatenated in that order.
    pub fn encode_onehot(&self, state: &GridState) -> Vec<f64> {
        self.onehot_obs(state).to_dense()
    }

    fn onehot_obs(&self, state: &GridState) -> Obs {
        let n = self.config.width * self.config.height;
        let mut active = vec![self.idx(state.agent_pos) as u32];
        for (channel, content) in [
            (1, CellContent::Obstacle),
            (2, CellContent::Collectible(0)),
            (3, CellContent::Collectible(1)),
        ] {
            active.extend(
                state
                    .cells
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c == content)
                    .map(|(i, _)| (channel * n + i) as u32),
            );
        }
        Obs::OneHot { dim: (4 * n) as u32, active }
    }

    /// Egocentric `window x window` view as a base-4 number, most significant
    /// digit first, rows from the top of the window. Cells outside the grid
    /// read as obstacles and the centre (the agent) is skipped.
    pub fn encode_local(&self, state: &GridState, window: usize) -> Result<u64> {
        check_window(window)?;
        let half = (window / 2) as i64;
        let (row, col) = (state.agent_pos.0 as i64, state.agent_pos.1 as i64);
        let mut index = 0u64;
        for dr in (-half..=half).rev() {
            for dc in -half..=half {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (r, c) = (row + dr, col + dc);
                let content = if r < 0
                    || c < 0
                    || r >= self.config.height as i64
                    || c >= self.config.width as i64
                {
                    CellContent::Obstacle
                } else {
                    state.cells[self.idx((r as usize, c as usize))]
                };
                index = index * 4 + content.digit();
            }
        }
        Ok(index)
    }

    /// ASCII dump, top row first: `A` agent, `#` obstacle, `0`/`1`
    /// collectibles, `.` empty.
    pub fn render(&self, state: &GridState) -> String {
        let c = &self.config;
        let mut out = String::with_capacity((c.width + 1) * c.height);
        for row in (0..c.height).rev() {
            for col in 0..c.width {
                out.push(if (row, col) == state.agent_pos {
                    glyph::AGENT
                } else {
                    state.cells[self.idx((row, col))].glyph()
                });
            }
            out.push('\n');
        }
        out
    }
}

/// Largest window whose index fits in 64 bits (4^24 states).
pub const MAX_TABULAR_WINDOW: usize = 5;

fn check_window(window: usize) -> Result<()> {
    if window.is_multiple_of(2) {
        return Err(Error::Config(format!("window size must be odd (got {window})")));
    }
    if window > MAX_TABULAR_WINDOW {
        return Err(Error::Config(format!(
            "window size {window} exceeds the largest indexable window {MAX_TABULAR_WINDOW}"
        )));
    }
    Ok(())
}

/// Number of distinct local-window indices, `4^(window^2 - 1)`.
pub fn local_window_states(window: usize) -> Result<u64> {
    check_window(window)?;
    Ok(4u64.pow((window * window - 1) as u32))
}

impl Environment for GridWorld {
    type State = GridState;

    fn reset(&self, rng: &mut RngStream) -> Result<GridState> {
        GridWorld::reset(self, rng)
    }

    fn step(
        &self,
        state: &GridState,
        action: ActionId,
        task: TaskSpec,
        rng: &mut RngStream,
    ) -> Result<StepOutcome<GridState>> {
        GridWorld::step(self, state, action, task, rng)
    }

    fn encode(&self, state: &GridState, encoding: Encoding) -> Result<Obs> {
        match encoding {
            Encoding::Tabular { window } => Ok(Obs::Index(self.encode_local(state, window)?)),
            Encoding::OneHot => Ok(self.onehot_obs(state)),
        }
    }

    fn obs_dim(&self, encoding: Encoding) -> Result<usize> {
        match encoding {
            Encoding::Tabular { window } => Ok(local_window_states(window)? as usize),
            Encoding::OneHot => Ok(4 * self.config.width * self.config.height),
        }
    }

    fn render(&self, state: &GridState) -> String {
        GridWorld::render(self, state)
    }

    fn max_steps(&self) -> usize {
        self.config.max_steps
    }
}

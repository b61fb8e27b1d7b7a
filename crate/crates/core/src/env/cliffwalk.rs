//! Deterministic cliff walk with decoupled reward routing: falling off the
//! cliff is an environment punishment (`r_env`), reaching the goal is task
//! reward (`r_task`). There is no per-step cost.

use serde::{Deserialize, Serialize};

use super::{glyph, Encoding, Environment, Obs, Pos, StepOutcome, TaskSpec};
use crate::error::{Error, Result};
use crate::mdp::{ActionId, DecomposedReward};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliffConfig {
    pub width: usize,
    pub height: usize,
    pub start: Pos,
    pub goal: Pos,
    /// Cliff cells. `None` is the classic layout: the bottom row strictly
    /// between start and goal.
    pub cliff: Option<Vec<Pos>>,
    pub r_goal: f64,
    pub r_cliff: f64,
    pub max_steps: usize,
}

impl Default for CliffConfig {
    fn default() -> Self {
        Self {
            width: 12,
            height: 4,
            start: (0, 0),
            goal: (0, 11),
            cliff: None,
            r_goal: 1.0,
            r_cliff: -1.0,
            max_steps: 100,
        }
    }
}

impl CliffConfig {
    pub fn cliff_cells(&self) -> Vec<Pos> {
        match &self.cliff {
            Some(c) => c.clone(),
            None if self.start.0 == self.goal.0 => {
                let row = self.start.0;
                let (lo, hi) = if self.start.1 < self.goal.1 {
                    (self.start.1, self.goal.1)
                } else {
                    (self.goal.1, self.start.1)
                };
                ((lo + 1)..hi).map(|c| (row, c)).collect()
            }
            None => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CliffState {
    pub agent_pos: Pos,
    pub steps_elapsed: usize,
    pub terminated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliffWalk {
    config: CliffConfig,
    is_cliff: Vec<bool>,
}

impl CliffWalk {
    pub fn new(config: CliffConfig) -> Result<Self> {
        let in_bounds = |(r, c): Pos| r < config.height && c < config.width;
        if config.width == 0 || config.height == 0 {
            return Err(Error::Config("cliff world needs positive dimensions".into()));
        }
        if !in_bounds(config.start) || !in_bounds(config.goal) {
            return Err(Error::Config("start and goal must lie inside the grid".into()));
        }
        if config.start == config.goal {
            return Err(Error::Config("start and goal must differ".into()));
        }
        if config.r_cliff > 0.0 || config.r_goal < 0.0 {
            return Err(Error::Config(
                "cliff reward must be <= 0 and goal reward >= 0 for reward routing".into(),
            ));
        }
        if config.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        let mut is_cliff = vec![false; config.width * config.height];
        for p in config.cliff_cells() {
            if !in_bounds(p) {
                return Err(Error::Config(format!("cliff cell {p:?} outside the grid")));
            }
            if p == config.start || p == config.goal {
                return Err(Error::Config(format!("cliff cell {p:?} overlaps start or goal")));
            }
            is_cliff[p.0 * config.width + p.1] = true;
        }
        Ok(Self { config, is_cliff })
    }

    pub fn config(&self) -> &CliffConfig {
        &self.config
    }

    pub fn is_cliff(&self, (r, c): Pos) -> bool {
        self.is_cliff[r * self.config.width + c]
    }

    pub fn reset(&self) -> CliffState {
        CliffState { agent_pos: self.config.start, steps_elapsed: 0, terminated: false }
    }

    /// Deterministic move from `pos`: next position, reward, absorbing flag.
    pub fn transition(&self, (row, col): Pos, action: ActionId) -> (Pos, DecomposedReward, bool) {
        let (dr, dc) = action.delta();
        let r = row as i64 + i64::from(dr);
        let c = col as i64 + i64::from(dc);
        let to = if r < 0 || c < 0 || r >= self.config.height as i64 || c >= self.config.width as i64
        {
            (row, col)
        } else {
            (r as usize, c as usize)
        };
        if self.is_cliff(to) {
            (to, DecomposedReward::new(self.config.r_cliff, 0.0), true)
        } else if to == self.config.goal {
            (to, DecomposedReward::new(0.0, self.config.r_goal), true)
        } else {
            (to, DecomposedReward::ZERO, false)
        }
    }

    pub fn step(&self, state: &CliffState, action: ActionId) -> Result<StepOutcome<CliffState>> {
        if state.terminated {
            return Err(Error::Usage("step called on a terminated cliff-walk state".into()));
        }
        let (to, reward, absorbing) = self.transition(state.agent_pos, action);
        let steps_elapsed = state.steps_elapsed + 1;
        let timeout = !absorbing && steps_elapsed >= self.config.max_steps;
        let done = absorbing || timeout;
        Ok(StepOutcome {
            state: CliffState { agent_pos: to, steps_elapsed, terminated: done },
            reward,
            done,
            crashed: absorbing && self.is_cliff(to),
            timeout,
        })
    }

    /// Every non-terminal position in row-major order (row 0 first).
    pub fn enumerate_states(&self) -> Vec<Pos> {
        let c = &self.config;
        (0..c.height)
            .flat_map(|r| (0..c.width).map(move |col| (r, col)))
            .filter(|&p| !self.is_cliff(p) && p != c.goal)
            .collect()
    }

    pub fn position_index(&self, (r, c): Pos) -> usize {
        r * self.config.width + c
    }

    /// Same glyphs as the gridworld; the goal is `G`.
    pub fn render(&self, state: &CliffState) -> String {
        let c = &self.config;
        let mut out = String::with_capacity((c.width + 1) * c.height);
        for row in (0..c.height).rev() {
            for col in 0..c.width {
                let p = (row, col);
                out.push(if p == state.agent_pos {
                    glyph::AGENT
                } else if self.is_cliff(p) {
                    glyph::HAZARD
                } else if p == c.goal {
                    glyph::GOAL
                } else {
                    glyph::EMPTY
                });
            }
            out.push('\n');
        }
        out
    }
}

impl Environment for CliffWalk {
    type State = CliffState;

    fn reset(&self, _rng: &mut RngStream) -> Result<CliffState> {
        Ok(CliffWalk::reset(self))
    }

    fn step(
        &self,
        state: &CliffState,
        action: ActionId,
        _task: TaskSpec,
        _rng: &mut RngStream,
    ) -> Result<StepOutcome<CliffState>> {
        CliffWalk::step(self, state, action)
    }

    fn encode(&self, state: &CliffState, encoding: Encoding) -> Result<Obs> {
        let i = self.position_index(state.agent_pos);
        Ok(match encoding {
            Encoding::Tabular { .. } => Obs::Index(i as u64),
            Encoding::OneHot => Obs::OneHot {
                dim: (self.config.width * self.config.height) as u32,
                active: vec![i as u32],
            },
        })
    }

    fn obs_dim(&self, _encoding: Encoding) -> Result<usize> {
        Ok(self.config.width * self.config.height)
    }

    fn render(&self, state: &CliffState) -> String {
        CliffWalk::render(self, state)
    }

    fn max_steps(&self) -> usize {
        self.config.max_steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classic() -> CliffWalk {
        CliffWalk::new(CliffConfig::default()).unwrap()
    }

    #[test]
    fn reset_puts_agent_on_start() {
        let w = classic();
        assert_eq!(w.reset().agent_pos, (0, 0));
        assert_eq!(w.reset(), w.reset());
        let w = CliffWalk::new(CliffConfig { start: (2, 3), ..Default::default() }).unwrap();
        assert_eq!(w.reset().agent_pos, (2, 3));
    }

    #[test]
    fn right_from_start_falls() {
        let w = classic();
        let out = w.step(&w.reset(), ActionId::Right).unwrap();
        assert_eq!(out.reward, DecomposedReward::new(-1.0, 0.0));
        assert!(out.done && out.crashed && out.absorbing());
        assert!(w.step(&out.state, ActionId::Up).is_err());
    }

    #[test]
    fn reaching_goal_pays_task_reward() {
        let w = classic();
        let s = CliffState { agent_pos: (1, 11), steps_elapsed: 0, terminated: false };
        let out = w.step(&s, ActionId::Down).unwrap();
        assert_eq!(out.reward, DecomposedReward::new(0.0, 1.0));
        assert!(out.done && !out.crashed);
        // Bottom-row approach: the cell left of the goal is a cliff in the
        // classic layout, so use a layout without one.
        let w = CliffWalk::new(CliffConfig { cliff: Some(vec![]), ..Default::default() }).unwrap();
        let s = CliffState { agent_pos: (0, 10), steps_elapsed: 0, terminated: false };
        let out = w.step(&s, ActionId::Right).unwrap();
        assert_eq!(out.reward, DecomposedReward::new(0.0, 1.0));
        assert!(out.absorbing());
    }

    #[test]
    fn up_from_start_is_quiet() {
        let w = classic();
        let out = w.step(&w.reset(), ActionId::Up).unwrap();
        assert_eq!(out.reward, DecomposedReward::ZERO);
        assert!(!out.done);
        assert_eq!(out.state.agent_pos, (1, 0));
    }

    #[test]
    fn timeout_at_max_steps() {
        let w = CliffWalk::new(CliffConfig { max_steps: 2, ..Default::default() }).unwrap();
        let s = w.step(&w.reset(), ActionId::Up).unwrap().state;
        let out = w.step(&s, ActionId::Up).unwrap();
        assert!(out.done && out.timeout && !out.absorbing());
    }

    #[test]
    fn state_enumeration() {
        let states = classic().enumerate_states();
        assert_eq!(states.len(), 37);
        let mut sorted = states.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted, states);

        let tiny = CliffWalk::new(CliffConfig {
            width: 2,
            height: 2,
            start: (0, 0),
            goal: (1, 1),
            cliff: None,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(tiny.enumerate_states(), vec![(0, 0), (0, 1), (1, 0)]);
    }

    #[test]
    fn invalid_layouts_rejected() {
        assert!(CliffWalk::new(CliffConfig { goal: (0, 0), ..Default::default() }).is_err());
        assert!(CliffWalk::new(CliffConfig { cliff: Some(vec![(0, 0)]), ..Default::default() })
            .is_err());
        assert!(CliffWalk::new(CliffConfig { r_cliff: 1.0, ..Default::default() }).is_err());
    }

    #[test]
    fn every_transition_routes_rewards_by_sign() {
        let w = classic();
        for p in w.enumerate_states() {
            for a in ActionId::ALL {
                let (to, r, absorbing) = w.transition(p, a);
                assert!(r.r_env <= 0.0 && r.r_task >= 0.0);
                assert_eq!(r.r_env == -1.0, absorbing && w.is_cliff(to));
                assert_eq!(w.transition(p, a), (to, r, absorbing));
            }
        }
    }

    #[test]
    fn render_layout() {
        let w = classic();
        let text = w.render(&w.reset());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3], "A##########G");
        assert_eq!(lines[0], "............");
    }
}

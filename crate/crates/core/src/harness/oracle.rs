//! Checks of tabular learning against exact dynamic programming on the
//! cliff walk.

use std::time::Instant;

use serde::Serialize;

use super::config::{EnvConfig, ExperimentConfig};
use crate::dp::{value_iteration, EnumerableMdp, DEFAULT_TOL};
use crate::env::{CliffWalk, Encoding, Environment, Obs, TaskSpec};
use crate::error::{Error, Result};
use crate::exploration::{select_action, ExplorationSchedule, PolicyKind, ValueView};
use crate::mdp::{ActionId, Transition};
use crate::qcore::{max_value, AlphaSchedule, DecomposedQ, QFunction, QTable, UpdateMode};
use crate::rng::{RngStream, Substream};

const TASK: TaskSpec = TaskSpec { desired_type: 0 };

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub episodes: usize,
    /// Non-terminal states with at least `min_visits` visits.
    pub states_checked: usize,
    pub max_abs_error: f64,
    pub start_value: f64,
    pub start_value_exact: f64,
    pub passed: bool,
    pub elapsed_ms: u64,
}

fn cliff_of(cfg: &ExperimentConfig) -> Result<CliffWalk> {
    match &cfg.env {
        EnvConfig::Cliffwalk(c) => CliffWalk::new(c.clone()),
        EnvConfig::Gridworld(_) => Err(Error::Config("oracle checks need the cliffwalk environment".into())),
    }
}

/// Online epsilon-greedy Q-learning on the cliff walk (one update per step,
/// no replay), compared with value iteration.
pub fn tabular_oracle_check(cfg: &ExperimentConfig) -> Result<OracleReport> {
    let started = Instant::now();
    let world = cliff_of(cfg)?;
    let oc = &cfg.oracle;
    let (mdp, positions) = EnumerableMdp::from_cliff(&world, cfg.gamma)?;
    let exact = value_iteration(&mdp, DEFAULT_TOL)?;

    let enc = Encoding::Tabular { window: 0 };
    let mut q = QFunction::Table(QTable::new(world.obs_dim(enc)?, oc.alpha, cfg.gamma)?);
    let budget = (oc.episodes * world.max_steps()) as f64;
    let policy = PolicyKind::EpsGreedy(ExplorationSchedule::new(
        oc.exploration.epsilon_start,
        oc.exploration.epsilon_final,
        (oc.exploration.anneal_fraction * budget).round() as u64,
    )?);
    let mut rng = RngStream::new(oc.seed).derive(Substream::Exploration);
    let mut t = 0;
    for _ in 0..oc.episodes {
        let mut state = Environment::reset(&world, &mut rng)?;
        loop {
            let obs = world.encode(&state, enc)?;
            let sel = select_action(&policy, ValueView::Monolithic(&q), &obs, t, &mut rng)?;
            let out = Environment::step(&world, &state, sel.action, TASK, &mut rng)?;
            let next = world.encode(&out.state, enc)?;
            let terminal = if cfg.bootstrap_on_timeout { out.absorbing() } else { out.done };
            q.minibatch_update(&[Transition { state: obs, action: sel.action, reward: out.reward, next_state: next, terminal }])?;
            t += 1;
            if out.done {
                break;
            }
            state = out.state;
        }
    }

    let QFunction::Table(table) = &q else { unreachable!("built as a table") };
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (i, &p) in positions.iter().enumerate() {
        let s = world.position_index(p);
        if table.state_visits(s) < oc.min_visits {
            continue;
        }
        checked += 1;
        for a in 0..ActionId::ALL.len() {
            worst = worst.max((table.get(s, a) - exact[i][a]).abs());
        }
    }
    let start = world.config().start;
    let start_i = positions.binary_search(&start).expect("start is not terminal");
    let start_value = max_value(&table.row(world.position_index(start)));
    let start_value_exact = max_value(&exact[start_i]);
    let passed = checked > 0
        && worst <= oc.tolerance
        && (start_value - start_value_exact).abs() <= oc.start_tolerance;
    Ok(OracleReport {
        episodes: oc.episodes,
        states_checked: checked,
        max_abs_error: worst,
        start_value,
        start_value_exact,
        passed,
        elapsed_ms: started.elapsed().as_millis() as u64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub transitions: usize,
    pub max_abs_diff: f64,
    pub elapsed_ms: u64,
}

/// Feed one uniformly random cliff-walk transition stream to a monolithic
/// table and to a joint-greedy decomposed pair, and report the largest
/// difference between `Q` and `Q_env + Q_task`.
pub fn equivalence_check(
    world: &CliffWalk,
    gamma: f64,
    alpha: AlphaSchedule,
    transitions: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    let started = Instant::now();
    let enc = Encoding::Tabular { window: 0 };
    let n = world.obs_dim(enc)?;
    let mut mono = QTable::new(n, alpha, gamma)?;
    let mut dec = DecomposedQ::new(
        QFunction::Table(QTable::new(n, alpha, gamma)?),
        QFunction::Table(QTable::new(n, alpha, gamma)?),
        UpdateMode::JointGreedy,
    )?;
    let mut rng = RngStream::new(seed).derive(Substream::Exploration);
    let mut state = Environment::reset(world, &mut rng)?;
    for _ in 0..transitions {
        let action = ActionId::from_index(rand::Rng::gen_range(&mut rng, 0..4))?;
        let out = Environment::step(world, &state, action, TASK, &mut rng)?;
        let t = Transition {
            state: world.encode(&state, enc)?,
            action,
            reward: out.reward,
            next_state: world.encode(&out.state, enc)?,
            terminal: out.absorbing(),
        };
        mono.td_update(&t)?;
        dec.decomposed_update(&t)?;
        state = if out.done { Environment::reset(world, &mut rng)? } else { out.state };
    }
    let mut worst: f64 = 0.0;
    for s in 0..n {
        let obs = Obs::Index(s as u64);
        let sum = dec.combine(&obs)?;
        let m = mono.q_values(&obs)?;
        for a in 0..4 {
            worst = worst.max((sum[a] - m[a]).abs());
        }
    }
    Ok(EquivalenceReport { transitions, max_abs_diff: worst, elapsed_ms: started.elapsed().as_millis() as u64 })
}

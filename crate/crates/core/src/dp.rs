//! Exact value iteration on small deterministic MDPs. Ground truth for the
//! learners' convergence and decomposition tests.

use crate::env::{CliffWalk, Pos};
use crate::error::{Error, Result};
use crate::mdp::{ActionId, DecomposedReward, NUM_ACTIONS};
use crate::qcore::{argmax, max_value, QValues};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100_000;

/// Outcome of taking an action: `next = None` means the episode ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub next: Option<usize>,
    pub reward: DecomposedReward,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnumerableMdp {
    edges: Vec<[Edge; NUM_ACTIONS]>,
    gamma: f64,
}

impl EnumerableMdp {
    pub fn new(edges: Vec<[Edge; NUM_ACTIONS]>, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1] (got {gamma})")));
        }
        let n = edges.len();
        for (s, row) in edges.iter().enumerate() {
            if let Some(bad) = row.iter().filter_map(|e| e.next).find(|&t| t >= n) {
                return Err(Error::Config(format!("state {s} points at unknown state {bad}")));
            }
        }
        Ok(Self { edges, gamma })
    }

    /// The cliff walk over its non-terminal positions, in
    /// [`CliffWalk::enumerate_states`] order.
    pub fn from_cliff(world: &CliffWalk, gamma: f64) -> Result<(Self, Vec<Pos>)> {
        let states = world.enumerate_states();
        let index_of = |p: Pos| states.binary_search(&p).ok();
        let edges = states
            .iter()
            .map(|&p| {
                ActionId::ALL.map(|a| {
                    let (to, reward, absorbing) = world.transition(p, a);
                    Edge { next: if absorbing { None } else { index_of(to) }, reward }
                })
            })
            .collect();
        Ok((Self::new(edges, gamma)?, states))
    }

    pub fn n_states(&self) -> usize {
        self.edges.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn edge(&self, s: usize, a: usize) -> Edge {
        self.edges[s][a]
    }
}

/// Largest violation of `Q(s,a) = r + gamma * max_a' Q(s',a')`.
pub fn bellman_residual(mdp: &EnumerableMdp, q: &[QValues]) -> f64 {
    let mut worst: f64 = 0.0;
    for s in 0..mdp.n_states() {
        for a in 0..NUM_ACTIONS {
            let e = mdp.edge(s, a);
            let boot = e.next.map_or(0.0, |t| mdp.gamma * max_value(&q[t]));
            worst = worst.max((q[s][a] - (e.reward.total() + boot)).abs());
        }
    }
    worst
}

/// Synchronous value iteration from zero until the largest change is below
/// `tol`.
pub fn value_iteration(mdp: &EnumerableMdp, tol: f64) -> Result<Vec<QValues>> {
    let mut q = vec![[0.0; NUM_ACTIONS]; mdp.n_states()];
    for _ in 0..MAX_ITERATIONS {
        let mut next = q.clone();
        let mut delta: f64 = 0.0;
        for (s, row) in next.iter_mut().enumerate() {
            for (a, v) in row.iter_mut().enumerate() {
                let e = mdp.edge(s, a);
                let boot = e.next.map_or(0.0, |t| mdp.gamma * max_value(&q[t]));
                *v = e.reward.total() + boot;
                delta = delta.max((*v - q[s][a]).abs());
            }
        }
        q = next;
        if delta < tol {
            return Ok(q);
        }
    }
    Err(Error::Numerical(format!("value iteration did not reach tol {tol} in {MAX_ITERATIONS} sweeps")))
}

/// Value iteration on the two reward components separately. Each sweep picks
/// `a* = argmax_a' (Q_env + Q_task)(s', a')` (lowest index on ties) and backs
/// each component up with its own reward at `a*`, so the sum tracks
/// [`value_iteration`].
pub fn decomposed_value_iteration(mdp: &EnumerableMdp, tol: f64) -> Result<(Vec<QValues>, Vec<QValues>)> {
    let n = mdp.n_states();
    let mut env = vec![[0.0; NUM_ACTIONS]; n];
    let mut task = vec![[0.0; NUM_ACTIONS]; n];
    for _ in 0..MAX_ITERATIONS {
        let greedy: Vec<usize> = (0..n)
            .map(|s| {
                let sum: QValues = std::array::from_fn(|a| env[s][a] + task[s][a]);
                argmax(&sum)
            })
            .collect();
        let mut next_env = env.clone();
        let mut next_task = task.clone();
        let mut delta: f64 = 0.0;
        for s in 0..n {
            for a in 0..NUM_ACTIONS {
                let e = mdp.edge(s, a);
                let (be, bt) = e
                    .next
                    .map_or((0.0, 0.0), |t| (mdp.gamma * env[t][greedy[t]], mdp.gamma * task[t][greedy[t]]));
                next_env[s][a] = e.reward.r_env + be;
                next_task[s][a] = e.reward.r_task + bt;
                delta = delta.max((next_env[s][a] - env[s][a]).abs());
                delta = delta.max((next_task[s][a] - task[s][a]).abs());
            }
        }
        env = next_env;
        task = next_task;
        if delta < tol {
            return Ok((env, task));
        }
    }
    Err(Error::Numerical(format!(
        "decomposed value iteration did not reach tol {tol} in {MAX_ITERATIONS} sweeps"
    )))
}

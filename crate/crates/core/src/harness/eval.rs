//! Learning-free evaluation: mean max-Q over a frozen state set, and greedy
//! rollouts for return, length and crash rate.

use serde::Serialize;
use sha1::{Digest, Sha1};

use crate::env::{Encoding, Environment, TaskSpec};
use crate::error::{Error, Result};
use crate::exploration::{select_action, ExplorationSchedule, PolicyKind, ValueView};
use crate::qcore::{hex, max_value, DecomposedQ, QFunction};
use crate::rng::{RngStream, Substream};

/// A learner under evaluation or training.
#[derive(Clone, Debug)]
pub enum Agent {
    Monolithic(QFunction),
    Decomposed(DecomposedQ),
}

impl Agent {
    pub fn view(&self) -> ValueView<'_> {
        match self {
            Agent::Monolithic(q) => ValueView::Monolithic(q),
            Agent::Decomposed(d) => ValueView::Decomposed(d),
        }
    }

    /// Greedy for monolithic agents; greedy within the safe set for
    /// decomposed ones.
    pub fn evaluation_policy(&self, tau: f64) -> PolicyKind {
        match self {
            Agent::Monolithic(_) => PolicyKind::Greedy,
            Agent::Decomposed(_) => PolicyKind::SafeEpsGreedy {
                schedule: ExplorationSchedule::constant(0.0).expect("0 is a valid epsilon"),
                tau,
            },
        }
    }
}

/// States sampled once per experiment from the reset distribution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedEvalSet<S> {
    pub states: Vec<S>,
}

impl<S: Serialize> FixedEvalSet<S> {
    pub fn generate<E: Environment<State = S>>(env: &E, size: usize, seed: u64) -> Result<Self> {
        let mut rng = RngStream::new(seed).derive(Substream::EvalSet);
        let states = (0..size).map(|_| env.reset(&mut rng)).collect::<Result<Vec<_>>>()?;
        Ok(Self { states })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.states).expect("states serialise")
    }

    /// Git blob id of the JSON serialisation: `sha1("blob <len>\0" + json)`.
    pub fn content_hash(&self) -> String {
        git_blob_hash(self.to_json().as_bytes())
    }
}

pub fn git_blob_hash(content: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex(&h.finalize())
}

/// Mean over the set of `max_a Q(s, a)`, using the combined value for
/// decomposed agents.
pub fn eval_fixed_states<E: Environment>(
    agent: &Agent,
    env: &E,
    encoding: Encoding,
    set: &FixedEvalSet<E::State>,
) -> Result<f64> {
    if set.states.is_empty() {
        return Err(Error::Usage("empty evaluation set".into()));
    }
    let view = agent.view();
    let mut total = 0.0;
    for s in &set.states {
        let (q, _) = view.evaluate(&env.encode(s, encoding)?)?;
        total += max_value(&q);
    }
    Ok(total / set.states.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolicyEval {
    pub mean_return: f64,
    pub mean_length: f64,
    pub crash_rate: f64,
}

/// Roll out `policy` for `n_episodes` without learning. Returns are raw
/// episode sums unless `discount` is given.
#[allow(clippy::too_many_arguments)]
pub fn rollout<E: Environment>(
    policy: &PolicyKind,
    values: ValueView,
    env: &E,
    encoding: Encoding,
    task: TaskSpec,
    n_episodes: usize,
    discount: Option<f64>,
    rng: &mut RngStream,
) -> Result<PolicyEval> {
    if n_episodes == 0 {
        return Err(Error::Usage("n_episodes must be positive".into()));
    }
    let (mut ret, mut len, mut crashes) = (0.0, 0usize, 0usize);
    for _ in 0..n_episodes {
        let mut state = env.reset(rng)?;
        let mut g = 1.0;
        loop {
            let obs = env.encode(&state, encoding)?;
            let sel = select_action(policy, values, &obs, 0, rng)?;
            let out = env.step(&state, sel.action, task, rng)?;
            ret += g * out.reward.total();
            if let Some(d) = discount {
                g *= d;
            }
            len += 1;
            if out.done {
                crashes += usize::from(out.crashed);
                break;
            }
            state = out.state;
        }
    }
    let n = n_episodes as f64;
    Ok(PolicyEval { mean_return: ret / n, mean_length: len as f64 / n, crash_rate: crashes as f64 / n })
}

/// Greedy (safe-greedy for decomposed agents) rollouts.
#[allow(clippy::too_many_arguments)]
pub fn eval_policy<E: Environment>(
    agent: &Agent,
    tau: f64,
    env: &E,
    encoding: Encoding,
    task: TaskSpec,
    n_episodes: usize,
    discount: Option<f64>,
    rng: &mut RngStream,
) -> Result<PolicyEval> {
    rollout(&agent.evaluation_policy(tau), agent.view(), env, encoding, task, n_episodes, discount, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{GridConfig, GridWorld};
    use crate::qcore::{AlphaSchedule, QTable, UpdateMode};

    fn table(n: usize) -> QFunction {
        QFunction::Table(QTable::new(n, AlphaSchedule::default(), 0.95).unwrap())
    }

    fn grid(cfg: GridConfig) -> GridWorld {
        GridWorld::new(cfg).unwrap()
    }

    const ENC: Encoding = Encoding::Tabular { window: 3 };

    #[test]
    fn fresh_agent_scores_zero() {
        let env = grid(GridConfig::default());
        let set = FixedEvalSet::generate(&env, 20, 0).unwrap();
        let agent = Agent::Monolithic(table(65_536));
        assert_eq!(eval_fixed_states(&agent, &env, ENC, &set).unwrap(), 0.0);
    }

    #[test]
    fn decomposed_uses_combined_maximum() {
        let env = grid(GridConfig::default());
        let set = FixedEvalSet::generate(&env, 1, 3).unwrap();
        let idx = env.encode_local(&set.states[0], 3).unwrap() as usize;
        let mut d = DecomposedQ::new(table(65_536), table(65_536), UpdateMode::IndependentMax).unwrap();
        if let (QFunction::Table(e), QFunction::Table(t)) = (&mut d.env, &mut d.task) {
            e.set(idx, 0, -1.0);
            t.set(idx, 0, 0.8);
            t.set(idx, 1, 0.5);
        }
        // Components peak at 0 (survival) and 0.8 (task); the sum peaks at 0.5.
        let v = eval_fixed_states(&Agent::Decomposed(d), &env, ENC, &set).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn singleton_set_is_that_states_max() {
        let env = grid(GridConfig::default());
        let set = FixedEvalSet::generate(&env, 1, 9).unwrap();
        let idx = env.encode_local(&set.states[0], 3).unwrap() as usize;
        let mut q = QTable::new(65_536, AlphaSchedule::default(), 0.95).unwrap();
        q.set(idx, 2, 0.25);
        q.set(idx, 3, -2.0);
        let v = eval_fixed_states(&Agent::Monolithic(QFunction::Table(q)), &env, ENC, &set).unwrap();
        assert_eq!(v, 0.25);
    }

    #[test]
    fn eval_set_is_reproducible_and_hashed() {
        let env = grid(GridConfig::default());
        let a = FixedEvalSet::generate(&env, 10, 5).unwrap();
        let b = FixedEvalSet::generate(&env, 10, 5).unwrap();
        let c = FixedEvalSet::generate(&env, 10, 6).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), c.content_hash());
        assert_eq!(a.content_hash().len(), 40);
    }

    #[test]
    fn git_blob_hash_matches_git() {
        // `printf 'hello\n' | git hash-object --stdin`
        assert_eq!(git_blob_hash(b"hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
    }

    #[test]
    fn obstacle_free_world_never_crashes() {
        let env = grid(GridConfig { p_obstacle: 0.0, ..Default::default() });
        let agent = Agent::Monolithic(table(65_536));
        let mut rng = RngStream::new(1).derive(Substream::Evaluation);
        let r = eval_policy(&agent, -0.5, &env, ENC, TaskSpec::new(0), 20, None, &mut rng).unwrap();
        assert_eq!(r.crash_rate, 0.0);
        assert!(r.mean_length <= 50.0);
    }

    #[test]
    fn hemmed_in_random_agent_crashes() {
        // 3x3 world that is almost all obstacles: a uniformly random walker
        // finds one almost immediately.
        let env = grid(GridConfig { width: 3, height: 3, p_obstacle: 0.9, p_collectible: 0.0, ..Default::default() });
        let random = PolicyKind::EpsGreedy(ExplorationSchedule::constant(1.0).unwrap());
        let agent = Agent::Monolithic(table(65_536));
        let mut rng = RngStream::new(2).derive(Substream::Evaluation);
        let r = rollout(&random, agent.view(), &env, ENC, TaskSpec::new(0), 200, None, &mut rng).unwrap();
        assert!(r.crash_rate > 0.95, "{}", r.crash_rate);
        assert!(r.mean_length <= 50.0);
    }
}

//! Behaviour policies: annealed epsilon-greedy, pure greedy, and
//! epsilon-greedy restricted to the actions the survival function deems safe.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Obs;
use crate::error::{Error, Result};
use crate::mdp::{ActionId, NUM_ACTIONS};
use crate::qcore::{argmax, DecomposedQ, QFunction, QValues};
use crate::rng::RngStream;

/// Linear annealing from `epsilon_start` to `epsilon_final` over
/// `anneal_steps` environment steps, constant afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationSchedule {
    pub epsilon_start: f64,
    pub epsilon_final: f64,
    pub anneal_steps: u64,
}

impl ExplorationSchedule {
    pub fn new(epsilon_start: f64, epsilon_final: f64, anneal_steps: u64) -> Result<Self> {
        if !(0.0 <= epsilon_final && epsilon_final <= epsilon_start && epsilon_start <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 <= epsilon_final <= epsilon_start <= 1 (got {epsilon_final}, {epsilon_start})"
            )));
        }
        Ok(Self { epsilon_start, epsilon_final, anneal_steps })
    }

    pub fn constant(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, epsilon, 0)
    }

    pub fn epsilon_at(&self, t: u64) -> f64 {
        if t >= self.anneal_steps {
            return self.epsilon_final;
        }
        let frac = t as f64 / self.anneal_steps as f64;
        self.epsilon_start + (self.epsilon_final - self.epsilon_start) * frac
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PolicyKind {
    EpsGreedy(ExplorationSchedule),
    Greedy,
    SafeEpsGreedy { schedule: ExplorationSchedule, tau: f64 },
}

impl PolicyKind {
    pub fn epsilon_at(&self, t: u64) -> f64 {
        match self {
            PolicyKind::EpsGreedy(s) | PolicyKind::SafeEpsGreedy { schedule: s, .. } => s.epsilon_at(t),
            PolicyKind::Greedy => 0.0,
        }
    }
}

/// A subset of the four actions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ActionSet(u8);

impl ActionSet {
    pub const FULL: ActionSet = ActionSet(0b1111);

    pub fn from_actions(actions: &[ActionId]) -> Self {
        ActionSet(actions.iter().fold(0, |m, a| m | (1 << a.index())))
    }

    pub fn contains(&self, a: ActionId) -> bool {
        self.0 & (1 << a.index()) != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = ActionId> + '_ {
        ActionId::ALL.into_iter().filter(|a| self.contains(*a))
    }

    /// Bit mask, bit `i` set for action index `i`.
    pub fn bits(&self) -> u8 {
        self.0
    }
}

/// `{a : Q_env(s, a) >= tau}`, or the single survival-greedy action when no
/// action clears the threshold. Never empty.
pub fn safe_action_set(q_env: &QValues, tau: f64) -> ActionSet {
    let mask = (0..NUM_ACTIONS).filter(|&a| q_env[a] >= tau).fold(0u8, |m, a| m | (1 << a));
    if mask == 0 {
        ActionSet(1 << argmax(q_env))
    } else {
        ActionSet(mask)
    }
}

/// Greedy action restricted to `allowed`, lowest index on ties.
pub fn argmax_within(q: &QValues, allowed: ActionSet) -> ActionId {
    let mut best: Option<ActionId> = None;
    for a in allowed.iter() {
        if best.is_none_or(|b| q[a.index()] > q[b.index()]) {
            best = Some(a);
        }
    }
    best.expect("action sets passed here are never empty")
}

/// What the policy chose and whether it was a random exploratory draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Selection {
    pub action: ActionId,
    pub exploratory: bool,
    /// The action set the choice was restricted to.
    pub allowed: ActionSet,
}

/// Select from precomputed values. `combined` is the greedy criterion
/// (monolithic Q or `Q_env + Q_task`); `survival` is required by the safe
/// policy. Exactly one uniform draw decides exploration, plus one more
/// when exploring.
pub fn select_from_values(
    policy: &PolicyKind,
    combined: &QValues,
    survival: Option<&QValues>,
    t: u64,
    rng: &mut RngStream,
) -> Result<Selection> {
    let allowed = match policy {
        PolicyKind::SafeEpsGreedy { tau, .. } => {
            let q_env = survival.ok_or_else(|| {
                Error::Usage("safe exploration needs a survival function".into())
            })?;
            safe_action_set(q_env, *tau)
        }
        _ => ActionSet::FULL,
    };
    let epsilon = policy.epsilon_at(t);
    let u: f64 = rng.gen();
    if u < epsilon {
        let options: Vec<ActionId> = allowed.iter().collect();
        let action = options[rng.gen_range(0..options.len())];
        return Ok(Selection { action, exploratory: true, allowed });
    }
    Ok(Selection { action: argmax_within(combined, allowed), exploratory: false, allowed })
}

/// The value source a policy acts on.
#[derive(Clone, Copy, Debug)]
pub enum ValueView<'a> {
    Monolithic(&'a QFunction),
    Decomposed(&'a DecomposedQ),
}

impl ValueView<'_> {
    /// (greedy criterion, survival values when available)
    pub fn evaluate(&self, obs: &Obs) -> Result<(QValues, Option<QValues>)> {
        match self {
            ValueView::Monolithic(q) => Ok((q.q_values(obs)?, None)),
            ValueView::Decomposed(d) => Ok((d.combine(obs)?, Some(d.env.q_values(obs)?))),
        }
    }
}

pub fn select_action(
    policy: &PolicyKind,
    values: ValueView,
    obs: &Obs,
    t: u64,
    rng: &mut RngStream,
) -> Result<Selection> {
    let (combined, survival) = values.evaluate(obs)?;
    select_from_values(policy, &combined, survival.as_ref(), t, rng)
}

//! Fixed-capacity experience replay and the ways a fresh buffer can be
//! filled before training on a new task.

use rand::seq::index;
use rand::Rng;

use crate::env::{Encoding, Environment, Obs, TaskSpec};
use crate::error::{Error, Result};
use crate::exploration::ValueView;
use crate::mdp::{ActionId, Transition};
use crate::qcore::{argmax, QFunction};
use crate::rng::RngStream;

pub const DEFAULT_CAPACITY: usize = 10_000;

/// FIFO ring buffer: once full, each push evicts the oldest transition.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayBuffer<S = Obs> {
    items: Vec<Transition<S>>,
    capacity: usize,
    /// Slot the next push writes to once the buffer is full.
    head: usize,
    inserted: u64,
    with_replacement: bool,
}

impl<S: Clone> ReplayBuffer<S> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self { items: Vec::new(), capacity, head: 0, inserted: 0, with_replacement: true })
    }

    /// Sample without replacement instead (batch size capped at `len`).
    pub fn without_replacement(mut self) -> Self {
        self.with_replacement = false;
        self
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total pushes ever made, including evicted ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition<S>) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
        self.inserted += 1;
    }

    /// Contents from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition<S>> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer.iter())
    }

    /// `n` transitions drawn uniformly from the current contents.
    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Result<Vec<Transition<S>>> {
        if self.items.is_empty() {
            return Err(Error::Usage("cannot sample from an empty replay buffer".into()));
        }
        if self.with_replacement {
            Ok((0..n).map(|_| self.items[rng.gen_range(0..self.items.len())].clone()).collect())
        } else {
            let k = n.min(self.items.len());
            Ok(index::sample(rng, self.items.len(), k).into_iter().map(|i| self.items[i].clone()).collect())
        }
    }
}

impl ReplayBuffer<Obs> {
    /// Fraction of stored transitions that ended in a crash (negative
    /// environment reward on an absorbing step).
    pub fn crash_fraction(&self) -> f64 {
        if self.items.is_empty() {
            return 0.0;
        }
        self.items.iter().filter(|t| is_crash(t)).count() as f64 / self.items.len() as f64
    }
}

pub fn is_crash<S>(t: &Transition<S>) -> bool {
    t.terminal && t.reward.r_env < 0.0
}

/// Behaviour used to fill a buffer before phase-2 training. Referenced
/// value functions are only read.
#[derive(Clone, Copy, Debug)]
pub enum SeedingStrategy<'a> {
    /// Uniform random actions.
    RandomPolicy,
    /// Greedy over the frozen phase-1 agent.
    SourceTaskPolicy(ValueView<'a>),
    /// Greedy over the frozen survival function.
    SurvivalPolicy(&'a QFunction),
}

impl SeedingStrategy<'_> {
    fn act(&self, obs: &Obs, rng: &mut RngStream) -> Result<ActionId> {
        match self {
            SeedingStrategy::RandomPolicy => ActionId::from_index(rng.gen_range(0..4)),
            SeedingStrategy::SourceTaskPolicy(view) => {
                let (q, _) = view.evaluate(obs)?;
                ActionId::from_index(argmax(&q))
            }
            SeedingStrategy::SurvivalPolicy(q_env) => ActionId::from_index(argmax(&q_env.q_values(obs)?)),
        }
    }
}

/// Run episodes under `strategy`, labelling rewards with `task`, until `n`
/// transitions have been collected into a buffer of `capacity`.
pub fn seed_buffer<E: Environment>(
    strategy: SeedingStrategy,
    env: &E,
    encoding: Encoding,
    task: TaskSpec,
    n: usize,
    capacity: usize,
    rng: &mut RngStream,
) -> Result<ReplayBuffer<Obs>> {
    if n > capacity {
        return Err(Error::Config(format!("cannot seed {n} transitions into capacity {capacity}")));
    }
    let mut buf = ReplayBuffer::new(capacity)?;
    while buf.len() < n {
        let mut state = env.reset(rng)?;
        let mut obs = env.encode(&state, encoding)?;
        loop {
            let action = strategy.act(&obs, rng)?;
            let out = env.step(&state, action, task, rng)?;
            let next_obs = env.encode(&out.state, encoding)?;
            buf.push(Transition {
                state: obs,
                action,
                reward: out.reward,
                next_state: next_obs.clone(),
                terminal: out.absorbing(),
            });
            if out.done || buf.len() >= n {
                break;
            }
            state = out.state;
            obs = next_obs;
        }
    }
    Ok(buf)
}

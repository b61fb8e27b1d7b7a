//! Phase-1 and phase-2 training loops.

use std::time::Instant;

use crate::env::{Encoding, Environment, Obs, TaskSpec};
use crate::error::{Error, Result};
use crate::exploration::{select_action, ActionSet, ExplorationSchedule, PolicyKind};
use crate::mdp::{ActionId, Transition};
use crate::qcore::{DecomposedQ, MlpApproximator, QFunction, QTable};
use crate::replay::{seed_buffer, ReplayBuffer, SeedingStrategy};
use crate::rng::{RngStream, Substream};

use super::config::{ExperimentConfig, LearnerConfig, Lineage, Method};
use super::eval::{eval_fixed_states, eval_policy, Agent, FixedEvalSet};
use super::metrics::MetricsRow;

pub const PHASE1_TASK: TaskSpec = TaskSpec { desired_type: 0 };
pub const PHASE2_TASK: TaskSpec = TaskSpec { desired_type: 1 };

const PHASE1_STREAM: u64 = 1;
const PHASE2_STREAM: u64 = 2;

impl Agent {
    fn learn(&mut self, batch: &[Transition<Obs>]) -> Result<()> {
        match self {
            Agent::Monolithic(q) => q.minibatch_update(batch).map(|_| ()),
            Agent::Decomposed(d) => d.minibatch_update(batch).map(|_| ()),
        }
    }
}

/// Summary of one training episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeStats {
    pub total_return: f64,
    pub length: usize,
    pub crashed: bool,
}

/// One behaviour-policy decision, for auditing safe exploration.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionRecord {
    pub episode: usize,
    pub obs: Obs,
    pub action: ActionId,
    pub exploratory: bool,
    pub allowed: ActionSet,
}

/// Everything phase 2 needs from phase 1.
#[derive(Clone, Debug)]
pub struct Phase1Artifacts<S> {
    pub lineage: Lineage,
    pub seed: u64,
    pub agent: Agent,
    pub replay: ReplayBuffer<Obs>,
    pub eval_set: FixedEvalSet<S>,
    pub training: Vec<EpisodeStats>,
    pub rows: Vec<MetricsRow>,
}

#[derive(Clone, Debug)]
pub struct Phase2Result {
    pub method: Method,
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    pub agent: Agent,
    /// The buffer as generated by the method's seeding strategy.
    pub seeded_replay: ReplayBuffer<Obs>,
    pub training: Vec<EpisodeStats>,
    pub actions: Vec<ActionRecord>,
    /// Survival-function hashes before and after phase 2 (decoupled only).
    pub survival_hashes: Option<(String, String)>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep every behaviour decision of phase 2.
    pub record_actions: bool,
}

fn fresh_function(cfg: &ExperimentConfig, obs_dim: usize, rng: &mut RngStream) -> Result<QFunction> {
    Ok(match &cfg.learner {
        LearnerConfig::Tabular { alpha, .. } => QFunction::Table(QTable::new(obs_dim, *alpha, cfg.gamma)?),
        LearnerConfig::Mlp { hidden, adam } => {
            let mut m = MlpApproximator::new(obs_dim, hidden, *adam, cfg.gamma)?;
            m.xavier_init(rng);
            QFunction::Mlp(m)
        }
    })
}

fn schedule(cfg: &ExperimentConfig, episodes: usize, horizon: usize) -> Result<ExplorationSchedule> {
    let budget = (episodes * horizon) as f64;
    ExplorationSchedule::new(
        cfg.exploration.epsilon_start,
        cfg.exploration.epsilon_final,
        (cfg.exploration.anneal_fraction * budget).round() as u64,
    )
}

fn new_replay(cfg: &ExperimentConfig) -> Result<ReplayBuffer<Obs>> {
    let b = ReplayBuffer::new(cfg.replay.capacity)?;
    Ok(if cfg.replay.with_replacement { b } else { b.without_replacement() })
}

/// Shared episode loop for both phases.
struct Trainer<'a, E: Environment> {
    cfg: &'a ExperimentConfig,
    env: &'a E,
    encoding: Encoding,
    task: TaskSpec,
    policy: PolicyKind,
    eval_set: &'a FixedEvalSet<E::State>,
    label: String,
    seed: u64,
    phase: u8,
    root: RngStream,
}

impl<E: Environment> Trainer<'_, E> {
    fn evaluate(&self, agent: &Agent, episode: usize, eval_index: u64, epsilon: f64, started: Instant) -> Result<MetricsRow> {
        // Every method sees the same evaluation episodes at a given point.
        let mut rng = self.root.derive(Substream::Evaluation).fork(eval_index);
        let discount = self.cfg.discounted_return.then_some(self.cfg.gamma);
        let pe = eval_policy(
            agent,
            self.cfg.tau,
            self.env,
            self.encoding,
            self.task,
            self.cfg.eval_episodes,
            discount,
            &mut rng,
        )?;
        Ok(MetricsRow {
            method: self.label.clone(),
            seed: self.seed,
            phase: self.phase,
            episode,
            mean_return: pe.mean_return,
            mean_length: pe.mean_length,
            crash_rate: pe.crash_rate,
            fixed_state_mean_q: eval_fixed_states(agent, self.env, self.encoding, self.eval_set)?,
            epsilon,
            wall_clock_ms: started.elapsed().as_millis() as u64,
        })
    }

    /// Train for `episodes`, evaluating at episode 0, every `eval_every`
    /// episodes, and at the end.
    fn train(
        &self,
        agent: &mut Agent,
        replay: &mut ReplayBuffer<Obs>,
        episodes: usize,
        stream: u64,
        mut actions: Option<&mut Vec<ActionRecord>>,
    ) -> Result<(Vec<MetricsRow>, Vec<EpisodeStats>)> {
        let base = self.root.fork(stream);
        let mut env_rng = base.derive(Substream::EnvSpawn);
        let mut explore_rng = base.derive(Substream::Exploration);
        let mut sample_rng = base.derive(Substream::ReplaySampling);
        let batch = self.cfg.learner.batch_size();
        let started = Instant::now();
        let mut rows = Vec::new();
        let mut stats = Vec::with_capacity(episodes);
        let mut t: u64 = 0;
        let mut eval_index = 0;

        for episode in 0..episodes {
            if episode % self.cfg.eval_every == 0 {
                rows.push(self.evaluate(agent, episode, eval_index, self.policy.epsilon_at(t), started)?);
                eval_index += 1;
            }
            let mut state = self.env.reset(&mut env_rng)?;
            let mut obs = self.env.encode(&state, self.encoding)?;
            let mut ep = EpisodeStats { total_return: 0.0, length: 0, crashed: false };
            loop {
                let sel = select_action(&self.policy, agent.view(), &obs, t, &mut explore_rng)?;
                if let Some(log) = actions.as_deref_mut() {
                    log.push(ActionRecord {
                        episode,
                        obs: obs.clone(),
                        action: sel.action,
                        exploratory: sel.exploratory,
                        allowed: sel.allowed,
                    });
                }
                let out = self.env.step(&state, sel.action, self.task, &mut env_rng)?;
                let next_obs = self.env.encode(&out.state, self.encoding)?;
                let terminal = if self.cfg.bootstrap_on_timeout { out.absorbing() } else { out.done };
                replay.push(Transition {
                    state: obs,
                    action: sel.action,
                    reward: out.reward,
                    next_state: next_obs.clone(),
                    terminal,
                });
                if replay.len() >= batch {
                    let b = replay.sample(batch, &mut sample_rng)?;
                    agent.learn(&b)?;
                }
                t += 1;
                ep.total_return += out.reward.total();
                ep.length += 1;
                if out.done {
                    ep.crashed = out.crashed;
                    break;
                }
                state = out.state;
                obs = next_obs;
            }
            stats.push(ep);
        }
        rows.push(self.evaluate(agent, episodes, eval_index, self.policy.epsilon_at(t), started)?);
        Ok((rows, stats))
    }
}

fn root_stream(seed: u64) -> RngStream {
    RngStream::new(seed)
}

/// Train on task 0. The monolithic lineage learns one function from the
/// total reward; the decomposed lineage learns survival and task functions
/// from their own reward components.
pub fn run_phase1<E: Environment>(
    cfg: &ExperimentConfig,
    env: &E,
    lineage: Lineage,
    seed: u64,
    eval_set: &FixedEvalSet<E::State>,
) -> Result<Phase1Artifacts<E::State>> {
    let encoding = cfg.learner.encoding();
    let obs_dim = env.obs_dim(encoding)?;
    let root = root_stream(seed);
    let mut init = root.fork(PHASE1_STREAM).derive(Substream::WeightInit);
    let mut agent = match lineage {
        Lineage::Monolithic => Agent::Monolithic(fresh_function(cfg, obs_dim, &mut init)?),
        Lineage::Decomposed => Agent::Decomposed(DecomposedQ::new(
            fresh_function(cfg, obs_dim, &mut init)?,
            fresh_function(cfg, obs_dim, &mut init)?,
            cfg.update_mode,
        )?),
    };
    let mut replay = new_replay(cfg)?;
    let trainer = Trainer {
        cfg,
        env,
        encoding,
        task: PHASE1_TASK,
        policy: PolicyKind::EpsGreedy(schedule(cfg, cfg.phase1_episodes, env.max_steps())?),
        eval_set,
        label: lineage.name().to_string(),
        seed,
        phase: 1,
        root,
    };
    let (rows, training) = trainer.train(&mut agent, &mut replay, cfg.phase1_episodes, PHASE1_STREAM, None)?;
    Ok(Phase1Artifacts { lineage, seed, agent, replay, eval_set: eval_set.clone(), training, rows })
}

/// Train on task 1 with one of the three methods:
///
/// - naive: fresh function, randomly seeded replay, annealed epsilon-greedy;
/// - transfer: phase-1 function copied, replay seeded by the phase-1
///   policy, purely greedy behaviour;
/// - decoupled: phase-1 survival function frozen, fresh task function,
///   replay seeded by the survival policy, epsilon-greedy over safe actions.
pub fn run_phase2<E: Environment>(
    cfg: &ExperimentConfig,
    env: &E,
    method: Method,
    artifacts: &Phase1Artifacts<E::State>,
    options: RunOptions,
) -> Result<Phase2Result> {
    if method.lineage() != artifacts.lineage {
        return Err(Error::Usage(format!(
            "method {} needs {} phase-1 artifacts, got {}",
            method.name(),
            method.lineage().name(),
            artifacts.lineage.name()
        )));
    }
    let encoding = cfg.learner.encoding();
    let obs_dim = env.obs_dim(encoding)?;
    let seed = artifacts.seed;
    let root = root_stream(seed);
    let phase_root = root.fork(PHASE2_STREAM);
    let mut init = phase_root.derive(Substream::WeightInit);
    let mut seeding_rng = phase_root.derive(Substream::ReplaySeeding);
    let sched = schedule(cfg, cfg.phase2_episodes, env.max_steps())?;
    let n_seed = cfg.seed_transitions();
    let capacity = cfg.replay.capacity;

    let (mut agent, seeded, policy) = match (method, &artifacts.agent) {
        (Method::Naive, Agent::Monolithic(_)) => {
            let q = fresh_function(cfg, obs_dim, &mut init)?;
            let buf = seed_buffer(SeedingStrategy::RandomPolicy, env, encoding, PHASE2_TASK, n_seed, capacity, &mut seeding_rng)?;
            (Agent::Monolithic(q), buf, PolicyKind::EpsGreedy(sched))
        }
        (Method::Transfer, Agent::Monolithic(q)) => {
            let buf = seed_buffer(
                SeedingStrategy::SourceTaskPolicy(artifacts.agent.view()),
                env,
                encoding,
                PHASE2_TASK,
                n_seed,
                capacity,
                &mut seeding_rng,
            )?;
            (Agent::Monolithic(q.clone()), buf, PolicyKind::Greedy)
        }
        (Method::Decoupled, Agent::Decomposed(d)) => {
            let buf = seed_buffer(SeedingStrategy::SurvivalPolicy(&d.env), env, encoding, PHASE2_TASK, n_seed, capacity, &mut seeding_rng)?;
            let mut fresh = DecomposedQ::new(d.env.clone(), fresh_function(cfg, obs_dim, &mut init)?, cfg.update_mode)?;
            fresh.freeze_env();
            (Agent::Decomposed(fresh), buf, PolicyKind::SafeEpsGreedy { schedule: sched, tau: cfg.tau })
        }
        _ => return Err(Error::Usage("artifact agent does not match the method's lineage".into())),
    };

    let before = match &agent {
        Agent::Decomposed(d) => Some(d.env.param_hash()),
        Agent::Monolithic(_) => None,
    };
    let mut replay = if cfg.replay.with_replacement { seeded.clone() } else { seeded.clone().without_replacement() };
    let trainer = Trainer {
        cfg,
        env,
        encoding,
        task: PHASE2_TASK,
        policy,
        eval_set: &artifacts.eval_set,
        label: method.name().to_string(),
        seed,
        phase: 2,
        root,
    };
    let mut actions = Vec::new();
    let (rows, training) = trainer.train(
        &mut agent,
        &mut replay,
        cfg.phase2_episodes,
        PHASE2_STREAM,
        options.record_actions.then_some(&mut actions),
    )?;
    let survival_hashes = match (&agent, before) {
        (Agent::Decomposed(d), Some(b)) => Some((b, d.env.param_hash())),
        _ => None,
    };
    Ok(Phase2Result { method, seed, rows, agent, seeded_replay: seeded, training, actions, survival_hashes })
}

//! Value-function machinery: tabular and MLP action-value functions, the
//! Q-learning update, and the survival/task decomposition
//! `Q(s, a) = Q_env(s, a) + Q_task(s, a)`.

pub mod adam;
pub mod mlp;
pub mod tabular;

use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use crate::env::Obs;
use crate::error::{Error, Result};
use crate::mdp::{Transition, NUM_ACTIONS};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use mlp::{xavier_bound, Example, Input, MlpApproximator};
pub use tabular::{argmax, max_value, AlphaSchedule, QTable};

pub type QValues = [f64; NUM_ACTIONS];

/// A tabular or network-backed action-value function.
#[derive(Clone, Debug)]
pub enum QFunction {
    Table(QTable),
    Mlp(MlpApproximator),
}

impl QFunction {
    pub fn q_values(&self, obs: &Obs) -> Result<QValues> {
        match self {
            QFunction::Table(t) => t.q_values(obs),
            QFunction::Mlp(m) => m.q_values(obs),
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            QFunction::Table(t) => t.gamma(),
            QFunction::Mlp(m) => m.gamma(),
        }
    }

    pub fn updates(&self) -> u64 {
        match self {
            QFunction::Table(t) => t.updates(),
            QFunction::Mlp(m) => m.updates(),
        }
    }

    /// Flat parameter view: table entries or network weights.
    pub fn params(&self) -> &[f64] {
        match self {
            QFunction::Table(t) => t.values(),
            QFunction::Mlp(m) => m.params(),
        }
    }

    /// SHA-1 over the bit patterns of every parameter. Equal hashes mean
    /// bit-identical functions.
    pub fn param_hash(&self) -> String {
        let mut h = Sha1::new();
        for p in self.params() {
            h.update(p.to_bits().to_le_bytes());
        }
        hex(&h.finalize())
    }

    fn same_shape(&self, other: &QFunction) -> bool {
        match (self, other) {
            (QFunction::Table(a), QFunction::Table(b)) => a.n_states() == b.n_states(),
            (QFunction::Mlp(a), QFunction::Mlp(b)) => a.input_dim() == b.input_dim(),
            _ => false,
        }
    }

    /// Q-learning on the total reward. Tables apply the batch one transition
    /// at a time; networks take one Adam step on the whole batch. Returns the
    /// mean squared TD error.
    pub fn minibatch_update(&mut self, batch: &[Transition<Obs>]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Usage("empty minibatch".into()));
        }
        match self {
            QFunction::Table(t) => {
                let mut sq = 0.0;
                for tr in batch {
                    let td = t.td_update(tr)?;
                    sq += td * td;
                }
                Ok(sq / batch.len() as f64)
            }
            QFunction::Mlp(m) => {
                let gamma = m.gamma();
                minibatch_update_mlp(m, batch, gamma)
            }
        }
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// One Adam step on `mean_b (r + gamma * max_a' Q(s', a') - Q(s, a))^2`,
/// where the bracketed target is computed before the step and treated as a
/// constant. No target network.
pub fn minibatch_update_mlp(f: &mut MlpApproximator, batch: &[Transition<Obs>], gamma: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Usage("empty minibatch".into()));
    }
    let mut targets = Vec::with_capacity(batch.len());
    for t in batch {
        let boot = if t.terminal { 0.0 } else { gamma * max_value(&f.q_values(&t.next_state)?) };
        targets.push(t.reward.total() + boot);
    }
    train_mlp(f, batch, &targets)
}

fn train_mlp(f: &mut MlpApproximator, batch: &[Transition<Obs>], targets: &[f64]) -> Result<f64> {
    let examples = batch
        .iter()
        .zip(targets)
        .map(|(t, y)| {
            Ok(Example { input: Input::from_obs(&t.state)?, action: t.action.index(), target: *y })
        })
        .collect::<Result<Vec<_>>>()?;
    f.train_on(&examples)
}

/// Which next-state action each component bootstraps on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateMode {
    /// Each component bootstraps on its own greedy action.
    #[default]
    IndependentMax,
    /// Both components bootstrap on the greedy action of their sum; this
    /// makes the sum follow monolithic Q-learning exactly.
    JointGreedy,
}

/// Survival function plus task function.
#[derive(Clone, Debug)]
pub struct DecomposedQ {
    pub env: QFunction,
    pub task: QFunction,
    pub mode: UpdateMode,
    env_frozen: bool,
}

impl DecomposedQ {
    pub fn new(env: QFunction, task: QFunction, mode: UpdateMode) -> Result<Self> {
        if !env.same_shape(&task) {
            return Err(Error::shape(
                "survival and task functions of the same kind and input",
                "mismatched functions",
            ));
        }
        if env.gamma() != task.gamma() {
            return Err(Error::Config(format!(
                "survival gamma {} differs from task gamma {}",
                env.gamma(),
                task.gamma()
            )));
        }
        Ok(Self { env, task, mode, env_frozen: false })
    }

    /// Stop updating the survival function.
    pub fn freeze_env(&mut self) {
        self.env_frozen = true;
    }

    pub fn is_env_frozen(&self) -> bool {
        self.env_frozen
    }

    pub fn gamma(&self) -> f64 {
        self.env.gamma()
    }

    /// `Q_env + Q_task`, elementwise.
    pub fn combine(&self, obs: &Obs) -> Result<QValues> {
        let e = self.env.q_values(obs)?;
        let t = self.task.q_values(obs)?;
        Ok([e[0] + t[0], e[1] + t[1], e[2] + t[2], e[3] + t[3]])
    }

    /// Per-component bootstrap values at `next`, already multiplied by gamma.
    fn bootstraps(&self, next: &Obs, terminal: bool) -> Result<(f64, f64)> {
        if terminal {
            return Ok((0.0, 0.0));
        }
        let g = self.gamma();
        let e = self.env.q_values(next)?;
        let t = self.task.q_values(next)?;
        Ok(match self.mode {
            UpdateMode::IndependentMax => (g * max_value(&e), g * max_value(&t)),
            UpdateMode::JointGreedy => {
                let sum = [e[0] + t[0], e[1] + t[1], e[2] + t[2], e[3] + t[3]];
                let a = argmax(&sum);
                (g * e[a], g * t[a])
            }
        })
    }

    /// Route `r_env` to the survival table and `r_task` to the task table.
    /// Tabular only. Returns the (survival, task) TD errors; the survival
    /// error is still reported when the survival side is frozen.
    pub fn decomposed_update(&mut self, t: &Transition<Obs>) -> Result<(f64, f64)> {
        let (be, bt) = self.bootstraps(&t.next_state, t.terminal)?;
        let (env, task) = match (&mut self.env, &mut self.task) {
            (QFunction::Table(e), QFunction::Table(k)) => (e, k),
            _ => return Err(Error::Usage("decomposed_update needs tabular components".into())),
        };
        let s = env.index_of(&t.state)?;
        let a = t.action.index();
        let td_env = if self.env_frozen {
            t.reward.r_env + be - env.get(s, a)
        } else {
            env.update_toward(s, a, t.reward.r_env + be)?
        };
        let td_task = task.update_toward(s, a, t.reward.r_task + bt)?;
        Ok((td_env, td_task))
    }

    /// Batch update. Tables: sequential [`decomposed_update`](Self::decomposed_update).
    /// Networks: targets for both components from the pre-step parameters,
    /// then one Adam step per (unfrozen) component. Returns mean squared
    /// TD errors per component.
    pub fn minibatch_update(&mut self, batch: &[Transition<Obs>]) -> Result<(f64, f64)> {
        if batch.is_empty() {
            return Err(Error::Usage("empty minibatch".into()));
        }
        let n = batch.len() as f64;
        if matches!(self.env, QFunction::Table(_)) {
            let (mut se, mut st) = (0.0, 0.0);
            for t in batch {
                let (e, k) = self.decomposed_update(t)?;
                se += e * e;
                st += k * k;
            }
            return Ok((se / n, st / n));
        }
        let mut env_targets = Vec::with_capacity(batch.len());
        let mut task_targets = Vec::with_capacity(batch.len());
        for t in batch {
            let (be, bt) = self.bootstraps(&t.next_state, t.terminal)?;
            env_targets.push(t.reward.r_env + be);
            task_targets.push(t.reward.r_task + bt);
        }
        let env_loss = match &mut self.env {
            QFunction::Mlp(m) if !self.env_frozen => train_mlp(m, batch, &env_targets)?,
            _ => {
                let mut sq = 0.0;
                for (t, y) in batch.iter().zip(&env_targets) {
                    let q = self.env.q_values(&t.state)?[t.action.index()];
                    sq += (y - q) * (y - q);
                }
                sq / n
            }
        };
        let task_loss = match &mut self.task {
            QFunction::Mlp(m) => train_mlp(m, batch, &task_targets)?,
            QFunction::Table(_) => unreachable!("component kinds checked at construction"),
        };
        Ok((env_loss, task_loss))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{ActionId, DecomposedReward};

    fn table() -> QFunction {
        QFunction::Table(QTable::new(3, AlphaSchedule::Constant { alpha: 0.5 }, 0.9).unwrap())
    }

    fn dq(mode: UpdateMode) -> DecomposedQ {
        DecomposedQ::new(table(), table(), mode).unwrap()
    }

    fn tr(r_env: f64, r_task: f64, terminal: bool) -> Transition<Obs> {
        Transition {
            state: Obs::Index(0),
            action: ActionId::Left,
            reward: DecomposedReward::new(r_env, r_task),
            next_state: Obs::Index(1),
            terminal,
        }
    }

    #[test]
    fn combine_adds_components() {
        let mut d = dq(UpdateMode::IndependentMax);
        assert_eq!(d.combine(&Obs::Index(0)).unwrap(), [0.0; 4]);
        if let (QFunction::Table(e), QFunction::Table(t)) = (&mut d.env, &mut d.task) {
            e.set(0, 0, -1.0);
            t.set(0, 1, 1.0);
        }
        assert_eq!(d.combine(&Obs::Index(0)).unwrap(), [-1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn combined_argmax_can_differ_from_components() {
        let mut d = dq(UpdateMode::IndependentMax);
        if let (QFunction::Table(e), QFunction::Table(t)) = (&mut d.env, &mut d.task) {
            e.set(0, 0, -1.0);
            t.set(0, 0, 0.5);
        }
        let c = d.combine(&Obs::Index(0)).unwrap();
        assert_eq!(argmax(&c), 1);
        assert_eq!(argmax(&d.task.q_values(&Obs::Index(0)).unwrap()), 0);
    }

    #[test]
    fn crash_reward_goes_to_survival_side() {
        let mut d = dq(UpdateMode::IndependentMax);
        let (te, tt) = d.decomposed_update(&tr(-1.0, 0.0, true)).unwrap();
        assert_eq!((te, tt), (-1.0, 0.0));
        assert_eq!(d.env.q_values(&Obs::Index(0)).unwrap()[2], -0.5);
        assert_eq!(d.task.q_values(&Obs::Index(0)).unwrap()[2], 0.0);
    }

    #[test]
    fn quiet_transition_on_zero_tables_is_noop() {
        for mode in [UpdateMode::IndependentMax, UpdateMode::JointGreedy] {
            let mut d = dq(mode);
            d.decomposed_update(&tr(0.0, 0.0, false)).unwrap();
            assert!(d.env.params().iter().all(|v| *v == 0.0));
            assert!(d.task.params().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn joint_greedy_bootstraps_at_sum_argmax() {
        let mut d = dq(UpdateMode::JointGreedy);
        if let (QFunction::Table(e), QFunction::Table(t)) = (&mut d.env, &mut d.task) {
            // Next state 1: env best at 0, task best at 1, sum best at 2.
            e.set(1, 0, 0.0);
            e.set(1, 1, -1.0);
            e.set(1, 2, -0.1);
            e.set(1, 3, -1.0);
            t.set(1, 0, 0.0);
            t.set(1, 1, 1.0);
            t.set(1, 2, 0.6);
        }
        d.decomposed_update(&tr(0.0, 0.0, false)).unwrap();
        let e = d.env.q_values(&Obs::Index(0)).unwrap()[2];
        let t = d.task.q_values(&Obs::Index(0)).unwrap()[2];
        assert!((e - 0.5 * 0.9 * -0.1).abs() < 1e-15);
        assert!((t - 0.5 * 0.9 * 0.6).abs() < 1e-15);
    }

    #[test]
    fn frozen_survival_is_untouched() {
        let mut d = dq(UpdateMode::IndependentMax);
        d.freeze_env();
        let before = d.env.param_hash();
        d.minibatch_update(&[tr(-1.0, 1.0, true), tr(0.0, 1.0, false)]).unwrap();
        assert_eq!(before, d.env.param_hash());
        assert!(d.task.params().iter().any(|v| *v != 0.0));
    }

    #[test]
    fn mismatched_components_rejected() {
        let small = QFunction::Table(QTable::new(2, AlphaSchedule::default(), 0.9).unwrap());
        assert!(DecomposedQ::new(table(), small, UpdateMode::JointGreedy).is_err());
        let other_gamma = QFunction::Table(QTable::new(3, AlphaSchedule::default(), 0.5).unwrap());
        assert!(DecomposedQ::new(table(), other_gamma, UpdateMode::JointGreedy).is_err());
    }

    #[test]
    fn mlp_decomposed_batch_routes_rewards() {
        let mk = || {
            QFunction::Mlp(
                MlpApproximator::new(3, &[4], AdamConfig { lr: 0.01, ..Default::default() }, 0.9)
                    .unwrap(),
            )
        };
        let mut d = DecomposedQ::new(mk(), mk(), UpdateMode::IndependentMax).unwrap();
        let obs = Obs::OneHot { dim: 3, active: vec![0] };
        let t = Transition {
            state: obs.clone(),
            action: ActionId::Up,
            reward: DecomposedReward::new(0.0, 1.0),
            next_state: obs.clone(),
            terminal: true,
        };
        let (le, lt) = d.minibatch_update(&[t]).unwrap();
        assert_eq!(le, 0.0);
        assert_eq!(lt, 1.0);
        // Zero gradient for the survival side: unchanged.
        assert!(d.env.params().iter().all(|v| *v == 0.0));
        assert!(d.task.q_values(&obs).unwrap()[0] > 0.0);
    }
}

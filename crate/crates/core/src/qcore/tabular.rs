use serde::{Deserialize, Serialize};

use crate::env::Obs;
use crate::error::{Error, Result};
use crate::mdp::{Transition, NUM_ACTIONS};

/// Per-entry learning rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum AlphaSchedule {
    Constant { alpha: f64 },
    /// `max(floor, 1 / n)` where `n` counts updates of the entry, so the first
    /// visit copies its target and the rate settles at `floor`.
    InverseVisit { floor: f64 },
}

impl Default for AlphaSchedule {
    fn default() -> Self {
        AlphaSchedule::Constant { alpha: 0.1 }
    }
}

impl AlphaSchedule {
    fn rate(&self, visits: u32) -> f64 {
        match *self {
            AlphaSchedule::Constant { alpha } => alpha,
            AlphaSchedule::InverseVisit { floor } => floor.max(1.0 / f64::from(visits.max(1))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = match *self {
            AlphaSchedule::Constant { alpha } => alpha,
            AlphaSchedule::InverseVisit { floor } => floor,
        };
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::Config(format!("learning rate must lie in (0, 1] (got {a})")));
        }
        Ok(())
    }
}

/// Dense `states x 4` action-value table, zero-initialised.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    values: Vec<f64>,
    visits: Vec<u32>,
    n_states: usize,
    alpha: AlphaSchedule,
    gamma: f64,
    updates: u64,
}

impl QTable {
    pub fn new(n_states: usize, alpha: AlphaSchedule, gamma: f64) -> Result<Self> {
        alpha.validate()?;
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1] (got {gamma})")));
        }
        Ok(Self {
            values: vec![0.0; n_states * NUM_ACTIONS],
            visits: vec![0; n_states * NUM_ACTIONS],
            n_states,
            alpha,
            gamma,
            updates: 0,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> AlphaSchedule {
        self.alpha
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub(crate) fn set_updates(&mut self, updates: u64) {
        self.updates = updates;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn check(&self, s: usize) -> Result<()> {
        if s >= self.n_states {
            return Err(Error::shape(format!("state index < {}", self.n_states), s));
        }
        Ok(())
    }

    pub fn index_of(&self, obs: &Obs) -> Result<usize> {
        match obs {
            Obs::Index(i) => {
                let i = *i as usize;
                self.check(i)?;
                Ok(i)
            }
            Obs::OneHot { .. } => Err(Error::shape("table index", "feature observation")),
        }
    }

    pub fn row(&self, s: usize) -> [f64; NUM_ACTIONS] {
        let r = &self.values[s * NUM_ACTIONS..(s + 1) * NUM_ACTIONS];
        [r[0], r[1], r[2], r[3]]
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * NUM_ACTIONS + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * NUM_ACTIONS + a] = v;
    }

    /// Times the `(s, a)` entry has been updated.
    pub fn visits(&self, s: usize, a: usize) -> u32 {
        self.visits[s * NUM_ACTIONS + a]
    }

    pub fn state_visits(&self, s: usize) -> u64 {
        (0..NUM_ACTIONS).map(|a| u64::from(self.visits(s, a))).sum()
    }

    pub fn q_values(&self, obs: &Obs) -> Result<[f64; NUM_ACTIONS]> {
        Ok(self.row(self.index_of(obs)?))
    }

    /// `Q(s, a) += alpha * (target - Q(s, a))`; returns the unscaled error.
    pub fn update_toward(&mut self, s: usize, a: usize, target: f64) -> Result<f64> {
        self.check(s)?;
        let k = s * NUM_ACTIONS + a;
        self.visits[k] = self.visits[k].saturating_add(1);
        let alpha = self.alpha.rate(self.visits[k]);
        let td = target - self.values[k];
        self.values[k] += alpha * td;
        self.updates += 1;
        if !self.values[k].is_finite() {
            return Err(Error::Numerical(format!("non-finite table entry ({s}, {a})")));
        }
        Ok(td)
    }

    /// One Q-learning update on the total reward:
    /// `Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))`, with the
    /// bootstrap dropped on terminal transitions.
    pub fn td_update(&mut self, t: &Transition<Obs>) -> Result<f64> {
        let s = self.index_of(&t.state)?;
        let bootstrap = if t.terminal {
            0.0
        } else {
            let s2 = self.index_of(&t.next_state)?;
            self.gamma * max_value(&self.row(s2))
        };
        self.update_toward(s, t.action.index(), t.reward.total() + bootstrap)
    }
}

/// Largest entry; NaN-free input assumed.
pub fn max_value(q: &[f64; NUM_ACTIONS]) -> f64 {
    q[argmax(q)]
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(q: &[f64; NUM_ACTIONS]) -> usize {
    let mut best = 0;
    for a in 1..NUM_ACTIONS {
        if q[a] > q[best] {
            best = a;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{ActionId, DecomposedReward};

    fn t(s: u64, a: ActionId, r: f64, s2: u64, terminal: bool) -> Transition<Obs> {
        Transition {
            state: Obs::Index(s),
            action: a,
            reward: DecomposedReward::new(0.0, r),
            next_state: Obs::Index(s2),
            terminal,
        }
    }

    fn table(alpha: f64, gamma: f64) -> QTable {
        QTable::new(4, AlphaSchedule::Constant { alpha }, gamma).unwrap()
    }

    #[test]
    fn fresh_table_is_zero() {
        assert_eq!(table(0.1, 0.9).q_values(&Obs::Index(2)).unwrap(), [0.0; 4]);
    }

    #[test]
    fn terminal_update_has_no_bootstrap() {
        let mut q = table(0.5, 0.95);
        q.set(1, 0, 100.0);
        let td = q.td_update(&t(0, ActionId::Up, 1.0, 1, true)).unwrap();
        assert_eq!(td, 1.0);
        assert_eq!(q.get(0, 0), 0.5);
    }

    #[test]
    fn bellman_fixed_point_is_stable() {
        let mut q = table(0.5, 1.0);
        q.set(0, 3, 1.0);
        q.set(1, 2, 1.0);
        let td = q.td_update(&t(0, ActionId::Right, 0.0, 1, false)).unwrap();
        assert_eq!(td, 0.0);
        assert_eq!(q.get(0, 3), 1.0);
    }

    #[test]
    fn direct_substitution() {
        let mut q = table(0.1, 0.95);
        q.set(1, 1, 1.0);
        q.td_update(&t(0, ActionId::Up, 0.0, 1, false)).unwrap();
        assert!((q.get(0, 0) - 0.095).abs() < 1e-15);
    }

    #[test]
    fn inverse_visit_schedule() {
        let mut q = QTable::new(1, AlphaSchedule::InverseVisit { floor: 0.1 }, 0.9).unwrap();
        q.update_toward(0, 0, 4.0).unwrap();
        assert_eq!(q.get(0, 0), 4.0);
        q.update_toward(0, 0, 2.0).unwrap();
        assert_eq!(q.get(0, 0), 3.0);
        for _ in 0..20 {
            q.update_toward(0, 0, 3.0).unwrap();
        }
        assert_eq!(q.visits(0, 0), 22);
        assert_eq!(AlphaSchedule::InverseVisit { floor: 0.1 }.rate(50), 0.1);
    }

    #[test]
    fn out_of_range_and_wrong_encoding() {
        let q = table(0.1, 0.9);
        assert!(q.q_values(&Obs::Index(4)).is_err());
        assert!(q.q_values(&Obs::OneHot { dim: 4, active: vec![0] }).is_err());
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[-1.0, 0.5, 0.5, 0.0]), 1);
        assert_eq!(max_value(&[-3.0, -2.0, -5.0, -2.0]), -2.0);
    }
}

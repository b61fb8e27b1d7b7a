use serde::{Deserialize, Serialize};

use crate::env::{CliffConfig, Encoding, GridConfig};
use crate::error::{Error, Result};
use crate::qcore::{AdamConfig, AlphaSchedule, UpdateMode};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvConfig {
    Gridworld(GridConfig),
    Cliffwalk(CliffConfig),
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::Gridworld(GridConfig::default())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LearnerConfig {
    /// Table over the egocentric window (gridworld) or position (cliff walk).
    Tabular {
        #[serde(default = "default_window")]
        window: usize,
        #[serde(default)]
        alpha: AlphaSchedule,
        /// Replayed transitions applied per environment step.
        #[serde(default = "default_batch")]
        batch: usize,
    },
    /// Fully connected network over the one-hot encoding.
    Mlp {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default)]
        adam: AdamConfig,
    },
}

fn default_window() -> usize {
    3
}

fn default_batch() -> usize {
    32
}

fn default_hidden() -> Vec<usize> {
    vec![64, 16]
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig::Tabular { window: 3, alpha: AlphaSchedule::default(), batch: 32 }
    }
}

impl LearnerConfig {
    pub fn encoding(&self) -> Encoding {
        match self {
            LearnerConfig::Tabular { window, .. } => Encoding::Tabular { window: *window },
            LearnerConfig::Mlp { .. } => Encoding::OneHot,
        }
    }

    pub fn batch_size(&self) -> usize {
        match self {
            LearnerConfig::Tabular { batch, .. } => *batch,
            LearnerConfig::Mlp { adam, .. } => adam.minibatch,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplorationConfig {
    pub epsilon_start: f64,
    pub epsilon_final: f64,
    /// Share of a phase's step budget (episodes x horizon) spent annealing.
    pub anneal_fraction: f64,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self { epsilon_start: 1.0, epsilon_final: 0.1, anneal_fraction: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplayConfig {
    pub capacity: usize,
    /// Transitions generated before phase 2; `None` fills the buffer.
    pub seed_transitions: Option<usize>,
    pub with_replacement: bool,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self { capacity: 10_000, seed_transitions: None, with_replacement: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Naive,
    Transfer,
    Decoupled,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Naive, Method::Transfer, Method::Decoupled];

    pub fn name(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::Transfer => "transfer",
            Method::Decoupled => "decoupled",
        }
    }

    pub fn lineage(self) -> Lineage {
        match self {
            Method::Naive | Method::Transfer => Lineage::Monolithic,
            Method::Decoupled => Lineage::Decomposed,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// How phase 1 is trained: one function on the total reward, or the
/// survival/task pair on their own rewards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lineage {
    Monolithic,
    Decomposed,
}

impl Lineage {
    pub fn name(self) -> &'static str {
        match self {
            Lineage::Monolithic => "monolithic",
            Lineage::Decomposed => "decomposed",
        }
    }
}

/// Settings for comparing a tabular learner against exact value iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub episodes: usize,
    pub alpha: AlphaSchedule,
    pub exploration: ExplorationConfig,
    /// Max-abs error allowed on well-visited states.
    pub tolerance: f64,
    /// Allowed error of `max_a Q(start, a)`.
    pub start_tolerance: f64,
    pub min_visits: u64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            episodes: 20_000,
            alpha: AlphaSchedule::InverseVisit { floor: 0.1 },
            exploration: ExplorationConfig::default(),
            tolerance: 0.05,
            start_tolerance: 0.02,
            min_visits: 100,
            seed: 0,
        }
    }
}

/// Complete description of one experiment. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub version: u32,
    pub env: EnvConfig,
    pub learner: LearnerConfig,
    pub update_mode: UpdateMode,
    pub gamma: f64,
    pub exploration: ExplorationConfig,
    /// Safety threshold on survival values.
    pub tau: f64,
    pub replay: ReplayConfig,
    pub phase1_episodes: usize,
    pub phase2_episodes: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub eval_set_size: usize,
    pub eval_set_seed: u64,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    /// Report discounted instead of raw episode returns.
    pub discounted_return: bool,
    /// Horizon cut-offs keep their bootstrap term.
    pub bootstrap_on_timeout: bool,
    pub oracle: OracleConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            env: EnvConfig::default(),
            learner: LearnerConfig::default(),
            update_mode: UpdateMode::default(),
            gamma: 0.95,
            exploration: ExplorationConfig::default(),
            tau: -0.5,
            replay: ReplayConfig::default(),
            phase1_episodes: 5_000,
            phase2_episodes: 5_000,
            eval_every: 100,
            eval_episodes: 30,
            eval_set_size: 100,
            eval_set_seed: 0,
            seeds: (1..=9).collect(),
            methods: Method::ALL.to_vec(),
            discounted_return: false,
            bootstrap_on_timeout: true,
            oracle: OracleConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if self.seeds.is_empty() {
            return bad("seed list must not be empty".into());
        }
        if self.methods.is_empty() {
            return bad("method list must not be empty".into());
        }
        if self.phase2_episodes == 0 {
            return bad("phase2_episodes must be positive".into());
        }
        if self.eval_every == 0 || self.eval_episodes == 0 || self.eval_set_size == 0 {
            return bad("eval_every, eval_episodes and eval_set_size must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1] (got {})", self.gamma));
        }
        if !self.tau.is_finite() {
            return bad("tau must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.exploration.anneal_fraction) {
            return bad("anneal_fraction must lie in [0, 1]".into());
        }
        if self.replay.capacity == 0 {
            return bad("replay capacity must be positive".into());
        }
        if self.replay.seed_transitions.is_some_and(|n| n > self.replay.capacity) {
            return bad("seed_transitions exceeds replay capacity".into());
        }
        if self.learner.batch_size() == 0 {
            return bad("batch size must be positive".into());
        }
        match &self.learner {
            LearnerConfig::Tabular { window, alpha, .. } => {
                alpha.validate()?;
                if let EnvConfig::Gridworld(_) = self.env {
                    crate::env::gridworld::local_window_states(*window)?;
                }
            }
            LearnerConfig::Mlp { hidden, adam } => {
                adam.validate()?;
                if hidden.contains(&0) {
                    return bad("hidden widths must be positive".into());
                }
            }
        }
        match &self.env {
            EnvConfig::Gridworld(g) => g.validate()?,
            EnvConfig::Cliffwalk(c) => {
                crate::env::CliffWalk::new(c.clone())?;
            }
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return bad("methods must not repeat".into());
        }
        Ok(())
    }

    pub fn seed_transitions(&self) -> usize {
        self.replay.seed_transitions.unwrap_or(self.replay.capacity)
    }

    pub fn is_enumerable(&self) -> bool {
        matches!(self.env, EnvConfig::Cliffwalk(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_json() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(back.seeds.len(), 9);
    }

    #[test]
    fn minimal_config() {
        let cfg = ExperimentConfig::from_json(r#"{"version": 1, "seeds": [4]}"#).unwrap();
        assert_eq!(cfg.seeds, vec![4]);
        assert_eq!(cfg.phase1_episodes, 5000);
    }

    #[test]
    fn unknown_keys_are_errors_with_line_numbers() {
        let text = "{\n  \"version\": 1,\n  \"gama\": 0.9\n}";
        let err = ExperimentConfig::from_json(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("gama") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn nested_unknown_keys_rejected() {
        let text = r#"{"version": 1, "env": {"kind": "gridworld", "widht": 3}}"#;
        assert!(ExperimentConfig::from_json(text).is_err());
        let text = r#"{"version": 1, "learner": {"kind": "mlp", "hiden": [3]}}"#;
        assert!(ExperimentConfig::from_json(text).is_err());
    }

    #[test]
    fn tagged_environments() {
        let text = r#"{"version": 1, "env": {"kind": "cliffwalk", "max_steps": 30}}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert!(cfg.is_enumerable());
        let EnvConfig::Cliffwalk(c) = cfg.env else { panic!() };
        assert_eq!(c.max_steps, 30);
        assert_eq!(c.width, 12);
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            r#"{"version": 2}"#,
            r#"{"version": 1, "seeds": []}"#,
            r#"{"version": 1, "phase2_episodes": 0}"#,
            r#"{"version": 1, "learner": {"kind": "tabular", "window": 4}}"#,
            r#"{"version": 1, "methods": ["naive", "naive"]}"#,
            r#"{"version": 1, "methods": ["lazy"]}"#,
        ] {
            assert!(ExperimentConfig::from_json(text).is_err(), "{text}");
        }
    }
}

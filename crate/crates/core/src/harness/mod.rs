//! The two-phase experiment: train on task 0, then move to task 1 with the
//! naive, transfer or decoupled method. Also hosts the oracle checks that
//! compare tabular learning with exact value iteration.

pub mod config;
pub mod eval;
pub mod metrics;
pub mod oracle;
pub mod run;

use crate::env::{CliffWalk, Environment, GridWorld};
use crate::error::Result;
use crate::snapshot::{qfunction_snapshot, replay_snapshot, Snapshot};

pub use config::{EnvConfig, ExperimentConfig, LearnerConfig, Lineage, Method};
pub use eval::{Agent, FixedEvalSet};
pub use metrics::{MetricsRow, CSV_HEADER};
pub use run::{run_phase1, run_phase2, Phase1Artifacts, Phase2Result, RunOptions};

/// All phase-1 and phase-2 results of one seed.
#[derive(Clone, Debug)]
pub struct SeedRun<S> {
    pub seed: u64,
    pub phase1: Vec<Phase1Artifacts<S>>,
    pub phase2: Vec<Phase2Result>,
}

impl<S> SeedRun<S> {
    pub fn phase2_for(&self, method: Method) -> Option<&Phase2Result> {
        self.phase2.iter().find(|r| r.method == method)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput<S> {
    pub eval_set: FixedEvalSet<S>,
    pub runs: Vec<SeedRun<S>>,
}

impl<S> ExperimentOutput<S> {
    /// Phase-2 rows, sorted by method, seed and episode.
    pub fn rows(&self) -> Vec<MetricsRow> {
        let mut rows: Vec<_> = self.runs.iter().flat_map(|r| r.phase2.iter().flat_map(|p| p.rows.clone())).collect();
        metrics::sort_rows(&mut rows);
        rows
    }

    /// Phase-1 rows, labelled by lineage.
    pub fn phase1_rows(&self) -> Vec<MetricsRow> {
        let mut rows: Vec<_> = self.runs.iter().flat_map(|r| r.phase1.iter().flat_map(|p| p.rows.clone())).collect();
        metrics::sort_rows(&mut rows);
        rows
    }
}

fn run_seed<E: Environment>(
    cfg: &ExperimentConfig,
    env: &E,
    seed: u64,
    eval_set: &FixedEvalSet<E::State>,
    options: RunOptions,
) -> Result<SeedRun<E::State>> {
    let mut lineages: Vec<Lineage> = cfg.methods.iter().map(|m| m.lineage()).collect();
    lineages.sort();
    lineages.dedup();
    let phase1 = lineages
        .into_iter()
        .map(|l| run_phase1(cfg, env, l, seed, eval_set))
        .collect::<Result<Vec<_>>>()?;
    let mut phase2 = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let art = phase1.iter().find(|a| a.lineage == method.lineage()).expect("lineage trained above");
        phase2.push(run_phase2(cfg, env, method, art, options)?);
    }
    phase2.sort_by_key(|r| r.method);
    Ok(SeedRun { seed, phase1, phase2 })
}

/// Run every configured seed. Seeds are independent, so running them in
/// parallel does not change any result.
pub fn run_experiment<E: Environment>(
    cfg: &ExperimentConfig,
    env: &E,
    parallel: bool,
    options: RunOptions,
) -> Result<ExperimentOutput<E::State>> {
    cfg.validate()?;
    let eval_set = FixedEvalSet::generate(env, cfg.eval_set_size, cfg.eval_set_seed)?;
    let run = |&seed: &u64| run_seed(cfg, env, seed, &eval_set, options);
    let runs = if parallel { par_map(&cfg.seeds, run)? } else { cfg.seeds.iter().map(run).collect::<Result<Vec<_>>>()? };
    log::info!("experiment finished: {} seeds, eval set {}", runs.len(), eval_set.content_hash());
    Ok(ExperimentOutput { eval_set, runs })
}

#[cfg(feature = "parallel")]
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
    items.iter().map(f).collect()
}

/// Environment-independent outcome of [`run_config`], ready to be written.
#[derive(Clone, Debug)]
pub struct ExperimentSummary {
    pub rows: Vec<MetricsRow>,
    pub phase1_rows: Vec<MetricsRow>,
    pub eval_set_json: String,
    pub eval_set_hash: String,
    /// Named snapshots: final value functions and seeded replay buffers.
    pub snapshots: Vec<(String, Snapshot)>,
    /// Survival-function hash before and after phase 2, per seed.
    pub survival_hashes: Vec<(u64, String, String)>,
}

fn summarise<S: serde::Serialize>(cfg: &ExperimentConfig, out: &ExperimentOutput<S>) -> ExperimentSummary {
    let enc = cfg.learner.encoding().id();
    let mut snapshots = Vec::new();
    let mut survival_hashes = Vec::new();
    for run in &out.runs {
        for p in &run.phase2 {
            let stem = format!("{}_seed{}", p.method.name(), run.seed);
            match &p.agent {
                Agent::Monolithic(q) => snapshots.push((format!("{stem}_q.txt"), qfunction_snapshot(q, &enc))),
                Agent::Decomposed(d) => {
                    snapshots.push((format!("{stem}_q_env.txt"), qfunction_snapshot(&d.env, &enc)));
                    snapshots.push((format!("{stem}_q_task.txt"), qfunction_snapshot(&d.task, &enc)));
                }
            }
            snapshots.push((format!("{stem}_replay.txt"), replay_snapshot(&p.seeded_replay, &enc, cfg.gamma)));
            if let Some((before, after)) = &p.survival_hashes {
                survival_hashes.push((run.seed, before.clone(), after.clone()));
            }
        }
    }
    ExperimentSummary {
        rows: out.rows(),
        phase1_rows: out.phase1_rows(),
        eval_set_json: out.eval_set.to_json(),
        eval_set_hash: out.eval_set.content_hash(),
        snapshots,
        survival_hashes,
    }
}

/// Build the configured environment and run the experiment on it.
pub fn run_config(cfg: &ExperimentConfig, parallel: bool) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let options = RunOptions::default();
    match &cfg.env {
        EnvConfig::Gridworld(g) => {
            let env = GridWorld::new(g.clone())?;
            Ok(summarise(cfg, &run_experiment(cfg, &env, parallel, options)?))
        }
        EnvConfig::Cliffwalk(c) => {
            let env = CliffWalk::new(c.clone())?;
            Ok(summarise(cfg, &run_experiment(cfg, &env, parallel, options)?))
        }
    }
}


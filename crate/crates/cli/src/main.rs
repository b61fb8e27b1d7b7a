//! `dqlab`: train, verify, plot and inspect.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use dqlab::env::CliffWalk;
use dqlab::harness::config::EnvConfig;
use dqlab::harness::eval::git_blob_hash;
use dqlab::harness::metrics::{parse_csv, strip_wall_clock, to_csv, Metric};
use dqlab::harness::oracle::{equivalence_check, tabular_oracle_check};
use dqlab::harness::{run_config, ExperimentConfig};
use dqlab::plot::render_svg;
use dqlab::replay::is_crash;
use dqlab::snapshot::{load_replay, Snapshot};

const MANIFEST: &str = "manifest.json";
const METRICS: &str = "metrics.csv";
const PHASE1: &str = "phase1.csv";
const EVAL_SET: &str = "eval_set.json";

#[derive(Parser)]
#[command(name = "dqlab", version, about = "Decoupled Q-learning lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run phase 1 and phase 2 for every configured method and seed.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "runs/latest")]
        out: PathBuf,
        /// Comma-separated seed list overriding the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Worker threads for independent seeds.
        #[arg(long)]
        parallel: Option<usize>,
        /// Re-run and compare against the manifest in `--out` instead of writing.
        #[arg(long)]
        check: bool,
    },
    /// Compare tabular learning on the cliff walk with value iteration.
    OracleCheck {
        #[arg(long)]
        config: PathBuf,
        /// Also compare a joint-greedy decomposed learner with a monolithic one.
        #[arg(long)]
        equivalence: bool,
        /// Transitions in the equivalence stream.
        #[arg(long, default_value_t = 50_000)]
        transitions: usize,
    },
    /// Render one SVG per metric and phase from a metrics CSV.
    Plot {
        csv: PathBuf,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
    /// Summarise a replay snapshot.
    InspectReplay { snapshot: PathBuf },
}

/// Exit with a message and code.
struct Failure(u8, String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(1, e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DQLAB_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, out, seeds, parallel, check } => cmd_train(&config, &out, seeds, parallel, check),
        Command::OracleCheck { config, equivalence, transitions } => cmd_oracle_check(&config, equivalence, transitions),
        Command::Plot { csv, out } => cmd_plot(&csv, &out),
        Command::InspectReplay { snapshot } => cmd_inspect_replay(&snapshot),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("dqlab: {msg}");
            ExitCode::from(code)
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure(2, format!("cannot read config {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text).map_err(|e| Failure(1, format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> CmdResult {
    fs::write(path, contents).map_err(|e| Failure(1, format!("cannot write {}: {e}", path.display())))
}

fn cmd_train(config: &Path, out: &Path, seeds: Option<Vec<u64>>, threads: Option<usize>, check: bool) -> CmdResult {
    let mut cfg = load_config(config)?;
    if let Some(seeds) = seeds {
        cfg.seeds = seeds;
        cfg.validate()?;
    }
    let summary = match threads {
        Some(n) if n > 1 => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            pool.install(|| run_config(&cfg, true))?
        }
        _ => run_config(&cfg, false)?,
    };

    let metrics = to_csv(&summary.rows);
    let phase1 = to_csv(&summary.phase1_rows);
    let mut hashes = BTreeMap::new();
    hashes.insert(METRICS.to_string(), git_blob_hash(strip_wall_clock(&metrics).as_bytes()));
    hashes.insert(PHASE1.to_string(), git_blob_hash(strip_wall_clock(&phase1).as_bytes()));
    hashes.insert(EVAL_SET.to_string(), summary.eval_set_hash.clone());
    let snaps: Vec<(String, String)> =
        summary.snapshots.iter().map(|(name, s)| (format!("snapshots/{name}"), s.render())).collect();
    for (name, text) in &snaps {
        hashes.insert(name.clone(), git_blob_hash(text.as_bytes()));
    }
    let survival: Vec<_> = summary
        .survival_hashes
        .iter()
        .map(|(seed, before, after)| json!({"seed": seed, "before": before, "after": after}))
        .collect();
    let manifest = json!({
        "config_path": config.display().to_string(),
        "output_dir": out.display().to_string(),
        "seeds": cfg.seeds,
        "config": serde_json::from_str::<serde_json::Value>(&cfg.to_json())?,
        "eval_set_hash": summary.eval_set_hash,
        "hashes": hashes,
        "survival_hashes": survival,
    });

    if check {
        let path = out.join(MANIFEST);
        let old: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(&path).map_err(|e| Failure(2, format!("cannot read {}: {e}", path.display())))?,
        )?;
        let mut mismatches = Vec::new();
        for (name, hash) in &hashes {
            if old["hashes"][name].as_str() != Some(hash.as_str()) {
                mismatches.push(name.clone());
            }
        }
        if !mismatches.is_empty() {
            return Err(Failure(1, format!("hash mismatch: {}", mismatches.join(", "))));
        }
        println!("check passed: {} hashes reproduced", hashes.len());
        return Ok(());
    }

    fs::create_dir_all(out.join("snapshots"))?;
    write(&out.join(METRICS), &metrics)?;
    write(&out.join(PHASE1), &phase1)?;
    write(&out.join(EVAL_SET), &summary.eval_set_json)?;
    for (name, text) in &snaps {
        write(&out.join(name), text)?;
    }
    write(&out.join(MANIFEST), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    println!("wrote {} rows to {}", summary.rows.len(), out.join(METRICS).display());
    Ok(())
}

fn cmd_oracle_check(config: &Path, equivalence: bool, transitions: usize) -> CmdResult {
    let cfg = load_config(config)?;
    let EnvConfig::Cliffwalk(c) = &cfg.env else {
        return Err(Failure(1, "oracle-check needs an enumerable environment (kind \"cliffwalk\")".into()));
    };
    let mut ok = true;
    if equivalence {
        let world = CliffWalk::new(c.clone())?;
        let rep = equivalence_check(&world, cfg.gamma, cfg.oracle.alpha, transitions, cfg.oracle.seed)?;
        println!("equivalence: {} transitions, max |dQ| = {:e}", rep.transitions, rep.max_abs_diff);
        ok &= rep.max_abs_diff <= 1e-9;
    }
    let rep = tabular_oracle_check(&cfg)?;
    println!(
        "oracle: {} episodes, {} states checked, max abs error {:.6} (tolerance {})",
        rep.episodes, rep.states_checked, rep.max_abs_error, cfg.oracle.tolerance
    );
    println!(
        "start value {:.6}, exact {:.6} (tolerance {})",
        rep.start_value, rep.start_value_exact, cfg.oracle.start_tolerance
    );
    ok &= rep.passed;
    if ok {
        println!("PASS");
        Ok(())
    } else {
        Err(Failure(1, "oracle check failed".into()))
    }
}

fn cmd_plot(csv: &Path, out: &Path) -> CmdResult {
    let text = fs::read_to_string(csv).map_err(|e| Failure(1, format!("cannot read {}: {e}", csv.display())))?;
    let rows = parse_csv(&text).map_err(|e| Failure(1, format!("{}: {e}", csv.display())))?;
    if rows.is_empty() {
        return Err(Failure(1, format!("{} has no data rows", csv.display())));
    }
    let mut phases: Vec<u8> = rows.iter().map(|r| r.phase).collect();
    phases.sort();
    phases.dedup();
    fs::create_dir_all(out)?;
    for phase in phases {
        for metric in Metric::ALL {
            let path = out.join(format!("{}_phase{phase}.svg", metric.column()));
            write(&path, &render_svg(&rows, metric, phase)?)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn cmd_inspect_replay(path: &Path) -> CmdResult {
    let buf = load_replay(&Snapshot::load(path).map_err(|e| Failure(1, format!("{}: {e}", path.display())))?)
        .map_err(|e| Failure(1, format!("{}: {e}", path.display())))?;
    let n = buf.len();
    println!("size {n} (capacity {})", buf.capacity());
    println!("crash fraction {:.4}", if n == 0 { 0.0 } else { buf.crash_fraction() });
    let mut env_hist: BTreeMap<String, usize> = BTreeMap::new();
    let mut task_hist: BTreeMap<String, usize> = BTreeMap::new();
    let mut crashes = 0;
    for t in buf.iter() {
        *env_hist.entry(format!("{:?}", t.reward.r_env)).or_default() += 1;
        *task_hist.entry(format!("{:?}", t.reward.r_task)).or_default() += 1;
        crashes += usize::from(is_crash(t));
    }
    println!("crash transitions {crashes}");
    for (label, hist) in [("r_env", &env_hist), ("r_task", &task_hist)] {
        println!("{label} histogram:");
        for (value, count) in hist {
            println!("  {value:>6} {count}");
        }
    }
    Ok(())
}

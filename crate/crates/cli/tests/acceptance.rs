//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! `DQLAB_MLP_METRICS=<metrics.csv>` points the episode-length ordering at
//! a finished run of `configs/mlp.json`. Its figures are always reported;
//! they decide the outcome only when the tabular length ordering alone fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::Rng;

use dqlab::env::{CliffConfig, CliffWalk, Encoding, Environment, GridConfig, GridWorld};
use dqlab::exploration::safe_action_set;
use dqlab::harness::config::EnvConfig;
use dqlab::harness::metrics::{parse_csv, strip_wall_clock, MetricsRow};
use dqlab::harness::oracle::{equivalence_check, tabular_oracle_check};
use dqlab::harness::{run_experiment, Agent, ExperimentConfig, ExperimentOutput, Method, RunOptions};
use dqlab::mdp::ActionId;
use dqlab::qcore::{AdamConfig, Example, Input, MlpApproximator};
use dqlab::rng::{RngStream, Substream};
use dqlab::stats::{mean, paired_one_sided};

struct Outcome {
    id: u8,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn config(name: &str) -> ExperimentConfig {
    let path = workspace().join("configs").join(name);
    ExperimentConfig::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn equivalence() -> Outcome {
    let cfg = config("cliffwalk.json");
    let EnvConfig::Cliffwalk(c) = &cfg.env else { unreachable!() };
    let started = Instant::now();
    let rep = equivalence_check(&CliffWalk::new(c.clone()).unwrap(), cfg.gamma, cfg.oracle.alpha, 50_000, 7).unwrap();
    let secs = started.elapsed().as_secs_f64();
    Outcome {
        id: 1,
        name: "decomposition equivalence",
        pass: rep.max_abs_diff <= 1e-9 && secs < 10.0,
        detail: format!("max |dQ| = {:e} over 50000 transitions, {secs:.2} s", rep.max_abs_diff),
    }
}

fn oracle() -> Outcome {
    let started = Instant::now();
    let rep = tabular_oracle_check(&config("cliffwalk.json")).unwrap();
    let secs = started.elapsed().as_secs_f64();
    Outcome {
        id: 2,
        name: "oracle convergence",
        pass: rep.passed && rep.max_abs_error <= 0.05 && (rep.start_value - 0.95f64.powi(12)).abs() <= 0.02 && secs < 60.0,
        detail: format!(
            "max error {:.2e} on {} states, max Q(start) {:.5} vs {:.5}, {secs:.2} s",
            rep.max_abs_error,
            rep.states_checked,
            rep.start_value,
            0.95f64.powi(12)
        ),
    }
}

fn gradients() -> Outcome {
    let started = Instant::now();
    let mut rng = RngStream::new(2024).derive(Substream::WeightInit);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut net = MlpApproximator::new(10, &[8, 6], AdamConfig::default(), 0.95).unwrap();
        net.xavier_init(&mut rng);
        let xs: Vec<Vec<f64>> = (0..3).map(|_| (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let batch: Vec<Example> = xs
            .iter()
            .map(|x| Example { input: Input::Dense(x), action: rng.gen_range(0..4), target: rng.gen_range(-1.0..1.0) })
            .collect();
        let (_, analytic) = net.loss_and_grad(&batch).unwrap();
        for (i, a) in analytic.iter().enumerate() {
            let p = net.params()[i];
            net.params_mut()[i] = p + h;
            let up = net.loss_and_grad(&batch).unwrap().0;
            net.params_mut()[i] = p - h;
            let down = net.loss_and_grad(&batch).unwrap().0;
            net.params_mut()[i] = p;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max((a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    Outcome {
        id: 3,
        name: "gradient correctness",
        pass: worst < 1e-4 && secs < 10.0,
        detail: format!("worst relative error {worst:.2e} at 20 points, {secs:.2} s"),
    }
}

fn routing() -> Outcome {
    let grid = GridWorld::new(GridConfig::default()).unwrap();
    let cliff = CliffWalk::new(CliffConfig::default()).unwrap();
    let mut rng = RngStream::new(99).derive(Substream::Exploration);
    let mut violations = 0usize;
    let mut check = |r: dqlab::DecomposedReward, crashed: bool| {
        let ok = r.r_env <= 0.0 && r.r_task >= 0.0 && r.total() == r.r_env + r.r_task && (crashed == (r.r_env == -1.0));
        violations += usize::from(!ok);
    };
    let task = dqlab::env::TaskSpec::new(0);
    let mut gs = grid.reset(&mut rng).unwrap();
    let mut cs = Environment::reset(&cliff, &mut rng).unwrap();
    for i in 0..100_000 {
        let a = ActionId::from_index(rng.gen_range(0..4)).unwrap();
        if i % 2 == 0 {
            let out = grid.step(&gs, a, task, &mut rng).unwrap();
            check(out.reward, out.crashed);
            gs = if out.done { grid.reset(&mut rng).unwrap() } else { out.state };
        } else {
            let out = Environment::step(&cliff, &cs, a, task, &mut rng).unwrap();
            check(out.reward, out.crashed);
            cs = if out.done { Environment::reset(&cliff, &mut rng).unwrap() } else { out.state };
        }
    }
    Outcome {
        id: 4,
        name: "reward routing",
        pass: violations == 0,
        detail: format!("{violations} violations in 100000 transitions"),
    }
}

fn frozen(out: &ExperimentOutput<dqlab::env::GridState>) -> Outcome {
    let mut checked = 0;
    let mut changed = 0;
    for run in &out.runs {
        let p1 = run.phase1.iter().find(|a| matches!(a.agent, Agent::Decomposed(_))).unwrap();
        let Agent::Decomposed(before) = &p1.agent else { unreachable!() };
        let r = run.phase2_for(Method::Decoupled).unwrap();
        let Agent::Decomposed(after) = &r.agent else { unreachable!() };
        let (h0, h1) = r.survival_hashes.clone().unwrap();
        checked += 1;
        if before.env.param_hash() != after.env.param_hash() || h0 != h1 {
            changed += 1;
        }
    }
    Outcome {
        id: 5,
        name: "frozen survival function",
        pass: checked > 0 && changed == 0,
        detail: format!("{changed} of {checked} seeds changed Q_env"),
    }
}

fn per_seed(rows: &[MetricsRow], method: &str, seeds: &[u64], pick: impl Fn(&MetricsRow) -> bool, f: impl Fn(&MetricsRow) -> f64) -> Vec<f64> {
    seeds
        .iter()
        .map(|s| {
            let xs: Vec<f64> = rows.iter().filter(|r| r.method == method && r.seed == *s && pick(r)).map(&f).collect();
            mean(&xs)
        })
        .collect()
}

/// (return test passes, p-value, length ordering passes, decoupled length, transfer length)
fn orderings(rows: &[MetricsRow], seeds: &[u64], episodes: usize) -> (bool, f64, bool, f64, f64) {
    let final_quarter = |r: &MetricsRow| r.phase == 2 && 4 * r.episode >= 3 * episodes;
    let dec = per_seed(rows, "decoupled", seeds, final_quarter, |r| r.mean_return);
    let naive = per_seed(rows, "naive", seeds, final_quarter, |r| r.mean_return);
    let test = paired_one_sided(&dec, &naive);
    let len_dec = mean(&per_seed(rows, "decoupled", seeds, |r| r.phase == 2, |r| r.mean_length));
    let len_tr = mean(&per_seed(rows, "transfer", seeds, |r| r.phase == 2, |r| r.mean_length));
    (test.mean_diff > 0.0 && test.p_value < 0.05, test.p_value, len_dec >= len_tr, len_dec, len_tr)
}

fn return_ordering(rows: &[MetricsRow], cfg: &ExperimentConfig, secs: f64) -> Outcome {
    let (ret_ok, p, len_ok, ld, lt) = orderings(rows, &cfg.seeds, cfg.phase2_episodes);
    let mut detail = format!(
        "tabular: final-quarter return decoupled > naive p = {p:.4}; mean length decoupled {ld:.3} vs transfer {lt:.3}; {secs:.0} s"
    );
    let mut pass = ret_ok && len_ok;
    match std::env::var("DQLAB_MLP_METRICS") {
        Ok(path) => {
            let mlp_rows = parse_csv(&std::fs::read_to_string(&path).unwrap()).unwrap();
            let mlp = config("mlp.json");
            let (_, mp, mlp_len_ok, mld, mlt) = orderings(&mlp_rows, &mlp.seeds, mlp.phase2_episodes);
            detail.push_str(&format!(
                "; MLP: return p = {mp:.4}, length decoupled {mld:.3} vs transfer {mlt:.3}"
            ));
            if ret_ok && !len_ok {
                pass = mlp_len_ok;
            }
        }
        Err(_) if ret_ok && !len_ok => detail.push_str("; MLP fallback not supplied (DQLAB_MLP_METRICS)"),
        Err(_) => {}
    }
    Outcome { id: 6, name: "return and survivability ordering", pass, detail }
}

fn fixed_q_ordering(rows: &[MetricsRow], cfg: &ExperimentConfig) -> Outcome {
    let end = |r: &MetricsRow| r.phase == 2 && r.episode == cfg.phase2_episodes;
    let naive = mean(&per_seed(rows, "naive", &cfg.seeds, end, |r| r.fixed_state_mean_q));
    let dec = mean(&per_seed(rows, "decoupled", &cfg.seeds, end, |r| r.fixed_state_mean_q));
    Outcome {
        id: 7,
        name: "fixed-state Q ordering",
        pass: naive < 0.5 * dec,
        detail: format!("naive {naive:.4} vs decoupled {dec:.4} (needs naive < {:.4})", 0.5 * dec),
    }
}

fn safe_support(out: &ExperimentOutput<dqlab::env::GridState>, tau: f64) -> Outcome {
    let (mut audited, mut bad) = (0usize, 0usize);
    for run in &out.runs {
        let p1 = run.phase1.iter().find(|a| matches!(a.agent, Agent::Decomposed(_))).unwrap();
        let Agent::Decomposed(d) = &p1.agent else { unreachable!() };
        let r = run.phase2_for(Method::Decoupled).unwrap();
        for rec in r.actions.iter().filter(|a| a.exploratory) {
            let safe = safe_action_set(&d.env.q_values(&rec.obs).unwrap(), tau);
            audited += 1;
            if !safe.contains(rec.action) || safe != rec.allowed {
                bad += 1;
            }
        }
    }
    Outcome {
        id: 8,
        name: "safe exploration support",
        pass: audited > 0 && bad == 0,
        detail: format!("{bad} of {audited} exploratory actions outside the safe set"),
    }
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_dqlab");
    let cfg = workspace().join("configs/reference.json");
    let base = std::env::temp_dir().join(format!("dqlab-acceptance-{}", std::process::id()));
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        let out = base.join(run);
        let status = Command::new(bin).arg("train").arg("--config").arg(&cfg).arg("--out").arg(&out).status().unwrap();
        assert!(status.success(), "dqlab train failed");
        csvs.push(std::fs::read_to_string(out.join("metrics.csv")).unwrap());
    }
    let _ = std::fs::remove_dir_all(&base);
    let same = strip_wall_clock(&csvs[0]) == strip_wall_clock(&csvs[1]);
    Outcome {
        id: 9,
        name: "determinism",
        pass: same,
        detail: format!("two reference runs, {} CSV lines, identical: {same}", csvs[0].lines().count()),
    }
}

fn seeding(out: &ExperimentOutput<dqlab::env::GridState>) -> Outcome {
    let random: Vec<f64> = out.runs.iter().map(|r| r.phase2_for(Method::Naive).unwrap().seeded_replay.crash_fraction()).collect();
    let survival: Vec<f64> =
        out.runs.iter().map(|r| r.phase2_for(Method::Decoupled).unwrap().seeded_replay.crash_fraction()).collect();
    let test = paired_one_sided(&random, &survival);
    Outcome {
        id: 10,
        name: "replay seeding effect",
        pass: test.mean_diff > 0.0 && test.p_value < 0.05,
        detail: format!(
            "crash fraction random {:.4} vs survival {:.4}, p = {:.2e}",
            mean(&random),
            mean(&survival),
            test.p_value
        ),
    }
}

fn main() {
    // libtest-style arguments (filters, --nocapture) are accepted and ignored.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut outcomes = vec![equivalence(), oracle(), gradients(), routing()];

    let cfg = config("reference.json");
    let EnvConfig::Gridworld(g) = &cfg.env else { panic!("reference config must use the gridworld") };
    let env = GridWorld::new(g.clone()).unwrap();
    assert_eq!(cfg.learner.encoding(), Encoding::Tabular { window: 3 });
    let started = Instant::now();
    let out = run_experiment(&cfg, &env, true, RunOptions { record_actions: true }).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let rows = out.rows();
    outcomes.push(frozen(&out));
    outcomes.push(return_ordering(&rows, &cfg, secs));
    outcomes.push(fixed_q_ordering(&rows, &cfg));
    outcomes.push(safe_support(&out, cfg.tau));
    outcomes.push(determinism());
    outcomes.push(seeding(&out));

    let mut failed = 0;
    for o in &outcomes {
        failed += usize::from(!o.pass);
        println!("{} [{:>2}] {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.name, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

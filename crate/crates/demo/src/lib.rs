//! WebAssembly bindings for the static demo page in `www/`. Every export
//! returns a JSON string so the page needs no generated type glue.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use dqlab::dp::{decomposed_value_iteration, EnumerableMdp, DEFAULT_TOL};
use dqlab::env::{CliffConfig, CliffWalk, Encoding, Environment, GridConfig, GridWorld, Pos, TaskSpec};
use dqlab::exploration::{safe_action_set, select_action, ExplorationSchedule, PolicyKind, ValueView};
use dqlab::mdp::Transition;
use dqlab::qcore::{argmax, max_value, AlphaSchedule, DecomposedQ, QFunction, QTable, QValues, UpdateMode};
use dqlab::rng::{RngStream, Substream};

#[derive(Serialize)]
struct Cell {
    row: usize,
    col: usize,
    kind: &'static str,
    v_env: f64,
    v_task: f64,
    /// Safe actions in Up, Down, Left, Right order.
    safe: [bool; 4],
    greedy: usize,
}

#[derive(Serialize)]
struct CliffView {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    crashes: Option<usize>,
}

fn kind(world: &CliffWalk, p: Pos) -> &'static str {
    let c = world.config();
    if p == c.start {
        "start"
    } else if p == c.goal {
        "goal"
    } else if world.is_cliff(p) {
        "cliff"
    } else {
        "free"
    }
}

fn view(world: &CliffWalk, tau: f64, crashes: Option<usize>, values: impl Fn(Pos) -> Option<(QValues, QValues)>) -> String {
    let c = world.config();
    let mut cells = Vec::new();
    for row in 0..c.height {
        for col in 0..c.width {
            let p = (row, col);
            let (env, task) = values(p).unwrap_or(([0.0; 4], [0.0; 4]));
            let safe_set = safe_action_set(&env, tau);
            let sum: QValues = std::array::from_fn(|a| env[a] + task[a]);
            cells.push(Cell {
                row,
                col,
                kind: kind(world, p),
                v_env: max_value(&env),
                v_task: max_value(&task),
                safe: dqlab::mdp::ActionId::ALL.map(|a| safe_set.contains(a)),
                greedy: argmax(&sum),
            });
        }
    }
    serde_json::to_string(&CliffView { width: c.width, height: c.height, cells, crashes }).expect("view serialises")
}

fn error_json(e: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": e.to_string() }).to_string()
}

/// Exact survival and task values of the default cliff walk.
#[wasm_bindgen]
pub fn cliff_exact(gamma: f64, tau: f64) -> String {
    let world = CliffWalk::new(CliffConfig::default()).expect("default cliff is valid");
    let (mdp, positions) = match EnumerableMdp::from_cliff(&world, gamma) {
        Ok(x) => x,
        Err(e) => return error_json(e),
    };
    let (env, task) = match decomposed_value_iteration(&mdp, DEFAULT_TOL) {
        Ok(x) => x,
        Err(e) => return error_json(e),
    };
    view(&world, tau, None, |p| positions.binary_search(&p).ok().map(|i| (env[i], task[i])))
}

/// Tabular decomposed Q-learning on the cliff walk for `episodes` episodes
/// with annealed epsilon-greedy behaviour.
#[wasm_bindgen]
pub fn cliff_learned(episodes: u32, seed: u64, gamma: f64, tau: f64) -> String {
    let world = CliffWalk::new(CliffConfig::default()).expect("default cliff is valid");
    let enc = Encoding::Tabular { window: 0 };
    let n = world.obs_dim(enc).expect("tabular encoding");
    let table = || QTable::new(n, AlphaSchedule::InverseVisit { floor: 0.1 }, gamma).map(QFunction::Table);
    let (env_q, task_q) = match (table(), table()) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return error_json(e),
    };
    let mut q = DecomposedQ::new(env_q, task_q, UpdateMode::IndependentMax).expect("matching tables");
    let steps = u64::from(episodes) * world.max_steps() as u64 / 2;
    let policy = PolicyKind::EpsGreedy(ExplorationSchedule::new(1.0, 0.1, steps).expect("valid schedule"));
    let mut rng = RngStream::new(seed).derive(Substream::Exploration);
    let (mut t, mut crashes) = (0, 0);
    for _ in 0..episodes {
        let mut state = Environment::reset(&world, &mut rng).expect("reset");
        loop {
            let obs = world.encode(&state, enc).expect("encode");
            let sel = select_action(&policy, ValueView::Decomposed(&q), &obs, t, &mut rng).expect("select");
            let out = Environment::step(&world, &state, sel.action, TaskSpec::new(0), &mut rng).expect("step");
            let next = world.encode(&out.state, enc).expect("encode");
            let tr = Transition { state: obs, action: sel.action, reward: out.reward, next_state: next, terminal: out.absorbing() };
            q.decomposed_update(&tr).expect("tabular update");
            t += 1;
            if out.done {
                crashes += usize::from(out.crashed);
                break;
            }
            state = out.state;
        }
    }
    view(&world, tau, Some(crashes), |p| {
        let obs = dqlab::env::Obs::Index(world.position_index(p) as u64);
        Some((q.env.q_values(&obs).ok()?, q.task.q_values(&obs).ok()?))
    })
}

#[derive(Serialize)]
struct GridSample {
    text: String,
    window_index: u64,
    active_bits: usize,
    obstacles: usize,
}

/// One reset of an 11x11 gridworld with the given spawn probabilities.
#[wasm_bindgen]
pub fn grid_sample(seed: u64, p_obstacle: f64, p_collectible: f64) -> String {
    let cfg = GridConfig { p_obstacle, p_collectible, ..GridConfig::default() };
    let world = match GridWorld::new(cfg) {
        Ok(w) => w,
        Err(e) => return error_json(e),
    };
    let mut rng = RngStream::new(seed).derive(Substream::EnvSpawn);
    let state = match world.reset(&mut rng) {
        Ok(s) => s,
        Err(e) => return error_json(e),
    };
    let active_bits = match world.encode(&state, Encoding::OneHot) {
        Ok(dqlab::env::Obs::OneHot { active, .. }) => active.len(),
        _ => 0,
    };
    let sample = GridSample {
        text: world.render(&state),
        window_index: world.encode_local(&state, 3).unwrap_or(0),
        active_bits,
        obstacles: state.count(dqlab::env::CellContent::Obstacle),
    };
    serde_json::to_string(&sample).expect("sample serialises")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_view_marks_cliff_moves_unsafe() {
        let v: serde_json::Value = serde_json::from_str(&cliff_exact(0.95, -0.5)).unwrap();
        let cells = v["cells"].as_array().unwrap();
        assert_eq!(cells.len(), 48);
        let start = &cells[0];
        assert_eq!(start["kind"], "start");
        // Right from the start falls into the cliff.
        assert_eq!(start["safe"][3], false);
        assert_eq!(start["safe"][0], true);
        assert!((start["v_task"].as_f64().unwrap() - 0.95f64.powi(12)).abs() < 1e-9);
    }

    #[test]
    fn learned_view_is_deterministic() {
        assert_eq!(cliff_learned(200, 3, 0.95, -0.5), cliff_learned(200, 3, 0.95, -0.5));
        let v: serde_json::Value = serde_json::from_str(&cliff_learned(200, 3, 0.95, -0.5)).unwrap();
        assert!(v["crashes"].as_u64().unwrap() > 0);
    }

    #[test]
    fn grid_sample_reports_errors_as_json() {
        let ok: serde_json::Value = serde_json::from_str(&grid_sample(1, 0.15, 0.05)).unwrap();
        assert_eq!(ok["text"].as_str().unwrap().lines().count(), 11);
        let bad: serde_json::Value = serde_json::from_str(&grid_sample(1, 0.9, 0.5)).unwrap();
        assert!(bad["error"].is_string());
    }
}

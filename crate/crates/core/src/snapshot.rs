//! Plain-text snapshot files for tables, networks, replay buffers and exact
//! Q* tables.
//!
//! ```text
//! dqlab-snapshot v1
//! kind qtable
//! encoding tabular-w3
//! gamma 0.95
//! updates 1200
//! shape 65536 4
//! rows 65536
//! ---
//! 0.0 0.0 -0.5 0.0
//! ...
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so loading
//! reproduces every value bit for bit.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::env::Obs;
use crate::error::{Error, Result};
use crate::mdp::{ActionId, DecomposedReward, Transition, NUM_ACTIONS};
use crate::qcore::{AdamConfig, AlphaSchedule, MlpApproximator, QFunction, QTable, QValues};
use crate::replay::ReplayBuffer;

const MAGIC: &str = "dqlab-snapshot v1";
const SEPARATOR: &str = "---";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotKind {
    QTable,
    Mlp,
    Replay,
    QStar,
}

impl SnapshotKind {
    fn name(self) -> &'static str {
        match self {
            SnapshotKind::QTable => "qtable",
            SnapshotKind::Mlp => "mlp",
            SnapshotKind::Replay => "replay",
            SnapshotKind::QStar => "qstar",
        }
    }
}

impl FromStr for SnapshotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SnapshotKind::QTable, SnapshotKind::Mlp, SnapshotKind::Replay, SnapshotKind::QStar]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown snapshot kind `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub kind: SnapshotKind,
    pub encoding: String,
    pub gamma: f64,
    pub updates: u64,
    pub shape: Vec<usize>,
    pub rows: Vec<String>,
}

impl Snapshot {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let shape: Vec<String> = self.shape.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "kind {}", self.kind.name());
        let _ = writeln!(out, "encoding {}", self.encoding);
        let _ = writeln!(out, "gamma {:?}", self.gamma);
        let _ = writeln!(out, "updates {}", self.updates);
        let _ = writeln!(out, "shape {}", shape.join(" "));
        let _ = writeln!(out, "rows {}", self.rows.len());
        let _ = writeln!(out, "{SEPARATOR}");
        for r in &self.rows {
            out.push_str(r);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Snapshot> {
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(Error::Format("missing `dqlab-snapshot v1` header".into()));
        }
        let mut field = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| Error::Format(format!("truncated header before `{key}`")))?;
            let rest = line
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' ').or(if r.is_empty() { Some("") } else { None }))
                .ok_or_else(|| Error::Format(format!("expected `{key}`, found `{line}`")))?;
            Ok(rest.to_string())
        };
        let kind: SnapshotKind = field("kind")?.parse()?;
        let encoding = field("encoding")?;
        let gamma = parse_num::<f64>(&field("gamma")?, "gamma")?;
        let updates = parse_num::<u64>(&field("updates")?, "updates")?;
        let shape = field("shape")?
            .split_whitespace()
            .map(|d| parse_num::<usize>(d, "shape"))
            .collect::<Result<Vec<_>>>()?;
        let n_rows = parse_num::<usize>(&field("rows")?, "rows")?;
        if !field(SEPARATOR)?.is_empty() {
            return Err(Error::Format("malformed separator".into()));
        }
        let rows: Vec<String> = lines.map(str::to_string).collect();
        if rows.len() != n_rows {
            return Err(Error::Format(format!("expected {n_rows} rows, found {} (truncated?)", rows.len())));
        }
        Ok(Snapshot { kind, encoding, gamma, updates, shape, rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Snapshot> {
        Snapshot::parse(&std::fs::read_to_string(path)?)
    }

    fn expect_kind(&self, kind: SnapshotKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Format(format!("expected a {} snapshot, found {}", kind.name(), self.kind.name())));
        }
        Ok(())
    }
}

fn parse_num<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Format(format!("bad {what} value `{s}`")))
}

fn float_row(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    parts.join(" ")
}

fn parse_floats(row: &str, expected: usize) -> Result<Vec<f64>> {
    let v = row.split_whitespace().map(|x| parse_num::<f64>(x, "parameter")).collect::<Result<Vec<_>>>()?;
    if v.len() != expected {
        return Err(Error::shape(format!("{expected} values per row"), v.len()));
    }
    Ok(v)
}

pub fn qtable_snapshot(q: &QTable, encoding: &str) -> Snapshot {
    Snapshot {
        kind: SnapshotKind::QTable,
        encoding: encoding.to_string(),
        gamma: q.gamma(),
        updates: q.updates(),
        shape: vec![q.n_states(), NUM_ACTIONS],
        rows: q.values().chunks(NUM_ACTIONS).map(float_row).collect(),
    }
}

/// Rebuild a table, rejecting any shape other than `n_states x 4`.
pub fn load_qtable(s: &Snapshot, n_states: usize, alpha: AlphaSchedule) -> Result<QTable> {
    s.expect_kind(SnapshotKind::QTable)?;
    if s.shape != [n_states, NUM_ACTIONS] {
        return Err(Error::shape(format!("[{n_states}, {NUM_ACTIONS}]"), format!("{:?}", s.shape)));
    }
    let mut q = QTable::new(n_states, alpha, s.gamma)?;
    for (i, row) in s.rows.iter().enumerate() {
        let v = parse_floats(row, NUM_ACTIONS)?;
        q.values_mut()[i * NUM_ACTIONS..(i + 1) * NUM_ACTIONS].copy_from_slice(&v);
    }
    q.set_updates(s.updates);
    Ok(q)
}

pub fn mlp_snapshot(m: &MlpApproximator, encoding: &str) -> Snapshot {
    let widths = m.widths();
    let mut rows = Vec::new();
    let mut off = 0;
    for w in widths.windows(2) {
        let n = w[0] * w[1] + w[1];
        rows.push(float_row(&m.params()[off..off + n]));
        off += n;
    }
    Snapshot {
        kind: SnapshotKind::Mlp,
        encoding: encoding.to_string(),
        gamma: m.gamma(),
        updates: m.updates(),
        shape: widths.to_vec(),
        rows,
    }
}

/// Rebuild a network, rejecting any layer widths other than `widths`.
/// Optimizer moments are not stored and restart from zero.
pub fn load_mlp(s: &Snapshot, widths: &[usize], adam: AdamConfig) -> Result<MlpApproximator> {
    s.expect_kind(SnapshotKind::Mlp)?;
    if s.shape != widths {
        return Err(Error::shape(format!("{widths:?}"), format!("{:?}", s.shape)));
    }
    let mut m = MlpApproximator::with_widths(widths.to_vec(), adam, s.gamma)?;
    let mut params = Vec::with_capacity(m.params().len());
    for (row, w) in s.rows.iter().zip(widths.windows(2)) {
        params.extend(parse_floats(row, w[0] * w[1] + w[1])?);
    }
    if params.len() != m.params().len() {
        return Err(Error::shape(m.params().len(), params.len()));
    }
    m.params_mut().copy_from_slice(&params);
    m.set_updates(s.updates);
    Ok(m)
}

pub fn qfunction_snapshot(q: &QFunction, encoding: &str) -> Snapshot {
    match q {
        QFunction::Table(t) => qtable_snapshot(t, encoding),
        QFunction::Mlp(m) => mlp_snapshot(m, encoding),
    }
}

pub fn qstar_snapshot(q: &[QValues], gamma: f64, encoding: &str) -> Snapshot {
    Snapshot {
        kind: SnapshotKind::QStar,
        encoding: encoding.to_string(),
        gamma,
        updates: 0,
        shape: vec![q.len(), NUM_ACTIONS],
        rows: q.iter().map(|r| float_row(r)).collect(),
    }
}

pub fn load_qstar(s: &Snapshot) -> Result<Vec<QValues>> {
    s.expect_kind(SnapshotKind::QStar)?;
    if s.shape.len() != 2 || s.shape[1] != NUM_ACTIONS || s.shape[0] != s.rows.len() {
        return Err(Error::shape(format!("[{}, {NUM_ACTIONS}]", s.rows.len()), format!("{:?}", s.shape)));
    }
    s.rows
        .iter()
        .map(|r| {
            let v = parse_floats(r, NUM_ACTIONS)?;
            Ok([v[0], v[1], v[2], v[3]])
        })
        .collect()
}

fn obs_token(o: &Obs) -> String {
    match o {
        Obs::Index(i) => format!("i:{i}"),
        Obs::OneHot { dim, active } => {
            let idx: Vec<String> = active.iter().map(|i| i.to_string()).collect();
            format!("h:{dim}:{}", idx.join(","))
        }
    }
}

fn parse_obs(tok: &str) -> Result<Obs> {
    if let Some(i) = tok.strip_prefix("i:") {
        return Ok(Obs::Index(parse_num(i, "observation index")?));
    }
    if let Some(rest) = tok.strip_prefix("h:") {
        let (dim, list) = rest.split_once(':').ok_or_else(|| Error::Format(format!("bad observation `{tok}`")))?;
        let active = if list.is_empty() {
            Vec::new()
        } else {
            list.split(',').map(|i| parse_num::<u32>(i, "observation bit")).collect::<Result<Vec<_>>>()?
        };
        return Ok(Obs::OneHot { dim: parse_num(dim, "observation width")?, active });
    }
    Err(Error::Format(format!("bad observation `{tok}`")))
}

/// Replay contents oldest first, one transition per row:
/// `state action r_env r_task next_state terminal`.
pub fn replay_snapshot(buf: &ReplayBuffer<Obs>, encoding: &str, gamma: f64) -> Snapshot {
    Snapshot {
        kind: SnapshotKind::Replay,
        encoding: encoding.to_string(),
        gamma,
        updates: buf.inserted(),
        shape: vec![buf.capacity(), buf.len()],
        rows: buf
            .iter()
            .map(|t| {
                format!(
                    "{} {} {:?} {:?} {} {}",
                    obs_token(&t.state),
                    t.action.index(),
                    t.reward.r_env,
                    t.reward.r_task,
                    obs_token(&t.next_state),
                    u8::from(t.terminal)
                )
            })
            .collect(),
    }
}

pub fn load_replay(s: &Snapshot) -> Result<ReplayBuffer<Obs>> {
    s.expect_kind(SnapshotKind::Replay)?;
    let [capacity, len] = s.shape[..] else {
        return Err(Error::shape("[capacity, len]", format!("{:?}", s.shape)));
    };
    if len != s.rows.len() || len > capacity {
        return Err(Error::Format(format!("replay shape {:?} disagrees with {} rows", s.shape, s.rows.len())));
    }
    let mut buf = ReplayBuffer::new(capacity.max(1))?;
    for (line, row) in s.rows.iter().enumerate() {
        let parts: Vec<&str> = row.split_whitespace().collect();
        let [state, action, r_env, r_task, next, terminal] = parts[..] else {
            return Err(Error::Format(format!("replay row {} has {} fields, expected 6", line + 1, parts.len())));
        };
        let terminal = match terminal {
            "0" => false,
            "1" => true,
            other => return Err(Error::Format(format!("bad terminal flag `{other}`"))),
        };
        buf.push(Transition {
            state: parse_obs(state)?,
            action: ActionId::from_index(parse_num(action, "action")?)
                .map_err(|e| Error::Format(e.to_string()))?,
            reward: DecomposedReward::new(parse_num(r_env, "r_env")?, parse_num(r_task, "r_task")?),
            next_state: parse_obs(next)?,
            terminal,
        });
    }
    Ok(buf)
}

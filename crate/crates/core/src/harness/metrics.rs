//! Evaluation records, the metrics CSV format, and per-seed aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, sample_sd};

pub const CSV_HEADER: &str =
    "method,seed,phase,episode,mean_return,mean_length,crash_rate,fixed_state_mean_q,epsilon,wall_clock_ms";

/// One evaluation point of one (method, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub seed: u64,
    pub phase: u8,
    pub episode: usize,
    pub mean_return: f64,
    pub mean_length: f64,
    pub crash_rate: f64,
    pub fixed_state_mean_q: f64,
    pub epsilon: f64,
    pub wall_clock_ms: u64,
}

/// The numeric metric columns, in CSV order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    MeanReturn,
    MeanLength,
    CrashRate,
    FixedStateMeanQ,
    Epsilon,
}

impl Metric {
    pub const ALL: [Metric; 5] =
        [Metric::MeanReturn, Metric::MeanLength, Metric::CrashRate, Metric::FixedStateMeanQ, Metric::Epsilon];

    pub fn column(self) -> &'static str {
        match self {
            Metric::MeanReturn => "mean_return",
            Metric::MeanLength => "mean_length",
            Metric::CrashRate => "crash_rate",
            Metric::FixedStateMeanQ => "fixed_state_mean_q",
            Metric::Epsilon => "epsilon",
        }
    }
}

impl MetricsRow {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::MeanReturn => self.mean_return,
            Metric::MeanLength => self.mean_length,
            Metric::CrashRate => self.crash_rate,
            Metric::FixedStateMeanQ => self.fixed_state_mean_q,
            Metric::Epsilon => self.epsilon,
        }
    }

    fn sort_key(&self) -> (&str, u64, u8, usize) {
        (&self.method, self.seed, self.phase, self.episode)
    }
}

/// Deterministic order: method, seed, phase, episode.
pub fn sort_rows(rows: &mut [MetricsRow]) {
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

pub fn to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:?},{:?},{:?},{:?},{:?},{}",
            r.method,
            r.seed,
            r.phase,
            r.episode,
            r.mean_return,
            r.mean_length,
            r.crash_rate,
            r.fixed_state_mean_q,
            r.epsilon,
            r.wall_clock_ms
        );
    }
    out
}

/// Parse a metrics CSV. Errors name the offending 1-based line.
pub fn parse_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == CSV_HEADER => {}
        Some(h) => return Err(Error::Format(format!("line 1: unexpected header `{h}`"))),
        None => return Err(Error::Format("line 1: empty file".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 10 {
            return Err(Error::Format(format!("line {lineno}: expected 10 fields, found {}", f.len())));
        }
        let num = |k: usize| -> Result<f64> {
            f[k].parse().map_err(|_| Error::Format(format!("line {lineno}: bad number `{}`", f[k])))
        };
        let int = |k: usize| -> Result<u64> {
            f[k].parse().map_err(|_| Error::Format(format!("line {lineno}: bad integer `{}`", f[k])))
        };
        if f[0].is_empty() {
            return Err(Error::Format(format!("line {lineno}: empty method")));
        }
        rows.push(MetricsRow {
            method: f[0].to_string(),
            seed: int(1)?,
            phase: int(2)? as u8,
            episode: int(3)? as usize,
            mean_return: num(4)?,
            mean_length: num(5)?,
            crash_rate: num(6)?,
            fixed_state_mean_q: num(7)?,
            epsilon: num(8)?,
            wall_clock_ms: int(9)?,
        });
    }
    Ok(rows)
}

/// CSV with the wall-clock column dropped, for byte comparisons.
pub fn strip_wall_clock(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Mean and sample standard deviation of one metric at one evaluation point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Band {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregatePoint {
    pub method: String,
    pub phase: u8,
    pub episode: usize,
    pub n_seeds: usize,
    pub bands: BTreeMap<Metric, Band>,
}

/// Pointwise mean and sample sd across seeds, per (method, phase, episode).
/// Every seed of a method must cover the same evaluation points.
pub fn aggregate_seeds(rows: &[MetricsRow]) -> Result<Vec<AggregatePoint>> {
    // (method, phase) -> seed -> episode -> row
    let mut groups: BTreeMap<(&str, u8), BTreeMap<u64, BTreeMap<usize, &MetricsRow>>> = BTreeMap::new();
    for r in rows {
        let per_seed = groups.entry((&r.method, r.phase)).or_default().entry(r.seed).or_default();
        if per_seed.insert(r.episode, r).is_some() {
            return Err(Error::Usage(format!(
                "duplicate row for {} seed {} episode {}",
                r.method, r.seed, r.episode
            )));
        }
    }
    let mut out = Vec::new();
    for ((method, phase), seeds) in groups {
        let mut iter = seeds.values();
        let first: Vec<usize> = iter.next().map(|m| m.keys().copied().collect()).unwrap_or_default();
        for (seed, eps) in &seeds {
            if !eps.keys().copied().eq(first.iter().copied()) {
                return Err(Error::Usage(format!(
                    "ragged input: {method} seed {seed} has different evaluation points"
                )));
            }
        }
        for ep in first {
            let bands = Metric::ALL
                .into_iter()
                .map(|m| {
                    let xs: Vec<f64> = seeds.values().map(|s| s[&ep].get(m)).collect();
                    (m, Band { mean: mean(&xs), sd: sample_sd(&xs) })
                })
                .collect();
            out.push(AggregatePoint {
                method: method.to_string(),
                phase,
                episode: ep,
                n_seeds: seeds.len(),
                bands,
            });
        }
    }
    Ok(out)
}

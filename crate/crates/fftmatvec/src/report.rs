//! CSV reports.
//!
//! Phase timings: `matvec,phase,mean_s,min_s,max_s`, five phase rows and a
//! `total` row per matvec. Sweeps: `config,mean_s,min_s,max_s,rel_error`.
//! Readers skip lines starting with `#`, which writers may use for context.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::MatvecKind;
use crate::precision::Phase;
use crate::preclab::{ConfigResult, PhaseStats};

pub const PHASE_HEADER: &str = "matvec,phase,mean_s,min_s,max_s";
pub const SWEEP_HEADER: &str = "config,mean_s,min_s,max_s,rel_error";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub matvec: String,
    pub phase: String,
    pub mean_s: f64,
    pub min_s: f64,
    pub max_s: f64,
}

/// Six rows for one matvec: the phases in order, then `total`.
pub fn phase_rows(kind: MatvecKind, stats: &PhaseStats) -> Vec<PhaseRow> {
    let row = |phase: &str, t: &crate::preclab::TimingStats| PhaseRow {
        matvec: kind.name().to_string(),
        phase: phase.to_string(),
        mean_s: t.mean_s,
        min_s: t.min_s,
        max_s: t.max_s,
    };
    let mut rows: Vec<PhaseRow> = Phase::ALL.iter().map(|p| row(p.name(), &stats.phases[p.index()])).collect();
    rows.push(row("total", &stats.total));
    rows
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn from_csv<T: for<'de> Deserialize<'de>>(text: &str, header: &str) -> Result<Vec<T>> {
    let body: String = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .flat_map(|l| [l, "\n"])
        .collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let found: Vec<&str> = r.headers()?.iter().collect();
    if found.join(",") != header {
        return Err(Error::InvalidInput(format!("expected CSV header {header:?}, found {:?}", found.join(","))));
    }
    Ok(r.deserialize().collect::<Result<Vec<T>, _>>()?)
}

/// Always emits the header, even for no rows.
pub fn write_phase_csv(rows: &[PhaseRow]) -> Result<String> {
    if rows.is_empty() {
        return Ok(format!("{PHASE_HEADER}\n"));
    }
    to_csv(rows)
}

pub fn read_phase_csv(text: &str) -> Result<Vec<PhaseRow>> {
    from_csv(text, PHASE_HEADER)
}

#[derive(Serialize, Deserialize)]
struct SweepRow {
    config: String,
    mean_s: f64,
    min_s: f64,
    max_s: f64,
    rel_error: f64,
}

pub fn write_sweep_csv(rows: &[ConfigResult]) -> Result<String> {
    if rows.is_empty() {
        return Ok(format!("{SWEEP_HEADER}\n"));
    }
    let rows: Vec<SweepRow> = rows
        .iter()
        .map(|r| SweepRow {
            config: r.config.to_string(),
            mean_s: r.mean_s,
            min_s: r.min_s,
            max_s: r.max_s,
            rel_error: r.rel_error,
        })
        .collect();
    to_csv(&rows)
}

pub fn read_sweep_csv(text: &str) -> Result<Vec<ConfigResult>> {
    from_csv::<SweepRow>(text, SWEEP_HEADER)?
        .into_iter()
        .map(|r| {
            Ok(ConfigResult {
                config: r.config.parse()?,
                mean_s: r.mean_s,
                min_s: r.min_s,
                max_s: r.max_s,
                rel_error: r.rel_error,
            })
        })
        .collect()
}

/// One `# key=value ...` annotated CSV section of a multi-part report.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Block {
    pub meta: BTreeMap<String, String>,
    pub csv: String,
}

impl Block {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(String::as_str)
    }
}

/// Splits `text` at comment lines carrying `key=value` pairs.
///
/// Each such comment starts a new block whose metadata is the union of the
/// comment lines preceding its CSV. Comments without `=` are ignored.
pub fn split_blocks(text: &str) -> Vec<Block> {
    let mut blocks: Vec<Block> = Vec::new();
    let mut cur = Block::default();
    let mut in_csv = false;
    for line in text.lines() {
        if let Some(comment) = line.trim_start().strip_prefix('#') {
            let pairs: Vec<(&str, &str)> = comment.split_whitespace().filter_map(|kv| kv.split_once('=')).collect();
            if pairs.is_empty() {
                continue;
            }
            if in_csv {
                blocks.push(std::mem::take(&mut cur));
                in_csv = false;
            }
            cur.meta.extend(pairs.into_iter().map(|(k, v)| (k.to_string(), v.to_string())));
        } else if !line.trim().is_empty() {
            in_csv = true;
            cur.csv.push_str(line);
            cur.csv.push('\n');
        }
    }
    if in_csv || !cur.meta.is_empty() {
        blocks.push(cur);
    }
    blocks
}

/// Fixed-width table of phase rows for terminals.
pub fn phase_table(rows: &[PhaseRow]) -> String {
    let mut out = format!("{:<8} {:<7} {:>12} {:>12} {:>12}\n", "matvec", "phase", "mean (s)", "min (s)", "max (s)");
    for r in rows {
        out += &format!("{:<8} {:<7} {:>12.6e} {:>12.6e} {:>12.6e}\n", r.matvec, r.phase, r.mean_s, r.min_s, r.max_s);
    }
    out
}

/// Fixed-width table of sweep rows, marking `chosen` with `*`.
pub fn sweep_table(rows: &[ConfigResult], chosen: Option<crate::precision::PrecisionConfig>) -> String {
    let mut out = format!("  {:<6} {:>12} {:>12} {:>12} {:>12}\n", "config", "mean (s)", "min (s)", "max (s)", "rel_error");
    for r in rows {
        let mark = if Some(r.config) == chosen { '*' } else { ' ' };
        out += &format!(
            "{mark} {:<6} {:>12.6e} {:>12.6e} {:>12.6e} {:>12.4e}\n",
            r.config.to_string(),
            r.mean_s,
            r.min_s,
            r.max_s,
            r.rel_error
        );
    }
    out
}

//! Plain-text file formats.
//!
//! Buffers, policies, and measures serialize to line-oriented text with one
//! self-describing record per line. Floats are printed with Rust's shortest
//! round-trip formatting, so `read(write(x))` reproduces `x` bit for bit
//! and regenerated files are byte-identical under equal seeds.
//!
//! Buffer files:
//!
//! ```text
//! buffer v1 env=pointmass2d seed=7 policies=0 reward=none
//! s=0,0 a=0.5,-0.25 r=0 s2=0.05,-0.025 t=0 done=0 pid=0
//! ```
//!
//! Episode boundaries are implicit: a record with `t=0` starts an episode.
//!
//! Policy files:
//!
//! ```text
//! policy v1 id=3 state_dim=2 action_dim=2 bandwidth=2.5 features=9
//! rbf c=-3.3333333333333335,-3.3333333333333335 w=0.125,-0.5
//! ...
//! log_std=-1.6094379124341003,-1.6094379124341003
//! ```
//!
//! Config files are `key = value` lines with `#` comments.

use crate::env::{Buffer, Transition};
use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::transport::{EmpiricalMeasure, SpaceTag};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_vec(s: &str, line: usize) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.parse::<f64>().map_err(|e| Error::Parse { line, msg: format!("bad float {t:?}: {e}") })
        })
        .collect()
}

/// Splits `key=value` tokens of a record line into a map.
fn record_fields(line_text: &str, line: usize) -> Result<BTreeMap<&str, &str>> {
    let mut out = BTreeMap::new();
    for tok in line_text.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, msg: format!("expected key=value, got {tok:?}") })?;
        out.insert(k, v);
    }
    Ok(out)
}

fn require<'a>(
    fields: &BTreeMap<&str, &'a str>,
    key: &str,
    line: usize,
) -> Result<&'a str> {
    fields
        .get(key)
        .copied()
        .ok_or_else(|| Error::Parse { line, msg: format!("missing field {key}") })
}

// ---------------------------------------------------------------------------
// buffers

pub fn buffer_to_string(buf: &Buffer) -> String {
    let mut out = String::with_capacity(64 * (buf.len() + 1));
    let policies =
        buf.policy_ids.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",");
    let _ = writeln!(
        out,
        "buffer v1 env={} seed={} policies={} reward={}",
        buf.env_id, buf.seed, policies, buf.reward_desc
    );
    for tr in &buf.transitions {
        let _ = writeln!(
            out,
            "s={} a={} r={} s2={} t={} done={} pid={}",
            fmt_vec(&tr.s),
            fmt_vec(&tr.a),
            tr.r,
            fmt_vec(&tr.s2),
            tr.t,
            u8::from(tr.done),
            tr.policy_id
        );
    }
    out
}

pub fn buffer_from_str(text: &str) -> Result<Buffer> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, msg: "empty buffer file".into() })?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("buffer") || parts.next() != Some("v1") {
        return Err(Error::Parse { line: 1, msg: "expected `buffer v1` header".into() });
    }
    let fields = record_fields(&header["buffer v1".len()..], 1)?;
    let env_id = require(&fields, "env", 1)?.to_string();
    let seed: u64 = require(&fields, "seed", 1)?
        .parse()
        .map_err(|e| Error::Parse { line: 1, msg: format!("bad seed: {e}") })?;
    let policy_ids: Vec<usize> = {
        let raw = require(&fields, "policies", 1)?;
        if raw.is_empty() {
            vec![]
        } else {
            raw.split(',')
                .map(|t| {
                    t.parse().map_err(|e| Error::Parse { line: 1, msg: format!("bad policy id: {e}") })
                })
                .collect::<Result<_>>()?
        }
    };
    let reward_desc = require(&fields, "reward", 1)?.to_string();

    let mut transitions = Vec::new();
    let mut episode_starts = Vec::new();
    for (idx, text_line) in lines {
        let line = idx + 1;
        if text_line.trim().is_empty() {
            continue;
        }
        let f = record_fields(text_line, line)?;
        let t: usize = require(&f, "t", line)?
            .parse()
            .map_err(|e| Error::Parse { line, msg: format!("bad t: {e}") })?;
        if t == 0 {
            episode_starts.push(transitions.len());
        }
        transitions.push(Transition {
            s: parse_vec(require(&f, "s", line)?, line)?,
            a: parse_vec(require(&f, "a", line)?, line)?,
            r: require(&f, "r", line)?
                .parse()
                .map_err(|e| Error::Parse { line, msg: format!("bad r: {e}") })?,
            s2: parse_vec(require(&f, "s2", line)?, line)?,
            t,
            done: require(&f, "done", line)? == "1",
            policy_id: require(&f, "pid", line)?
                .parse()
                .map_err(|e| Error::Parse { line, msg: format!("bad pid: {e}") })?,
        });
    }
    if !transitions.is_empty() && episode_starts.first() != Some(&0) {
        return Err(Error::Parse { line: 2, msg: "first record must start an episode (t=0)".into() });
    }
    Ok(Buffer { env_id, transitions, episode_starts, seed, policy_ids, reward_desc })
}

pub fn write_buffer(buf: &Buffer, path: &Path) -> Result<()> {
    std::fs::write(path, buffer_to_string(buf))?;
    Ok(())
}

pub fn read_buffer(path: &Path) -> Result<Buffer> {
    buffer_from_str(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// policies

pub fn policy_to_string(p: &PolicyParams) -> String {
    let state_dim = p.centers.first().map_or(0, |c| c.len());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "policy v1 id={} state_dim={} action_dim={} bandwidth={} features={}",
        p.id,
        state_dim,
        p.action_dim(),
        p.bandwidth,
        p.n_features()
    );
    for (c, w) in p.centers.iter().zip(&p.weights) {
        let _ = writeln!(out, "rbf c={} w={}", fmt_vec(c), fmt_vec(w));
    }
    let _ = writeln!(out, "log_std={}", fmt_vec(&p.log_std));
    out
}

pub fn policy_from_str(text: &str) -> Result<PolicyParams> {
    let mut lines = text.lines().enumerate();
    let (_, header) =
        lines.next().ok_or_else(|| Error::Parse { line: 1, msg: "empty policy file".into() })?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("policy") || parts.next() != Some("v1") {
        return Err(Error::Parse { line: 1, msg: "expected `policy v1` header".into() });
    }
    let fields = record_fields(&header["policy v1".len()..], 1)?;
    let id: usize = require(&fields, "id", 1)?
        .parse()
        .map_err(|e| Error::Parse { line: 1, msg: format!("bad id: {e}") })?;
    let state_dim: usize = require(&fields, "state_dim", 1)?
        .parse()
        .map_err(|e| Error::Parse { line: 1, msg: format!("bad state_dim: {e}") })?;
    let action_dim: usize = require(&fields, "action_dim", 1)?
        .parse()
        .map_err(|e| Error::Parse { line: 1, msg: format!("bad action_dim: {e}") })?;
    let bandwidth: f64 = require(&fields, "bandwidth", 1)?
        .parse()
        .map_err(|e| Error::Parse { line: 1, msg: format!("bad bandwidth: {e}") })?;
    let n_features: usize = require(&fields, "features", 1)?
        .parse()
        .map_err(|e| Error::Parse { line: 1, msg: format!("bad features: {e}") })?;

    let mut centers = Vec::with_capacity(n_features);
    let mut weights = Vec::with_capacity(n_features);
    let mut log_std = None;
    for (idx, text_line) in lines {
        let line = idx + 1;
        if text_line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = text_line.strip_prefix("rbf ") {
            let f = record_fields(rest, line)?;
            let c = parse_vec(require(&f, "c", line)?, line)?;
            let w = parse_vec(require(&f, "w", line)?, line)?;
            if c.len() != state_dim || w.len() != action_dim {
                return Err(Error::Parse { line, msg: "rbf row dims mismatch header".into() });
            }
            centers.push(c);
            weights.push(w);
        } else if let Some(rest) = text_line.strip_prefix("log_std=") {
            log_std = Some(parse_vec(rest, line)?);
        } else {
            return Err(Error::Parse { line, msg: format!("unexpected line {text_line:?}") });
        }
    }
    let log_std =
        log_std.ok_or_else(|| Error::Parse { line: 0, msg: "missing log_std line".into() })?;
    if centers.len() != n_features || log_std.len() != action_dim {
        return Err(Error::Parse { line: 0, msg: "policy body does not match header".into() });
    }
    let p = PolicyParams { centers, bandwidth, weights, log_std, id };
    p.validate()?;
    Ok(p)
}

pub fn write_policy(p: &PolicyParams, path: &Path) -> Result<()> {
    std::fs::write(path, policy_to_string(p))?;
    Ok(())
}

pub fn read_policy(path: &Path) -> Result<PolicyParams> {
    policy_from_str(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// measures

pub fn measure_to_string(m: &EmpiricalMeasure) -> String {
    let space = match m.space {
        SpaceTag::State => "state",
        SpaceTag::StateAction => "state-action",
        SpaceTag::Projected => "projected",
    };
    let mut out = String::new();
    let _ = writeln!(out, "measure v1 space={space} dim={} points={}", m.dim(), m.n());
    for i in 0..m.n() {
        let _ = writeln!(out, "p={} w={}", fmt_vec(m.point(i)), m.weights()[i]);
    }
    out
}

pub fn write_measure(m: &EmpiricalMeasure, path: &Path) -> Result<()> {
    std::fs::write(path, measure_to_string(m))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// key = value config files

/// Parsed config file: a flat ordered key-value map.
#[derive(Debug, Clone, Default)]
pub struct KvConfig {
    entries: Vec<(String, String)>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let (k, v) = stripped.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected `key = value`, got {stripped:?}"),
            })?;
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(KvConfig { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        // last occurrence wins, so later lines override earlier ones
        self.entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("config {key}={v}: {e}"))),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("config {key}={v}: {e}"))),
        }
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("config {key}={v}: {e}"))),
        }
    }

    pub fn get_str(&self, key: &str, default: &str) -> String {
        self.get(key).unwrap_or(default).to_string()
    }
}

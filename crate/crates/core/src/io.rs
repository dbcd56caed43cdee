//! Data ingestion, CSV outputs and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{quantities, PosteriorSummary};
use crate::config::DataKind;
use crate::ctmc::{CtmcPath, Jump, PathSkeleton};
use crate::epidemic::disaggregate_weekly;
use crate::error::{Error, Result};
use crate::likelihood::PointPattern;
use crate::mcmc::TraceRecord;
use crate::model::{ModelSpec, QParams};
use crate::par::ChainRun;

fn data_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Data(format!("{}:{}: {}", path.display(), line, msg))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Event times, one per line. Unsorted input is sorted; negative times and
/// times past `horizon` are rejected.
pub fn parse_event_times(text: &str, horizon: f64, path: &Path) -> Result<PointPattern> {
    let mut t = Vec::new();
    for (n, l) in content_lines(text) {
        let v: f64 = l
            .parse()
            .map_err(|_| data_err(path, n, format!("not a number: {l:?}")))?;
        if !(v >= 0.0) {
            return Err(data_err(path, n, format!("negative event time {v}")));
        }
        if v > horizon {
            return Err(data_err(path, n, format!("event time {v} beyond horizon {horizon}")));
        }
        t.push(v);
    }
    PointPattern::new(t, horizon)
}

/// Weekly counts as `day,count` rows (an optional header is skipped);
/// cases are spread uniformly within each week.
pub fn parse_weekly_counts(text: &str, horizon: f64, seed: u64, path: &Path) -> Result<PointPattern> {
    let mut rows = Vec::new();
    for (n, l) in content_lines(text) {
        let mut it = l.split(',').map(str::trim);
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(data_err(path, n, "expected `day,count`"));
        };
        let (Ok(day), Ok(count)) = (a.parse::<f64>(), b.parse::<u64>()) else {
            if rows.is_empty() && a.parse::<f64>().is_err() {
                continue;
            }
            return Err(data_err(path, n, format!("cannot parse {l:?}")));
        };
        rows.push((day, count));
    }
    PointPattern::new(disaggregate_weekly(&rows, horizon, seed)?, horizon)
}

pub fn ingest(path: &Path, kind: DataKind, horizon: f64, seed: u64) -> Result<PointPattern> {
    let text = fs::read_to_string(path)?;
    match kind {
        DataKind::EventTimes => parse_event_times(&text, horizon, path),
        DataKind::WeeklyCounts => parse_weekly_counts(&text, horizon, seed, path),
    }
}

pub fn write_events(path: &Path, t: &[f64]) -> Result<()> {
    let mut s = String::with_capacity(t.len() * 20);
    for v in t {
        writeln!(s, "{v}").expect("string write");
    }
    fs::write(path, s)?;
    Ok(())
}

/// Skeleton as `time,state,r` rows, states numbered from 1.
pub fn skeleton_csv(skel: &PathSkeleton) -> String {
    let mut s = String::from("time,state,r\n");
    let p = &skel.path;
    let r = &skel.starting_values;
    writeln!(s, "0,{},{}", p.v0 + 1, r[0]).expect("string write");
    for (j, r) in p.jumps.iter().zip(&r[1..]) {
        writeln!(s, "{},{},{}", j.time, j.state + 1, r).expect("string write");
    }
    s
}

pub fn parse_skeleton_csv(text: &str) -> Result<PathSkeleton> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<(f64, usize, f64)>() {
        rows.push(rec?);
    }
    let Some(&(_, v0, r0)) = rows.first() else {
        return Err(Error::Data("empty skeleton file".into()));
    };
    if rows.iter().any(|r| r.1 == 0) {
        return Err(Error::Data("states are numbered from 1".into()));
    }
    let mut r = vec![r0];
    let mut jumps = Vec::new();
    for &(time, state, rv) in &rows[1..] {
        jumps.push(Jump { time, state: state - 1 });
        r.push(rv);
    }
    PathSkeleton::new(CtmcPath { v0: v0 - 1, jumps }, r)
}

const TRACE_HEAD: [&str; 7] = [
    "iteration",
    "log_lik",
    "final_state",
    "last_jump",
    "last_r",
    "block_accept",
    "n_blocks",
];

/// One row per retained draw.
pub fn trace_csv(spec: &ModelSpec, records: &[TraceRecord]) -> String {
    let q = quantities(spec, records);
    let mut s = String::new();
    let names: Vec<&str> = TRACE_HEAD
        .iter()
        .copied()
        .chain(q.iter().map(|(n, _)| n.as_str()))
        .collect();
    s.push_str(&names.join(","));
    s.push('\n');
    for (i, r) in records.iter().enumerate() {
        write!(
            s,
            "{},{},{},{},{},{},{}",
            r.iteration,
            r.log_lik,
            r.final_state + 1,
            r.last_jump,
            r.last_r,
            r.block_accept,
            r.n_blocks
        )
        .expect("string write");
        for (_, v) in &q {
            write!(s, ",{}", v[i]).expect("string write");
        }
        s.push('\n');
    }
    s
}

/// Reads a trace back into records carrying enough state for prediction:
/// parameters, θ, `T1` and the final segment (the earlier path is not
/// stored).
pub fn parse_trace_csv(spec: &ModelSpec, text: &str) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let head: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| {
        head.iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("trace has no column {name:?}")))
    };
    let mut psi_cols = Vec::new();
    for (k, f) in spec.forms.iter().enumerate() {
        psi_cols.push(
            f.param_names()
                .iter()
                .map(|n| col(&format!("psi{}_{}", k + 1, n)))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let theta_cols = (0..spec.k())
        .map(|k| col(&format!("theta{}", k + 1)))
        .collect::<Result<Vec<_>>>()?;
    let trans_cols = (0..spec.k())
        .map(|k| {
            spec.state_map
                .trans_targets(k)
                .iter()
                .map(|t| col(&format!("p{}_{}", k + 1, t + 1)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let c = |n: &str| col(n);
    let (ci, cl, cf, cj, cr, cb, cn) = (
        c("iteration")?,
        c("log_lik")?,
        c("final_state")?,
        c("last_jump")?,
        c("last_r")?,
        c("block_accept")?,
        c("n_blocks")?,
    );
    let (cnj, ct1, clp) = (c("n_jumps")?, c("t1")?, c("log_post")?);
    let e = spec.state_map.e;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let f = |i: usize| -> Result<f64> {
            row.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Data(format!("bad trace value in column {}", head[i])))
        };
        let final_state = f(cf)? as usize;
        if final_state == 0 || final_state > e {
            return Err(Error::Data(format!("final state {final_state} out of range")));
        }
        let final_state = final_state - 1;
        let last_jump = f(cj)?;
        let last_r = f(cr)?;
        let skeleton = if last_jump > 0.0 {
            PathSkeleton::new(
                CtmcPath {
                    v0: (final_state + 1) % e,
                    jumps: vec![Jump { time: last_jump, state: final_state }],
                },
                vec![f64::NAN, last_r],
            )?
        } else {
            PathSkeleton::new(CtmcPath::constant(final_state), vec![last_r])?
        };
        out.push(TraceRecord {
            iteration: f(ci)? as usize,
            log_post: f(clp)?,
            log_lik: f(cl)?,
            theta: QParams {
                theta_rates: theta_cols.iter().map(|&i| f(i)).collect::<Result<_>>()?,
                theta_trans: trans_cols
                    .iter()
                    .map(|cs| cs.iter().map(|&i| f(i)).collect::<Result<_>>())
                    .collect::<Result<_>>()?,
            },
            psi: psi_cols
                .iter()
                .map(|cs| cs.iter().map(|&i| f(i)).collect::<Result<_>>())
                .collect::<Result<_>>()?,
            n_jumps: f(cnj)? as usize,
            t1: f(ct1)?,
            final_state,
            last_jump,
            last_r,
            block_accept: f(cb)?,
            n_blocks: f(cn)? as usize,
            skeleton,
        });
    }
    Ok(out)
}

pub fn summary_csv(s: &PosteriorSummary) -> String {
    let mut out = String::from("param,true,mean,sd,ci_lo,ci_hi,ess\n");
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    for q in &s.quantities {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            q.name,
            opt(q.truth),
            q.stat.mean,
            q.stat.sd,
            q.stat.lo,
            q.stat.hi,
            opt(q.ess)
        )
        .expect("string write");
    }
    out
}

pub fn if_grid_csv(s: &PosteriorSummary) -> String {
    let mut out = String::from("time,mean,lo,hi\n");
    for (t, m, lo, hi) in &s.if_grid {
        writeln!(out, "{t},{m},{lo},{hi}").expect("string write");
    }
    out
}

pub fn acceptance_csv(runs: &[ChainRun]) -> String {
    let mut out = String::from("chain,update,attempts,accepts,rate\n");
    for r in runs {
        for a in &r.accept {
            writeln!(out, "{},{},{},{},{}", r.chain + 1, a.name, a.attempts, a.accepts, a.rate())
                .expect("string write");
        }
        writeln!(out, "{},final_blocks,,,{}", r.chain + 1, r.n_blocks).expect("string write");
    }
    out
}

/// Everything needed to reproduce a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: PathBuf,
    pub data: PathBuf,
    pub data_kind: DataKind,
    pub seed: u64,
    pub chains: usize,
    /// Chain `i` uses ChaCha8 stream `i` of the master seed.
    pub chain_streams: Vec<u64>,
    pub out: PathBuf,
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// SHA-256 of the config bytes followed by the data bytes.
    pub input_hash: String,
}

pub fn input_hash(config: &[u8], data: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update((config.len() as u64).to_le_bytes());
    h.update(config);
    h.update(data);
    h.finalize().iter().fold(String::new(), |mut s, b| {
        write!(s, "{b:02x}").expect("string write");
        s
    })
}

impl RunManifest {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Data(format!("manifest: {e}")))
    }
}

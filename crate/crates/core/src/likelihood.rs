//! Poisson-process likelihood, path densities and sufficient statistics.

use nalgebra::DMatrix;

use crate::ctmc::{AugmentedPath, CtmcPath, PathSkeleton};
use crate::error::{Error, Result};
use crate::intensity::{form_integral, form_range, form_value, Intensity};
use crate::model::{FormKind, ModelSpec, StateMap};

/// Log of zero probability.
pub const LOG_ZERO: f64 = f64::NEG_INFINITY;

/// Sorted event times on `[0, S]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    pub times: Vec<f64>,
    pub horizon: f64,
}

impl PointPattern {
    pub fn new(mut times: Vec<f64>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        times.sort_by(|a, b| a.total_cmp(b));
        if let Some(&t) = times.iter().find(|&&t| !(0.0..=horizon).contains(&t)) {
            return Err(Error::OutOfWindow { time: t, horizon });
        }
        Ok(Self { times, horizon })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index range of events in `[a, b)`, or `[a, b]` when `b` is the horizon.
    pub fn range(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let lo = self.times.partition_point(|&t| t < a);
        let hi = if b >= self.horizon {
            self.times.len()
        } else {
            self.times.partition_point(|&t| t < b)
        };
        lo..hi.max(lo)
    }
}

/// Log likelihood factor of a window `[a, b)` whose IF is form `kind` started
/// at `delta` with value `r`. Returns [`LOG_ZERO`] if the IF is negative
/// anywhere on the window or vanishes at an event.
#[inline]
pub fn window_log_lik(
    kind: FormKind,
    shape: &[f64],
    r: f64,
    delta: f64,
    a: f64,
    b: f64,
    events: &[f64],
) -> f64 {
    let (lo, _) = form_range(kind, shape, r, delta, a, b);
    if !(lo >= 0.0) {
        return LOG_ZERO;
    }
    let mut out = -form_integral(kind, shape, r, delta, a, b);
    match kind {
        FormKind::Constant => {
            if !events.is_empty() {
                if r <= 0.0 {
                    return LOG_ZERO;
                }
                out += events.len() as f64 * r.ln();
            }
        }
        FormKind::Exponential => {
            if !events.is_empty() {
                if r <= 0.0 {
                    return LOG_ZERO;
                }
                let rho = shape[0];
                let sum: f64 = events.iter().map(|&t| t - delta).sum();
                out += events.len() as f64 * r.ln() + rho * sum;
            }
        }
        _ => {
            for &t in events {
                let v = form_value(kind, shape, r, delta, t);
                if !(v > 0.0) {
                    return LOG_ZERO;
                }
                out += v.ln();
            }
        }
    }
    if out.is_nan() {
        LOG_ZERO
    } else {
        out
    }
}

/// `-∫λ + Σ log λ(t_n)` for an IF over the whole window.
pub fn log_likelihood_of(y: &PointPattern, f: &Intensity) -> f64 {
    let mut out = 0.0;
    for seg in f.segments() {
        let ev = &y.times[y.range(seg.start, seg.end)];
        let l = window_log_lik(seg.kind, seg.shape, seg.r, seg.start, seg.start, seg.end, ev);
        if l == LOG_ZERO {
            return LOG_ZERO;
        }
        out += l;
    }
    out
}

/// Log likelihood of `y` under a skeleton and the parameters held in `spec`.
pub fn log_likelihood(y: &PointPattern, skel: &PathSkeleton, spec: &ModelSpec) -> Result<f64> {
    if (y.horizon - spec.horizon).abs() > 1e-12 * spec.horizon {
        return Err(Error::Dimension(format!(
            "data horizon {} differs from model horizon {}",
            y.horizon, spec.horizon
        )));
    }
    let params = spec.initial_params();
    let f = Intensity {
        forms: &spec.forms,
        params: &params,
        h: &spec.state_map.h,
        skel,
        horizon: spec.horizon,
    };
    Ok(log_likelihood_of(y, &f))
}

/// Log of the factor `L_ℓ` for a window of an augmented path, where the
/// segment containing it started at `delta` with value `r` in `state`.
#[allow(clippy::too_many_arguments)]
pub fn segment_factor(
    y: &PointPattern,
    spec: &ModelSpec,
    params: &[Vec<f64>],
    state: usize,
    delta: f64,
    r: f64,
    a: f64,
    b: f64,
) -> f64 {
    let k = spec.state_map.h[state];
    let f = &spec.forms[k];
    let shape = f.split_params(&params[k]).1;
    window_log_lik(f.kind, shape, r, delta, a, b, &y.times[y.range(a, b)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats {
    /// Visits per form, counting the initial segment and self-jumps.
    pub visits: Vec<usize>,
    /// Non-virtual jumps out of each form.
    pub departures: Vec<usize>,
    /// Occupation time per form.
    pub tau: Vec<f64>,
    /// `transitions[k1][k2]`: jumps from form k1 to form k2.
    pub transitions: Vec<Vec<usize>>,
    /// Events per form.
    pub n: Vec<usize>,
}

pub fn sufficient_stats(y: &PointPattern, path: &CtmcPath, m: &StateMap) -> SuffStats {
    let k = m.k;
    let mut s = SuffStats {
        visits: vec![0; k],
        departures: vec![0; k],
        tau: vec![0.0; k],
        transitions: vec![vec![0; k]; k],
        n: vec![0; k],
    };
    let mut prev: Option<usize> = None;
    for (a, b, state) in path.segments(y.horizon) {
        let f = m.h[state];
        s.visits[f] += 1;
        s.tau[f] += b - a;
        s.n[f] += y.range(a, b).len();
        if let Some(p) = prev {
            s.departures[p] += 1;
            s.transitions[p][f] += 1;
        }
        prev = Some(f);
    }
    s
}

/// Log density of a CTMC trajectory on `[0, S]` (jump times and states).
pub fn ctmc_log_density(path: &CtmcPath, q: &DMatrix<f64>, pi0: &[f64], horizon: f64) -> f64 {
    let mut out = pi0[path.v0].ln();
    for (i, (a, b, state)) in path.segments(horizon).enumerate() {
        out += q[(state, state)] * (b - a);
        if let Some(j) = path.jumps.get(i) {
            out += q[(state, j.state)].ln();
        }
    }
    out
}

/// Log density of the uniformized trajectory `(V_0, W, V)`.
pub fn augmented_log_density(
    aug: &AugmentedPath,
    q: &DMatrix<f64>,
    m: &StateMap,
    pi0: &[f64],
    horizon: f64,
) -> f64 {
    let mut out = pi0[aug.v0].ln();
    let mut prev = aug.v0;
    let mut t = 0.0;
    for e in &aug.events {
        let w = aug.omega[m.h[prev]];
        out -= w * (e.time - t);
        let rate = if e.state == prev {
            w + q[(prev, prev)]
        } else {
            q[(prev, e.state)]
        };
        out += rate.ln();
        prev = e.state;
        t = e.time;
    }
    out - aug.omega[m.h[prev]] * (horizon - t)
}

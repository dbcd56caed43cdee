//! Forward simulation of paths and event times.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::ctmc::{simulate_ctmc, PathSkeleton};
use crate::error::{Error, Result};
use crate::intensity::Intensity;
use crate::model::{expand_q_matrix, ModelSpec, StartingValue};

/// Non-homogeneous Poisson process by thinning, with a dominating constant per
/// segment.
pub fn simulate_nhpp<R: Rng + ?Sized>(f: &Intensity, rng: &mut R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for seg in f.segments() {
        let (lo, hi) = (seg.min(), seg.max());
        if !(lo >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "negative intensity on [{}, {}]",
                seg.start, seg.end
            )));
        }
        let len = seg.len();
        if !(hi > 0.0) || len <= 0.0 {
            continue;
        }
        let n = Poisson::new(hi * len).expect("positive mean").sample(rng) as usize;
        let start = out.len();
        for _ in 0..n {
            let t = seg.start + len * rng.random::<f64>();
            if rng.random::<f64>() * hi < seg.value(t) {
                out.push(t);
            }
        }
        out[start..].sort_by(|a, b| a.total_cmp(b));
    }
    Ok(out)
}

/// Draws a starting value for a new visit to form `k` (the level for forms
/// whose level is a parameter).
pub fn draw_start<R: Rng + ?Sized>(spec: &ModelSpec, params: &[Vec<f64>], k: usize, rng: &mut R) -> f64 {
    let f = &spec.forms[k];
    match &f.starting_value {
        StartingValue::Fixed(_) => params[k].first().copied().unwrap_or(0.0),
        StartingValue::Discrete(s) => s[rng.random_range(0..s.len())],
        StartingValue::Gamma { shape, rate } => Gamma::new(*shape, 1.0 / rate)
            .expect("valid gamma")
            .sample(rng),
    }
}

/// Simulates a skeleton from the model prior (with `spec.q` and the spec's
/// parameters), rejecting paths whose IF goes negative.
pub fn simulate_skeleton<R: Rng + ?Sized>(
    spec: &ModelSpec,
    params: &[Vec<f64>],
    max_tries: usize,
    rng: &mut R,
) -> Result<PathSkeleton> {
    let q = expand_q_matrix(&spec.q, &spec.state_map)?;
    for _ in 0..max_tries {
        let path = simulate_ctmc(&q, &spec.pi0, spec.horizon, rng);
        let r: Vec<f64> = path
            .segments(spec.horizon)
            .map(|(_, _, s)| draw_start(spec, params, spec.state_map.h[s], rng))
            .collect();
        let skel = PathSkeleton::new(path, r)?;
        let f = Intensity {
            forms: &spec.forms,
            params,
            h: &spec.state_map.h,
            skel: &skel,
            horizon: spec.horizon,
        };
        if f.min() >= 0.0 {
            return Ok(skel);
        }
    }
    Err(Error::InvalidParameter(format!(
        "no non-negative path in {max_tries} attempts"
    )))
}

/// Events on `[0, S]` for a given skeleton under the spec's parameters.
pub fn simulate_events<R: Rng + ?Sized>(
    spec: &ModelSpec,
    params: &[Vec<f64>],
    skel: &PathSkeleton,
    rng: &mut R,
) -> Result<Vec<f64>> {
    simulate_nhpp(
        &Intensity {
            forms: &spec.forms,
            params,
            h: &spec.state_map.h,
            skel,
            horizon: spec.horizon,
        },
        rng,
    )
}

/// Integrated intensity of a skeleton under the spec's parameters.
pub fn integrated_intensity(spec: &ModelSpec, params: &[Vec<f64>], skel: &PathSkeleton) -> f64 {
    Intensity {
        forms: &spec.forms,
        params,
        h: &spec.state_map.h,
        skel,
        horizon: spec.horizon,
    }
    .integral()
}

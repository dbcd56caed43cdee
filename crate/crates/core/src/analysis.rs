//! Posterior summaries, prediction, effective sample size and the measure
//! of fit.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::ctmc::{simulate_ctmc_from, CtmcPath, PathSkeleton};
use crate::error::{Error, Result};
use crate::intensity::{form_range, Intensity, Segment};
use crate::mcmc::TraceRecord;
use crate::model::{expand_q_matrix, FormKind, ModelSpec};
use crate::quad::integrate;
use crate::simulate::draw_start;

/// Effective sample size `n / (1 + 2 Σ ρ_j)`, truncated by Geyer's initial
/// positive sequence and capped at `n`.
pub fn ess(x: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < 10 {
        return Err(Error::InvalidParameter(format!("ess needs at least 10 draws, got {n}")));
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::InvalidParameter("ess undefined for a constant chain".into()));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let acov = |lag: usize| c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let c0 = acov(0);
    let mut sum = 0.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = (acov(2 * m) + acov(2 * m + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        m += 1;
    }
    // sum = Σ_m Γ_m = 1 + 2 Σ_{j≥1} ρ_j + (last odd term); tau = 2 sum - 1
    let tau = (2.0 * sum - 1.0).max(1.0);
    Ok(n as f64 / tau)
}

/// Seconds per 100 effective draws.
pub fn time_per_100_ess(seconds: f64, ess: f64) -> f64 {
    100.0 * seconds / ess
}

/// Mean, sd and equal-tailed 95% interval of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(s: &[f64], p: f64) -> f64 {
    if s.is_empty() {
        return f64::NAN;
    }
    let h = (s.len() - 1) as f64 * p;
    let i = h.floor() as usize;
    let j = (i + 1).min(s.len() - 1);
    s[i] + (h - i as f64) * (s[j] - s[i])
}

impl Stat {
    /// Ignores non-finite values; all-NaN input gives NaN fields.
    pub fn of(x: &[f64]) -> Self {
        let mut s: Vec<f64> = x.iter().copied().filter(|v| v.is_finite()).collect();
        s.sort_by(f64::total_cmp);
        let n = s.len() as f64;
        if s.first() == s.last() {
            let v = s.first().copied().unwrap_or(f64::NAN);
            return Self { mean: v, sd: 0.0, lo: v, hi: v };
        }
        let mean = s.iter().sum::<f64>() / n;
        let sd = if s.len() > 1 {
            (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            sd,
            lo: quantile_sorted(&s, 0.025),
            hi: quantile_sorted(&s, 0.975),
        }
    }

    pub fn covers(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// One summarized quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantitySummary {
    pub name: String,
    pub truth: Option<f64>,
    pub stat: Stat,
    pub ess: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub quantities: Vec<QuantitySummary>,
    /// `(time, mean, lo, hi)` for the IF on the grid.
    pub if_grid: Vec<(f64, f64, f64, f64)>,
}

/// Names and per-draw values of every sampled quantity: ψ, θ rates,
/// transition probabilities, `|T|`, `T1` and the log posterior.
pub fn quantities(spec: &ModelSpec, records: &[TraceRecord]) -> Vec<(String, Vec<f64>)> {
    let mut out = Vec::new();
    for (k, f) in spec.forms.iter().enumerate() {
        for (j, name) in f.param_names().iter().enumerate() {
            out.push((
                format!("psi{}_{}", k + 1, name),
                records.iter().map(|r| r.psi[k][j]).collect(),
            ));
        }
    }
    for k in 0..spec.k() {
        out.push((
            format!("theta{}", k + 1),
            records.iter().map(|r| r.theta.theta_rates[k]).collect(),
        ));
    }
    for k in 0..spec.k() {
        for (j, &t) in spec.state_map.trans_targets(k).iter().enumerate() {
            out.push((
                format!("p{}_{}", k + 1, t + 1),
                records.iter().map(|r| r.theta.theta_trans[k][j]).collect(),
            ));
        }
    }
    out.push(("n_jumps".into(), records.iter().map(|r| r.n_jumps as f64).collect()));
    out.push(("t1".into(), records.iter().map(|r| r.t1).collect()));
    out.push(("log_post".into(), records.iter().map(|r| r.log_post).collect()));
    out
}

/// IF of a record on a grid.
pub fn record_if(spec: &ModelSpec, rec: &TraceRecord, grid: &[f64]) -> Vec<f64> {
    Intensity {
        forms: &spec.forms,
        params: &rec.psi,
        h: &spec.state_map.h,
        skel: &rec.skeleton,
        horizon: spec.horizon,
    }
    .grid_values(grid)
}

/// Uniform grid of `n + 1` points on `[0, horizon]`.
pub fn uniform_grid(horizon: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| horizon * i as f64 / n as f64).collect()
}

/// Per-quantity statistics plus the pointwise IF band. `truth` supplies
/// true values by quantity name where known.
pub fn summarize(
    spec: &ModelSpec,
    records: &[TraceRecord],
    grid: &[f64],
    truth: &dyn Fn(&str) -> Option<f64>,
) -> Result<PosteriorSummary> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("empty trace".into()));
    }
    let quantities = quantities(spec, records)
        .into_iter()
        .map(|(name, v)| QuantitySummary {
            truth: truth(&name),
            stat: Stat::of(&v),
            ess: ess(&v).ok(),
            name,
        })
        .collect();
    let vals: Vec<Vec<f64>> = records.iter().map(|r| record_if(spec, r, grid)).collect();
    let if_grid = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let col: Vec<f64> = vals.iter().map(|v| v[i]).collect();
            let s = Stat::of(&col);
            (t, s.mean, s.lo, s.hi)
        })
        .collect();
    Ok(PosteriorSummary { quantities, if_grid })
}

/// Prediction target beyond the observation window.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// IF values at the given offsets past `S`.
    IfPath(Vec<f64>),
    IntegratedIf,
    EventCount,
}

const PREDICT_TRIES: usize = 1000;

/// Skeleton on `[0, S + horizon]` continuing a record's final segment with a
/// forward CTMC simulation; paths whose IF goes negative are redrawn.
pub fn extend_record<R: Rng + ?Sized>(
    spec: &ModelSpec,
    rec: &TraceRecord,
    horizon: f64,
    rng: &mut R,
) -> Result<Option<PathSkeleton>> {
    let s = spec.horizon;
    let end = s + horizon;
    let q = expand_q_matrix(&rec.theta, &spec.state_map)?;
    for _ in 0..PREDICT_TRIES {
        let fut = simulate_ctmc_from(&q, rec.final_state, s, end, rng);
        let mut r = rec.skeleton.starting_values.clone();
        for j in &fut.jumps {
            r.push(draw_start(spec, &rec.psi, spec.state_map.h[j.state], rng));
        }
        let mut jumps = rec.skeleton.path.jumps.clone();
        jumps.extend(fut.jumps);
        let skel = PathSkeleton::new(CtmcPath { v0: rec.skeleton.path.v0, jumps }, r)?;
        let f = Intensity {
            forms: &spec.forms,
            params: &rec.psi,
            h: &spec.state_map.h,
            skel: &skel,
            horizon: end,
        };
        let ok = f.segments().filter(|g| g.end > s).all(|g| {
            form_range(g.kind, g.shape, g.r, g.start, g.start.max(s), g.end).0 >= 0.0
        });
        if ok {
            return Ok(Some(skel));
        }
    }
    Ok(None)
}

/// Predictive draws, one row per record. Records whose future IF could not
/// be kept non-negative give NaN.
pub fn predict<R: Rng + ?Sized>(
    spec: &ModelSpec,
    records: &[TraceRecord],
    horizon: f64,
    target: &Target,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "prediction horizon must be positive, got {horizon}"
        )));
    }
    let s = spec.horizon;
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        let width = match target {
            Target::IfPath(g) => g.len(),
            _ => 1,
        };
        let Some(skel) = extend_record(spec, rec, horizon, rng)? else {
            out.push(vec![f64::NAN; width]);
            continue;
        };
        let f = Intensity {
            forms: &spec.forms,
            params: &rec.psi,
            h: &spec.state_map.h,
            skel: &skel,
            horizon: s + horizon,
        };
        out.push(match target {
            Target::IfPath(g) => g.iter().map(|&d| f.value(s + d)).collect(),
            Target::IntegratedIf => vec![f.integral_between(s, s + horizon)],
            Target::EventCount => {
                let m = f.integral_between(s, s + horizon);
                let n = if m > 0.0 {
                    Poisson::new(m).expect("positive mean").sample(rng)
                } else {
                    0.0
                };
                vec![n]
            }
        });
    }
    Ok(out)
}

fn is_piecewise_linear(kind: FormKind) -> bool {
    matches!(kind, FormKind::Constant | FormKind::Linear)
}

/// `∫_a^b |u(s)|` for `u` linear with end values `u0`, `u1`.
fn abs_linear_integral(u0: f64, u1: f64, len: f64) -> f64 {
    if u0 * u1 >= 0.0 {
        0.5 * (u0.abs() + u1.abs()) * len
    } else {
        0.5 * (u0 * u0 + u1 * u1) / (u0 - u1).abs() * len
    }
}

/// `(1/S) ∫ |λ - λ_R|` over `[0, S]`: closed form where both IFs are
/// piecewise linear, adaptive quadrature otherwise.
pub fn measure_of_fit(fit: &Intensity, truth: &Intensity) -> f64 {
    let s = fit.horizon.min(truth.horizon);
    let a: Vec<Segment> = fit.segments().collect();
    let b: Vec<Segment> = truth.segments().collect();
    let (mut i, mut j) = (0, 0);
    let mut lo = 0.0;
    let mut total = 0.0;
    while i < a.len() && j < b.len() && lo < s {
        let hi = a[i].end.min(b[j].end).min(s);
        if hi > lo {
            let (x, y) = (&a[i], &b[j]);
            total += if is_piecewise_linear(x.kind) && is_piecewise_linear(y.kind) {
                abs_linear_integral(x.value(lo) - y.value(lo), x.value(hi) - y.value(hi), hi - lo)
            } else {
                integrate(|t| (x.value(t) - y.value(t)).abs(), lo, hi, 1e-6)
            };
        }
        lo = hi;
        if a[i].end <= hi {
            i += 1;
        }
        if b[j].end <= hi {
            j += 1;
        }
    }
    total / s
}

/// Measure of fit of every record against a true skeleton.
pub fn measure_of_fit_draws(
    spec: &ModelSpec,
    records: &[TraceRecord],
    truth: &PathSkeleton,
    truth_params: &[Vec<f64>],
) -> Vec<f64> {
    let t = Intensity {
        forms: &spec.forms,
        params: truth_params,
        h: &spec.state_map.h,
        skel: truth,
        horizon: spec.horizon,
    };
    records
        .iter()
        .map(|r| {
            measure_of_fit(
                &Intensity {
                    forms: &spec.forms,
                    params: &r.psi,
                    h: &spec.state_map.h,
                    skel: &r.skeleton,
                    horizon: spec.horizon,
                },
                &t,
            )
        })
        .collect()
}

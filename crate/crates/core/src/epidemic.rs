//! Epidemic-curve model: normal-cdf growth followed by a single change to a
//! normal-cdf decay.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::EpidemicSettings;
use crate::ctmc::{poisson_times, sample_index, CtmcPath, Jump, PathSkeleton};
use crate::error::{Error, Result};
use crate::intensity::{default_bandwidth, kernel_estimate};
use crate::likelihood::{PointPattern, LOG_ZERO};
use crate::mcmc::{SamplerConfig, TraceRecord};
use crate::model::{ModelSpec, PsiPrior};
use crate::special::{norm_cdf, norm_cdf_integral, norm_pdf, norm_quantile, SQRT_2PI};

/// Growth and decay parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpidemicParams {
    pub a: f64,
    pub b1: f64,
    pub d1: f64,
    pub c1_dot: f64,
    pub b2: f64,
    pub d2: f64,
    pub c2_dot: f64,
}

impl EpidemicParams {
    pub fn growth_shape(&self) -> [f64; 4] {
        [self.a, self.b1, self.d1, self.c1_dot]
    }

    pub fn decay_shape(&self) -> [f64; 3] {
        [self.b2, self.d2, self.c2_dot]
    }

    pub fn from_shapes(growth: &[f64], decay: &[f64]) -> Self {
        Self {
            a: growth[0],
            b1: growth[1],
            d1: growth[2],
            c1_dot: growth[3],
            b2: decay[0],
            d2: decay[1],
            c2_dot: decay[2],
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.a, self.b1, self.d1, self.c1_dot, self.b2, self.d2, self.c2_dot]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::from_shapes(&v[..4], &v[4..7])
    }

    pub const NAMES: [&'static str; 7] = ["a", "b1", "d1", "c1_dot", "b2", "d2", "c2_dot"];

    /// Structural restrictions of the model.
    pub fn is_admissible(&self) -> bool {
        self.a > 0.0
            && self.b1 >= 0.0
            && self.b2 >= 0.0
            && self.c1_dot > 0.0
            && self.c2_dot > 0.0
            && self.d2 < 3.0
            && self.to_vec().iter().all(|x| x.is_finite())
    }

    pub fn growth(&self, s: f64) -> f64 {
        growth_value(&self.growth_shape(), s)
    }

    /// Decay amplitude γ; non-positive values make the decay undefined.
    pub fn gamma(&self, t1: f64) -> f64 {
        (self.growth(t1) - self.b2) / norm_cdf(self.d2)
    }

    pub fn decay(&self, t1: f64, s: f64) -> f64 {
        decay_value(&self.decay_shape(), self.growth(t1), t1, s)
    }

    /// λ(s) with the change at `t1`.
    pub fn value(&self, t1: f64, s: f64) -> f64 {
        if s < t1 {
            self.growth(s)
        } else {
            self.decay(t1, s)
        }
    }

    pub fn integral(&self, t1: f64, a: f64, b: f64) -> f64 {
        let mut out = 0.0;
        if a < t1 {
            out += growth_integral(&self.growth_shape(), a, b.min(t1));
        }
        if b > t1 {
            out += decay_integral(&self.decay_shape(), self.growth(t1), t1, a.max(t1), b);
        }
        out
    }
}

fn scaled_cdf_integral(amp: f64, slope: f64, u0: f64, u1: f64, len: f64) -> f64 {
    if (u1 - u0).abs() < 1e-6 {
        let mid = 0.5 * (u0 + u1);
        amp * len * norm_cdf(mid)
    } else {
        amp * norm_cdf_integral(u0, u1) / slope
    }
}

/// `b1 + a Φ(d1 + √(2π) ċ1 s / a)`.
#[inline]
pub fn growth_value(shape: &[f64], s: f64) -> f64 {
    let (a, b1, d1, c1) = (shape[0], shape[1], shape[2], shape[3]);
    b1 + a * norm_cdf(d1 + SQRT_2PI * c1 * s / a)
}

pub fn growth_integral(shape: &[f64], lo: f64, hi: f64) -> f64 {
    let (a, b1, d1, c1) = (shape[0], shape[1], shape[2], shape[3]);
    let c = SQRT_2PI * c1 / a;
    let len = hi - lo;
    b1 * len + scaled_cdf_integral(a, c, d1 + c * lo, d1 + c * hi, len)
}

/// `b2 + γ Φ(d2 - √(2π) ċ2 (s - δ) / γ)` with `γ = (r - b2) / Φ(d2)`.
#[inline]
pub fn decay_value(shape: &[f64], r: f64, delta: f64, s: f64) -> f64 {
    let (b2, d2, c2) = (shape[0], shape[1], shape[2]);
    let gamma = (r - b2) / norm_cdf(d2);
    if !(gamma > 0.0) {
        return f64::NAN;
    }
    b2 + gamma * norm_cdf(d2 - SQRT_2PI * c2 * (s - delta) / gamma)
}

pub fn decay_integral(shape: &[f64], r: f64, delta: f64, lo: f64, hi: f64) -> f64 {
    let (b2, d2, c2) = (shape[0], shape[1], shape[2]);
    let gamma = (r - b2) / norm_cdf(d2);
    if !(gamma > 0.0) {
        return f64::NAN;
    }
    let c = SQRT_2PI * c2 / gamma;
    let len = hi - lo;
    // the argument decreases in s, so integrate over the mirrored interval
    b2 * len + scaled_cdf_integral(gamma, c, d2 - c * (hi - delta), d2 - c * (lo - delta), len)
}

/// Derivative of the growth curve.
pub fn growth_slope(p: &EpidemicParams, s: f64) -> f64 {
    let c = SQRT_2PI * p.c1_dot / p.a;
    p.a * c * norm_pdf(p.d1 + c * s)
}

/// Derivative of the decay curve.
pub fn decay_slope(p: &EpidemicParams, t1: f64, s: f64) -> f64 {
    let gamma = p.gamma(t1);
    let c = SQRT_2PI * p.c2_dot / gamma;
    -gamma * c * norm_pdf(p.d2 - c * (s - t1))
}

/// First time `t ≥ from` at which the decay curve reaches `threshold`.
/// Returns `None` when it never does.
pub fn hitting_time(p: &EpidemicParams, t1: f64, threshold: f64, from: f64) -> Option<f64> {
    if !(threshold > p.b2) {
        return None;
    }
    if p.value(t1, from) <= threshold {
        return Some(from);
    }
    let gamma = p.gamma(t1);
    let u = norm_quantile((threshold - p.b2) / gamma);
    let c = SQRT_2PI * p.c2_dot / gamma;
    let t = t1 + (p.d2 - u) / c;
    Some(t.max(from))
}


/// Log-likelihood with the change at `t1`; `-inf` for inadmissible values.
pub fn epidemic_log_lik(y: &PointPattern, p: &EpidemicParams, t1: f64) -> f64 {
    if !p.is_admissible() || !(p.gamma(t1) > 0.0) {
        return LOG_ZERO;
    }
    let k = y.times.partition_point(|&t| t < t1);
    let g = p.growth_shape();
    let d = p.decay_shape();
    let r = p.growth(t1);
    let mut s = 0.0;
    for &t in &y.times[..k] {
        s += growth_value(&g, t).ln();
    }
    for &t in &y.times[k..] {
        s += decay_value(&d, r, t1, t).ln();
    }
    let out = s - p.integral(t1, 0.0, y.horizon);
    if out.is_nan() {
        LOG_ZERO
    } else {
        out
    }
}

/// Number of `(growth, decay)` parameters; the flat index used by the
/// ψ blocks follows [`EpidemicParams::NAMES`].
const N_PARAMS: usize = 7;

fn flat_priors(spec: &ModelSpec) -> Vec<PsiPrior> {
    spec.priors.psi.iter().flatten().cloned().collect()
}

fn log_prior(priors: &[PsiPrior], x: &[f64]) -> f64 {
    priors.iter().zip(x).map(|(p, &v)| p.ln_pdf(v)).sum()
}

/// Default change-time window: half to one and a half times the peak of a
/// kernel estimate of the IF.
pub fn default_change_window(y: &PointPattern) -> Result<(f64, f64)> {
    if y.times.is_empty() {
        return Err(Error::Data("no events to locate the epidemic peak".into()));
    }
    let n = 1000;
    let grid: Vec<f64> = (0..=n).map(|i| y.horizon * i as f64 / n as f64).collect();
    let est = kernel_estimate(&y.times, y.horizon, default_bandwidth(&y.times), &grid)?;
    let imax = est
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i);
    let peak = grid[imax];
    Ok((0.5 * peak, (1.5 * peak).min(y.horizon)))
}

/// Log weights of each candidate change time `w[l]` for `l` in `cand`.
pub fn change_point_weights(
    y: &PointPattern,
    p: &EpidemicParams,
    w: &[f64],
    cand: &[usize],
    theta: &[f64],
    omega: &[f64],
) -> Vec<f64> {
    let n = w.len();
    cand.iter()
        .map(|&l| {
            let before = l as f64;
            let after = (n - l - 1) as f64;
            epidemic_log_lik(y, p, w[l])
                + before * (omega[0] - theta[0]).ln()
                + theta[0].ln()
                + after * (omega[1] - theta[1]).ln()
                - omega[0] * w[l]
                - omega[1] * (y.horizon - w[l])
        })
        .collect()
}

/// Samples the change time among the candidates `w` inside `window`.
pub fn sample_change_point<R: Rng + ?Sized>(
    y: &PointPattern,
    w: &[f64],
    p: &EpidemicParams,
    theta: &[f64],
    omega: &[f64],
    window: (f64, f64),
    rng: &mut R,
) -> Result<usize> {
    let cand: Vec<usize> = (0..w.len())
        .filter(|&l| w[l] >= window.0 && w[l] <= window.1)
        .collect();
    if cand.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no candidate change times in [{}, {}]",
            window.0, window.1
        )));
    }
    let lw = change_point_weights(y, p, w, &cand, theta, omega);
    let m = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Err(Error::Numerical {
            sweep: 0,
            message: "all candidate change times have zero probability".into(),
        });
    }
    let probs: Vec<f64> = lw.iter().map(|x| (x - m).exp()).collect();
    Ok(cand[sample_index(&probs, rng)])
}

/// Adaptive random-walk Metropolis over a block of parameter indices.
#[derive(Debug, Clone)]
struct AmBlock {
    idx: Vec<usize>,
    n: usize,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_scale: f64,
    attempts: usize,
    accepts: usize,
}

impl AmBlock {
    fn new(idx: Vec<usize>, x: &[f64]) -> Self {
        let d = idx.len();
        let init = DMatrix::from_diagonal(&DVector::from_iterator(
            d,
            idx.iter().map(|&i| (0.01 * x[i].abs().max(0.1)).powi(2)),
        ));
        Self {
            chol: init.map(f64::sqrt),
            mean: DVector::from_iterator(d, idx.iter().map(|&i| x[i])),
            cov: DMatrix::zeros(d, d),
            idx,
            n: 0,
            log_scale: 0.0,
            attempts: 0,
            accepts: 0,
        }
    }

    fn observe(&mut self, x: &[f64]) {
        let v = DVector::from_iterator(self.idx.len(), self.idx.iter().map(|&i| x[i]));
        self.n += 1;
        let n = self.n as f64;
        let dx = &v - &self.mean;
        self.mean += &dx / n;
        let dx2 = &v - &self.mean;
        self.cov += (&dx * dx2.transpose() - &self.cov) / n;
    }

    fn refresh(&mut self) {
        let d = self.idx.len();
        if self.n < 50 * d {
            return;
        }
        let sd = 2.38 / (d as f64).sqrt();
        let mut c = &self.cov * (sd * sd);
        for i in 0..d {
            c[(i, i)] += 1e-10 * (1.0 + self.mean[i].abs());
        }
        if let Some(ch) = c.cholesky() {
            self.chol = ch.l();
        }
    }
}

/// Output of [`fit_epidemic`].
#[derive(Debug, Clone)]
pub struct EpidemicFit {
    pub records: Vec<TraceRecord>,
    pub window: (f64, f64),
    /// `(attempts, accepts)` per ψ block.
    pub block_accept: Vec<(usize, usize)>,
    pub final_params: EpidemicParams,
    pub final_t1: f64,
}

/// Skeleton of an epidemic path with the change at `t1`.
pub fn epidemic_skeleton(p: &EpidemicParams, t1: f64) -> PathSkeleton {
    PathSkeleton {
        path: CtmcPath {
            v0: 0,
            jumps: vec![Jump { time: t1, state: 1 }],
        },
        starting_values: vec![p.growth(0.0), p.growth(t1)],
    }
}

fn epidemic_record(
    y: &PointPattern,
    spec: &ModelSpec,
    priors: &[PsiPrior],
    p: &EpidemicParams,
    t1: f64,
    iteration: usize,
) -> TraceRecord {
    let th = &spec.q.theta_rates;
    let log_lik = epidemic_log_lik(y, p, t1);
    let path = spec.pi0[0].ln() + th[0].ln() - th[0] * t1 - th[1] * (y.horizon - t1);
    let x = p.to_vec();
    TraceRecord {
        iteration,
        log_post: log_lik + path + log_prior(priors, &x),
        log_lik,
        theta: spec.q.clone(),
        psi: vec![x[..4].to_vec(), x[4..].to_vec()],
        n_jumps: 1,
        t1,
        final_state: 1,
        last_jump: t1,
        last_r: p.growth(t1),
        block_accept: f64::NAN,
        n_blocks: 1,
        skeleton: epidemic_skeleton(p, t1),
    }
}

/// Gibbs sampler for the epidemic model: virtual refresh, exact change-time
/// draw over the candidate times in `window`, then adaptive Metropolis on
/// the blocks `(a, d1, ċ1)`, `b1` and `(b2, d2, ċ2)`. Parameters with a
/// `Fixed` prior stay at their initial values; θ is held fixed.
pub fn fit_epidemic<R: Rng>(
    y: &PointPattern,
    spec: &ModelSpec,
    cfg: &SamplerConfig,
    settings: Option<&EpidemicSettings>,
    mut rng: R,
) -> Result<EpidemicFit> {
    spec.validate()?;
    cfg.validate()?;
    if !spec.is_epidemic() {
        return Err(Error::InvalidModel(vec!["not an epidemic model".into()]));
    }
    let window = match settings.and_then(|s| s.change_window) {
        Some(w) => w,
        None => default_change_window(y)?,
    };
    if !(window.0 < window.1) || window.0 < 0.0 || window.1 > y.horizon {
        return Err(Error::Config(format!(
            "change window [{}, {}] must lie inside [0, {}]",
            window.0, window.1, y.horizon
        )));
    }
    let priors = flat_priors(spec);
    let init = spec.initial_params();
    let mut x: Vec<f64> = init.iter().flatten().cloned().collect();
    debug_assert_eq!(x.len(), N_PARAMS);
    let mut t1 = settings
        .and_then(|s| s.change_time)
        .unwrap_or(0.5 * (window.0 + window.1));
    if !(t1 >= window.0 && t1 <= window.1) {
        return Err(Error::Config(format!("initial change time {t1} outside the window")));
    }
    let lp = |x: &[f64], t1: f64| {
        let pr = log_prior(&priors, x);
        if pr == f64::NEG_INFINITY {
            return pr;
        }
        pr + epidemic_log_lik(y, &EpidemicParams::from_slice(x), t1)
    };
    let mut cur = lp(&x, t1);
    if !cur.is_finite() {
        return Err(Error::NoInitialState(
            "initial parameters have zero posterior density".into(),
        ));
    }
    let theta = spec.q.theta_rates.clone();
    let omega: Vec<f64> = theta.iter().map(|t| cfg.omega_multiplier * t).collect();
    let free = |i: usize| !matches!(priors[i], PsiPrior::Fixed);
    let mut blocks: Vec<AmBlock> = [vec![0, 2, 3], vec![1], vec![4, 5, 6]]
        .into_iter()
        .map(|b| b.into_iter().filter(|&i| free(i)).collect::<Vec<_>>())
        .filter(|b| !b.is_empty())
        .map(|b| AmBlock::new(b, &x))
        .collect();
    let mut records = Vec::new();
    let mut w = Vec::new();
    for iter in 0..cfg.n_iter {
        w.clear();
        poisson_times(omega[0] - theta[0], 0.0, t1, &mut rng, &mut w);
        w.push(t1);
        let l_t1 = w.len() - 1;
        poisson_times(omega[1] - theta[1], t1, y.horizon, &mut rng, &mut w);
        debug_assert_eq!(w[l_t1], t1);
        let p = EpidemicParams::from_slice(&x);
        let l = sample_change_point(y, &w, &p, &theta, &omega, window, &mut rng).map_err(|e| {
            match e {
                Error::Numerical { message, .. } => Error::Numerical { sweep: iter, message },
                e => e,
            }
        })?;
        if w[l] != t1 {
            t1 = w[l];
            cur = lp(&x, t1);
        }
        let adapting = iter < cfg.adapt_until;
        for b in blocks.iter_mut() {
            let d = b.idx.len();
            let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let step = &b.chol * z * b.log_scale.exp();
            let mut prop = x.clone();
            for (j, &i) in b.idx.iter().enumerate() {
                prop[i] += step[j];
            }
            let new = lp(&prop, t1);
            b.attempts += 1;
            let acc = if new.is_nan() {
                false
            } else {
                rng.random::<f64>().ln() < new - cur
            };
            if acc {
                x = prop;
                cur = new;
                b.accepts += 1;
            }
            if adapting {
                let target = if d == 1 { 0.44 } else { 0.234 };
                let gain = ((iter + 1) as f64).powf(-0.6);
                b.log_scale += gain * (f64::from(u8::from(acc)) - target);
                b.observe(&x);
                if (iter + 1) % 100 == 0 {
                    b.refresh();
                }
            }
        }
        if !cur.is_finite() {
            return Err(Error::Numerical {
                sweep: iter,
                message: format!("log posterior is {cur}"),
            });
        }
        if iter >= cfg.burn_in && (iter - cfg.burn_in).is_multiple_of(cfg.thin) {
            records.push(epidemic_record(y, spec, &priors, &EpidemicParams::from_slice(&x), t1, iter));
        }
    }
    Ok(EpidemicFit {
        records,
        window,
        block_accept: blocks.iter().map(|b| (b.attempts, b.accepts)).collect(),
        final_params: EpidemicParams::from_slice(&x),
        final_t1: t1,
    })
}

/// Per-draw stabilization time (first time after `from` at which the decay
/// reaches `threshold`) and the integrated IF from `from` to it. Draws that
/// never reach the threshold give `(NaN, NaN)`.
pub fn predict_stabilization(records: &[TraceRecord], threshold: f64, from: f64) -> Vec<(f64, f64)> {
    records
        .iter()
        .map(|r| {
            let p = EpidemicParams::from_shapes(&r.psi[0], &r.psi[1]);
            match hitting_time(&p, r.t1, threshold, from) {
                Some(t) => (t, p.integral(r.t1, from, t)),
                None => (f64::NAN, f64::NAN),
            }
        })
        .collect()
}

/// Spreads weekly counts uniformly over their weeks. Rows are
/// `(first day, count)`; events past `horizon` are an error.
pub fn disaggregate_weekly(rows: &[(f64, u64)], horizon: f64, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (i, &(day, n)) in rows.iter().enumerate() {
        if day < 0.0 || day + 7.0 > horizon + 1e-9 {
            return Err(Error::Data(format!(
                "week {} starting at day {day} does not fit in [0, {horizon}]",
                i + 1
            )));
        }
        for _ in 0..n {
            out.push(day + 7.0 * rng.random::<f64>());
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

//! Exact Gibbs sampler over the uniformized path, Q parameters and form
//! parameters.

mod block;
pub mod partition;
pub mod updates;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::ctmc::{
    omega_from, poisson_times, resample_virtual_jumps, AugEvent, AugmentedPath, CtmcPath, Jump,
    PathSkeleton,
};
use crate::error::{Error, Result};
use crate::intensity::Intensity;
use crate::likelihood::{
    augmented_log_density, log_likelihood_of, sufficient_stats, window_log_lik, PointPattern,
    LOG_ZERO,
};
use crate::model::{expand_q_matrix, ModelSpec, PsiPrior, QParams, StartingValue};
use crate::special::{dirichlet_ln_pdf, gamma_ln_pdf, log_sum_exp};

pub use block::Opt;
pub use partition::{adapt_partition, boundaries, eligible_jumps};
pub use updates::{draw_theta, theta_posterior};

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// `Ω_k = κ |Q_k|`.
    pub omega_multiplier: f64,
    /// Repetitions of {virtual refresh, block updates} per sweep.
    pub ctmc_updates: usize,
    /// Sweeps between partition adaptations.
    pub adapt_window: usize,
    /// Acceptance rate below which another block is added.
    pub adapt_threshold: f64,
    /// No adaptation of any kind from this sweep on.
    pub adapt_until: usize,
    pub rw_target: f64,
    /// Probability of a single-block update instead of the partitioned one.
    pub full_block_prob: f64,
    pub initial_blocks: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_iter: 10_000,
            burn_in: 2_000,
            thin: 1,
            omega_multiplier: 2.0,
            ctmc_updates: 5,
            adapt_window: 50,
            adapt_threshold: 0.25,
            adapt_until: 2_000,
            rw_target: 0.44,
            full_block_prob: 0.05,
            initial_blocks: 1,
            seed: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if !(self.omega_multiplier > 1.0) {
            v.push("omega multiplier must exceed 1".to_string());
        }
        if !(self.adapt_threshold > 0.0 && self.adapt_threshold < 1.0) {
            v.push("adaptation threshold must lie in (0, 1)".into());
        }
        if self.burn_in >= self.n_iter {
            v.push("burn-in must be smaller than the number of iterations".into());
        }
        if self.adapt_until > self.burn_in {
            v.push("adaptation must stop within the burn-in".into());
        }
        if self.thin == 0 || self.ctmc_updates == 0 || self.adapt_window == 0 {
            v.push("thin, ctmc updates and adaptation window must be positive".into());
        }
        if self.initial_blocks == 0 {
            v.push("at least one block is required".into());
        }
        if !(0.0..=1.0).contains(&self.full_block_prob) {
            v.push("full-block probability must lie in [0, 1]".into());
        }
        if !(self.rw_target > 0.0 && self.rw_target < 1.0) {
            v.push("random-walk target must lie in (0, 1)".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }
}

/// Full sampler state. Window `ℓ` is `[W_ℓ, W_{ℓ+1})` with `W_0 = 0`;
/// `v[ℓ]` is its CTMC state and `r[ℓ]` the starting value of the segment
/// containing it (unused for forms whose level is a parameter).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub w: Vec<f64>,
    pub v: Vec<usize>,
    pub r: Vec<f64>,
    pub omega: Vec<f64>,
    pub theta: QParams,
    pub psi: Vec<Vec<f64>>,
    pub n_blocks: usize,
    pub rw_scales: Vec<Vec<f64>>,
}

impl ChainState {
    pub fn n_windows(&self) -> usize {
        self.v.len()
    }

    pub fn augmented(&self) -> AugmentedPath {
        AugmentedPath {
            v0: self.v[0],
            events: self
                .w
                .iter()
                .zip(&self.v[1..])
                .map(|(&time, &state)| AugEvent { time, state })
                .collect(),
            omega: self.omega.clone(),
        }
    }

    pub fn path(&self) -> CtmcPath {
        let mut jumps = Vec::new();
        for l in 1..self.v.len() {
            if self.v[l] != self.v[l - 1] {
                jumps.push(Jump {
                    time: self.w[l - 1],
                    state: self.v[l],
                });
            }
        }
        CtmcPath {
            v0: self.v[0],
            jumps,
        }
    }

    /// Starting value in effect for window `l`.
    pub fn level(&self, spec: &ModelSpec, l: usize) -> f64 {
        let k = spec.state_map.h[self.v[l]];
        if spec.forms[k].has_level_param() {
            self.psi[k][0]
        } else {
            self.r[l]
        }
    }

    pub fn skeleton(&self, spec: &ModelSpec) -> PathSkeleton {
        let mut r = vec![self.level(spec, 0)];
        for l in 1..self.v.len() {
            if self.v[l] != self.v[l - 1] {
                r.push(self.level(spec, l));
            }
        }
        PathSkeleton {
            path: self.path(),
            starting_values: r,
        }
    }

    pub fn log_likelihood(&self, spec: &ModelSpec, y: &PointPattern) -> f64 {
        let skel = self.skeleton(spec);
        log_likelihood_of(
            y,
            &Intensity {
                forms: &spec.forms,
                params: &self.psi,
                h: &spec.state_map.h,
                skel: &skel,
                horizon: spec.horizon,
            },
        )
    }

    /// Log prior of the per-visit starting values.
    pub fn log_prior_r(&self, spec: &ModelSpec) -> f64 {
        let skel = self.skeleton(spec);
        let mut out = 0.0;
        for (_, _, state, r) in skel.segments(spec.horizon) {
            let f = &spec.forms[spec.state_map.h[state]];
            out += match &f.starting_value {
                StartingValue::Fixed(_) => 0.0,
                StartingValue::Discrete(s) => {
                    if s.contains(&r) {
                        -(s.len() as f64).ln()
                    } else {
                        LOG_ZERO
                    }
                }
                StartingValue::Gamma { shape, rate } => gamma_ln_pdf(r, *shape, *rate),
            };
        }
        out
    }

    pub fn log_prior_params(&self, spec: &ModelSpec) -> f64 {
        let mut out = 0.0;
        let p = &spec.priors;
        for k in 0..spec.k() {
            if let crate::model::RatePrior::Gamma { shape, rate } = p.theta_rates[k] {
                out += gamma_ln_pdf(self.theta.theta_rates[k], shape, rate);
            }
            if let crate::model::TransPrior::Dirichlet(g) = &p.theta_trans[k] {
                if !g.is_empty() {
                    out += dirichlet_ln_pdf(&self.theta.theta_trans[k], g);
                }
            }
            for (x, pr) in self.psi[k].iter().zip(&p.psi[k]) {
                out += pr.ln_pdf(*x);
            }
        }
        out
    }

    /// Log joint density of data, augmented path, starting values and
    /// parameters.
    pub fn log_joint(&self, spec: &ModelSpec, y: &PointPattern) -> Result<f64> {
        let q = expand_q_matrix(&self.theta, &spec.state_map)?;
        let ll = self.log_likelihood(spec, y);
        if ll == LOG_ZERO {
            return Ok(LOG_ZERO);
        }
        let path = augmented_log_density(&self.augmented(), &q, &spec.state_map, &spec.pi0, spec.horizon);
        Ok(ll + path + self.log_prior_r(spec) + self.log_prior_params(spec))
    }

    /// As [`log_joint`](Self::log_joint) with the virtual jumps integrated out.
    pub fn log_joint_collapsed(&self, spec: &ModelSpec, y: &PointPattern) -> Result<f64> {
        let q = expand_q_matrix(&self.theta, &spec.state_map)?;
        let ll = self.log_likelihood(spec, y);
        if ll == LOG_ZERO {
            return Ok(LOG_ZERO);
        }
        let path = crate::likelihood::ctmc_log_density(&self.path(), &q, &spec.pi0, spec.horizon);
        Ok(ll + path + self.log_prior_r(spec) + self.log_prior_params(spec))
    }
}

/// One retained draw.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub log_post: f64,
    pub log_lik: f64,
    pub theta: QParams,
    pub psi: Vec<Vec<f64>>,
    pub n_jumps: usize,
    /// First change time of the IF, `NaN` without jumps.
    pub t1: f64,
    pub final_state: usize,
    pub last_jump: f64,
    pub last_r: f64,
    pub block_accept: f64,
    pub n_blocks: usize,
    pub skeleton: PathSkeleton,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AcceptStats {
    pub block_attempts: usize,
    pub block_accepts: usize,
    /// Partitioned updates after adaptation stopped.
    pub post_adapt_attempts: usize,
    pub post_adapt_accepts: usize,
    pub single_attempts: usize,
    pub single_accepts: usize,
    pub failed_proposals: usize,
    pub level_set_rejects: usize,
    /// `(attempts, accepts)` by block position.
    pub per_block: Vec<(usize, usize)>,
    /// `(attempts, accepts)` per form parameter.
    pub psi: Vec<Vec<(usize, usize)>>,
}

impl AcceptStats {
    pub fn block_rate(&self) -> f64 {
        ratio(self.block_accepts, self.block_attempts)
    }

    pub fn post_adapt_rate(&self) -> f64 {
        ratio(self.post_adapt_accepts, self.post_adapt_attempts)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        f64::NAN
    } else {
        a as f64 / b as f64
    }
}

/// Window geometry and event ranges for the current `W`.
#[derive(Debug, Clone, Default)]
struct Windows {
    start: Vec<f64>,
    end: Vec<f64>,
    ev: Vec<(usize, usize)>,
    delta: Vec<f64>,
}

pub struct Sampler<'a, R: Rng> {
    pub spec: &'a ModelSpec,
    pub y: &'a PointPattern,
    pub cfg: SamplerConfig,
    pub state: ChainState,
    pub rng: R,
    pub stats: AcceptStats,
    iter: usize,
    q: DMatrix<f64>,
    log_q: DMatrix<f64>,
    win: Windows,
    adapt_att: usize,
    adapt_acc: usize,
    opts: Vec<Opt>,
    prop_v: Vec<usize>,
    prop_r: Vec<f64>,
    prop_delta: Vec<f64>,
}

impl<'a, R: Rng> Sampler<'a, R> {
    /// Starts from the single-segment path with the highest likelihood.
    pub fn new(spec: &'a ModelSpec, y: &'a PointPattern, cfg: SamplerConfig, rng: R) -> Result<Self> {
        spec.validate()?;
        cfg.validate()?;
        if spec.is_epidemic() {
            return Err(Error::Config(
                "epidemic forms are fitted by the epidemic sampler".into(),
            ));
        }
        let psi = spec.initial_params();
        let mut best: Option<(f64, usize, f64)> = None;
        for (j, (f, p)) in spec.forms.iter().zip(&psi).enumerate() {
            if spec.pi0[j] <= 0.0 {
                continue;
            }
            let shape = f.split_params(p).1;
            let n = y.len() as f64;
            let cands: Vec<f64> = match &f.starting_value {
                StartingValue::Fixed(_) => vec![p[0]],
                StartingValue::Discrete(s) => s.clone(),
                StartingValue::Gamma { shape, rate } => vec![(shape + n) / (rate + spec.horizon)],
            };
            for r in cands {
                let ll = window_log_lik(f.kind, shape, r, 0.0, 0.0, spec.horizon, &y.times);
                if ll > LOG_ZERO && best.is_none_or(|b| ll > b.0) {
                    best = Some((ll, j, r));
                }
            }
        }
        let (_, v0, r0) = best.ok_or_else(|| {
            Error::NoInitialState("no single form gives a valid intensity on the window".into())
        })?;
        let rw_scales = spec
            .forms
            .iter()
            .zip(&psi)
            .map(|(_, p)| p.iter().map(|x| 0.1 * x.abs().max(0.1)).collect())
            .collect();
        let state = ChainState {
            w: vec![],
            v: vec![v0],
            r: vec![r0],
            omega: omega_from(&spec.q, cfg.omega_multiplier),
            theta: spec.q.clone(),
            psi,
            n_blocks: cfg.initial_blocks,
            rw_scales,
        };
        Self::from_state(spec, y, cfg, state, rng)
    }

    /// Starts from a given state, which must have positive density.
    pub fn from_state(
        spec: &'a ModelSpec,
        y: &'a PointPattern,
        cfg: SamplerConfig,
        state: ChainState,
        rng: R,
    ) -> Result<Self> {
        let q = expand_q_matrix(&state.theta, &spec.state_map)?;
        let stats = AcceptStats {
            psi: state.psi.iter().map(|p| vec![(0, 0); p.len()]).collect(),
            ..Default::default()
        };
        let mut s = Self {
            spec,
            y,
            cfg,
            state,
            rng,
            stats,
            iter: 0,
            log_q: q.map(|x| if x > 0.0 { x.ln() } else { LOG_ZERO }),
            q,
            win: Windows::default(),
            adapt_att: 0,
            adapt_acc: 0,
            opts: Vec::new(),
            prop_v: Vec::new(),
            prop_r: Vec::new(),
            prop_delta: Vec::new(),
        };
        if s.state.log_likelihood(spec, y) == LOG_ZERO {
            return Err(Error::NoInitialState(
                "initial state has zero likelihood".into(),
            ));
        }
        s.rebuild_windows();
        Ok(s)
    }

    pub fn iteration(&self) -> usize {
        self.iter
    }

    fn adapting(&self) -> bool {
        self.iter < self.cfg.adapt_until
    }

    fn rebuild_windows(&mut self) {
        let n = self.state.v.len();
        let s = self.spec.horizon;
        let w = &mut self.win;
        w.start.clear();
        w.end.clear();
        w.ev.clear();
        for l in 0..n {
            let a = if l == 0 { 0.0 } else { self.state.w[l - 1] };
            let b = if l + 1 < n { self.state.w[l] } else { s };
            let rg = self.y.range(a, b);
            w.start.push(a);
            w.end.push(b);
            w.ev.push((rg.start, rg.end));
        }
        self.win.delta.resize(n, 0.0);
        self.recompute_delta(0, n);
    }

    fn recompute_delta(&mut self, lo: usize, hi: usize) {
        for l in lo..hi {
            self.win.delta[l] = if l == 0 {
                0.0
            } else if self.state.v[l] != self.state.v[l - 1] {
                self.win.start[l]
            } else {
                self.win.delta[l - 1]
            };
        }
    }

    fn refresh_q(&mut self) -> Result<()> {
        self.q = expand_q_matrix(&self.state.theta, &self.spec.state_map)?;
        self.log_q = self.q.map(|x| if x > 0.0 { x.ln() } else { LOG_ZERO });
        Ok(())
    }

    /// Redraws the virtual jumps given the skeleton, with `Ω` from the
    /// current θ.
    pub fn step_virtual(&mut self) -> Result<()> {
        let m = &self.spec.state_map;
        let omega = omega_from(&self.state.theta, self.cfg.omega_multiplier);
        let mut w = Vec::with_capacity(self.state.w.len() + 4);
        let mut v = Vec::with_capacity(self.state.v.len() + 4);
        let mut r = Vec::with_capacity(self.state.r.len() + 4);
        let mut buf = Vec::new();
        let n = self.state.v.len();
        let mut l = 0;
        v.push(self.state.v[0]);
        r.push(self.state.r[0]);
        while l < n {
            // segment covering windows l..next
            let mut next = l + 1;
            while next < n && self.state.v[next] == self.state.v[l] {
                next += 1;
            }
            let a = self.win.start[l];
            let b = if next < n { self.state.w[next - 1] } else { self.spec.horizon };
            let state = self.state.v[l];
            let rate = omega[m.h[state]] + self.q[(state, state)];
            if rate < 0.0 {
                return Err(Error::InvalidOmega {
                    form: m.h[state] + 1,
                    omega: omega[m.h[state]],
                    rate: -self.q[(state, state)],
                });
            }
            buf.clear();
            poisson_times(rate, a, b, &mut self.rng, &mut buf);
            for &t in &buf {
                w.push(t);
                v.push(state);
                r.push(self.state.r[l]);
            }
            if next < n {
                w.push(b);
                v.push(self.state.v[next]);
                r.push(self.state.r[next]);
            }
            l = next;
        }
        self.state.w = w;
        self.state.v = v;
        self.state.r = r;
        self.state.omega = omega;
        self.rebuild_windows();
        Ok(())
    }

    /// One full sweep.
    pub fn sweep(&mut self) -> Result<()> {
        for _ in 0..self.cfg.ctmc_updates {
            self.step_virtual()?;
            self.block_updates();
        }
        self.update_theta()?;
        self.update_psi();
        self.update_starting_values();
        if self.adapting() && (self.iter + 1).is_multiple_of(self.cfg.adapt_window) {
            let rate = ratio(self.adapt_acc, self.adapt_att);
            let elig = eligible_jumps(&self.state.v, self.spec.k()).len();
            self.state.n_blocks = adapt_partition(
                self.state.n_blocks,
                elig,
                rate,
                self.cfg.adapt_threshold,
            );
            self.adapt_att = 0;
            self.adapt_acc = 0;
        }
        self.iter += 1;
        Ok(())
    }

    /// Block MH over the current partition (or a single block with
    /// probability `full_block_prob`).
    pub fn block_updates(&mut self) {
        let single = self.state.n_blocks > 1 && self.rng.random::<f64>() < self.cfg.full_block_prob;
        let bounds = if single || self.state.n_blocks == 1 {
            Vec::new()
        } else {
            boundaries(&self.state.w, &self.state.v, self.spec.k(), self.state.n_blocks)
        };
        let n = self.state.v.len();
        let mut lo = 0;
        for (b, hi) in bounds.iter().copied().chain(std::iter::once(n)).enumerate() {
            if !(hi == lo + 1 && lo > 0) {
                let acc = self.block_mh(lo, hi, &bounds, !single && self.state.n_blocks > 1);
                if single {
                    self.stats.single_attempts += 1;
                    self.stats.single_accepts += usize::from(acc);
                } else {
                    self.stats.block_attempts += 1;
                    self.stats.block_accepts += usize::from(acc);
                    if self.stats.per_block.len() <= b {
                        self.stats.per_block.resize(b + 1, (0, 0));
                    }
                    self.stats.per_block[b].0 += 1;
                    self.stats.per_block[b].1 += usize::from(acc);
                    if self.adapting() {
                        self.adapt_att += 1;
                        self.adapt_acc += usize::from(acc);
                    } else {
                        self.stats.post_adapt_attempts += 1;
                        self.stats.post_adapt_accepts += usize::from(acc);
                    }
                }
            }
            lo = hi;
        }
    }

    /// Collapsed conjugate update of θ given the skeleton.
    pub fn update_theta(&mut self) -> Result<()> {
        let stats = sufficient_stats(self.y, &self.state.path(), &self.spec.state_map);
        self.state.theta = draw_theta(
            &stats,
            &self.spec.priors,
            &self.state.theta,
            &self.spec.state_map,
            &mut self.rng,
        );
        self.refresh_q()
    }

    /// Segments of form `k`: `(start, end, r, event range)`.
    fn form_segments(&self, k: usize) -> Vec<(f64, f64, f64, usize, usize)> {
        let h = &self.spec.state_map.h;
        let n = self.state.v.len();
        let mut out = Vec::new();
        let mut l = 0;
        while l < n {
            let mut next = l + 1;
            while next < n && self.state.v[next] == self.state.v[l] {
                next += 1;
            }
            if h[self.state.v[l]] == k {
                out.push((
                    self.win.start[l],
                    self.win.end[next - 1],
                    self.state.r[l],
                    self.win.ev[l].0,
                    self.win.ev[next - 1].1,
                ));
            }
            l = next;
        }
        out
    }

    fn form_log_lik(&self, k: usize, params: &[f64], segs: &[(f64, f64, f64, usize, usize)]) -> f64 {
        let f = &self.spec.forms[k];
        let (level, shape) = f.split_params(params);
        let mut out = 0.0;
        for &(a, b, r, lo, hi) in segs {
            let r = level.unwrap_or(r);
            let l = window_log_lik(f.kind, shape, r, a, a, b, &self.y.times[lo..hi]);
            if l == LOG_ZERO {
                return LOG_ZERO;
            }
            out += l;
        }
        out
    }

    /// Exact Gamma draw for constant levels with a Gamma prior; adaptive
    /// random-walk Metropolis for every other parameter.
    pub fn update_psi(&mut self) {
        for k in 0..self.spec.k() {
            let f = &self.spec.forms[k];
            let np = self.state.psi[k].len();
            if np == 0 {
                continue;
            }
            let segs = self.form_segments(k);
            if f.kind == crate::model::FormKind::Constant && f.has_level_param() {
                if let PsiPrior::Gamma { shape, rate } = self.spec.priors.psi[k][0] {
                    let n: usize = segs.iter().map(|s| s.4 - s.3).sum();
                    let tau: f64 = segs.iter().map(|s| s.1 - s.0).sum();
                    self.state.psi[k][0] = Gamma::new(shape + n as f64, 1.0 / (rate + tau))
                        .expect("valid gamma")
                        .sample(&mut self.rng);
                    continue;
                }
            }
            let mut cur = self.form_log_lik(k, &self.state.psi[k], &segs);
            for p in 0..np {
                let prior = &self.spec.priors.psi[k][p];
                if *prior == PsiPrior::Fixed {
                    continue;
                }
                let scale = self.state.rw_scales[k][p];
                let old = self.state.psi[k][p];
                let z: f64 = self.rng.sample(rand_distr::StandardNormal);
                let new = old + scale * z;
                let lp_new = prior.ln_pdf(new);
                let mut accepted = false;
                if lp_new > LOG_ZERO {
                    let mut params = self.state.psi[k].clone();
                    params[p] = new;
                    let ll = self.form_log_lik(k, &params, &segs);
                    if ll > LOG_ZERO {
                        let log_a = ll + lp_new - cur - prior.ln_pdf(old);
                        if log_a >= 0.0 || self.rng.random::<f64>().ln() < log_a {
                            self.state.psi[k][p] = new;
                            cur = ll;
                            accepted = true;
                        }
                    }
                }
                let st = &mut self.stats.psi[k][p];
                st.0 += 1;
                st.1 += usize::from(accepted);
                if self.adapting() {
                    let step = ((self.iter + 1) as f64).powf(-0.6);
                    let target = self.cfg.rw_target;
                    let a = if accepted { 1.0 } else { 0.0 };
                    self.state.rw_scales[k][p] = (scale.ln() + step * (a - target)).exp();
                }
            }
        }
    }

    /// Gibbs draws of per-visit starting values given the skeleton.
    pub fn update_starting_values(&mut self) {
        let h = &self.spec.state_map.h;
        let n = self.state.v.len();
        let mut l = 0;
        let mut weights = Vec::new();
        while l < n {
            let mut next = l + 1;
            while next < n && self.state.v[next] == self.state.v[l] {
                next += 1;
            }
            let k = h[self.state.v[l]];
            let f = &self.spec.forms[k];
            let (a, b) = (self.win.start[l], self.win.end[next - 1]);
            let ev = self.win.ev[l].0..self.win.ev[next - 1].1;
            let new = match &f.starting_value {
                StartingValue::Fixed(_) => None,
                StartingValue::Gamma { shape, rate } => Some(
                    Gamma::new(shape + ev.len() as f64, 1.0 / (rate + b - a))
                        .expect("valid gamma")
                        .sample(&mut self.rng),
                ),
                StartingValue::Discrete(support) => {
                    let shape = f.split_params(&self.state.psi[k]).1;
                    weights.clear();
                    weights.extend(support.iter().map(|&r| {
                        window_log_lik(f.kind, shape, r, a, a, b, &self.y.times[ev.clone()])
                    }));
                    let lz = log_sum_exp(weights.iter().copied());
                    if lz == LOG_ZERO {
                        None
                    } else {
                        let p: Vec<f64> = weights.iter().map(|x| (x - lz).exp()).collect();
                        Some(support[crate::ctmc::sample_index(&p, &mut self.rng)])
                    }
                }
            };
            if let Some(r) = new {
                for x in &mut self.state.r[l..next] {
                    *x = r;
                }
            }
            l = next;
        }
    }

    pub fn record(&self) -> Result<TraceRecord> {
        let skel = self.state.skeleton(self.spec);
        let log_lik = self.state.log_likelihood(self.spec, self.y);
        let log_post = self.state.log_joint_collapsed(self.spec, self.y)?;
        let path = &skel.path;
        Ok(TraceRecord {
            iteration: self.iter,
            log_post,
            log_lik,
            theta: self.state.theta.clone(),
            psi: self.state.psi.clone(),
            n_jumps: path.jumps.len(),
            t1: path.jumps.first().map_or(f64::NAN, |j| j.time),
            final_state: path.final_state(),
            last_jump: path.jumps.last().map_or(0.0, |j| j.time),
            last_r: *skel.starting_values.last().expect("at least one segment"),
            block_accept: self.stats.block_rate(),
            n_blocks: self.state.n_blocks,
            skeleton: skel,
        })
    }

    /// Runs the configured number of sweeps and returns retained draws.
    pub fn run(&mut self) -> Result<Vec<TraceRecord>> {
        let mut out = Vec::new();
        while self.iter < self.cfg.n_iter {
            self.sweep()?;
            let it = self.iter - 1;
            let ll = self.state.log_likelihood(self.spec, self.y);
            if !ll.is_finite() {
                return Err(Error::Numerical {
                    sweep: it,
                    message: format!("log likelihood is {ll}"),
                });
            }
            if it >= self.cfg.burn_in && (it - self.cfg.burn_in).is_multiple_of(self.cfg.thin) {
                let mut rec = self.record()?;
                rec.iteration = it;
                out.push(rec);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub records: Vec<TraceRecord>,
    pub stats: AcceptStats,
    pub final_state: ChainState,
}

/// Runs one chain from the default initial state.
pub fn run_gibbs<R: Rng>(
    y: &PointPattern,
    spec: &ModelSpec,
    cfg: &SamplerConfig,
    rng: R,
) -> Result<ChainOutput> {
    let mut s = Sampler::new(spec, y, cfg.clone(), rng)?;
    let records = s.run()?;
    Ok(ChainOutput {
        records,
        stats: s.stats.clone(),
        final_state: s.state.clone(),
    })
}

/// Redraws virtual jumps for a skeleton (standalone form of the virtual step).
pub fn virtual_refresh<R: Rng>(
    path: &CtmcPath,
    spec: &ModelSpec,
    theta: &QParams,
    kappa: f64,
    rng: &mut R,
) -> Result<AugmentedPath> {
    let q = expand_q_matrix(theta, &spec.state_map)?;
    resample_virtual_jumps(path, spec.horizon, &q, &spec.state_map, &omega_from(theta, kappa), rng)
}

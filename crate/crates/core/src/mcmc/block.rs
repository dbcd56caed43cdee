//! Independence Metropolis–Hastings update of `(V_0, V, R)` on a block of
//! windows, by forward sampling.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::{partition::boundaries, Sampler};
use crate::likelihood::{window_log_lik, LOG_ZERO};
use crate::model::StartingValue;
use crate::special::{ln_gamma, log_sum_exp};

/// How an option sets the starting value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Start {
    /// Continue the current segment.
    Stay,
    /// New segment with this value.
    Value(f64),
    /// New segment with a value drawn from Gamma(shape, rate).
    Draw { shape: f64, rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Opt {
    pub state: usize,
    pub start: Start,
    pub log_w: f64,
}

#[derive(Debug, Clone, Copy)]
pub(super) struct Prev {
    pub state: usize,
    pub delta: f64,
    pub r: f64,
}

impl<R: Rng> Sampler<'_, R> {
    fn push_moves(&self, l: usize, j: usize, base: f64, out: &mut Vec<super::Opt>) {
        let spec = self.spec;
        let k = spec.state_map.h[j];
        let f = &spec.forms[k];
        let (a, b) = (self.win.start[l], self.win.end[l]);
        let len = b - a;
        let (lo, hi) = self.win.ev[l];
        let ev = &self.y.times[lo..hi];
        let base = base - self.state.omega[k] * len;
        let (level, shape) = f.split_params(&self.state.psi[k]);
        match (&f.starting_value, level) {
            (_, Some(r)) => out.push(Opt {
                state: j,
                start: Start::Value(r),
                log_w: base + window_log_lik(f.kind, shape, r, a, a, b, ev),
            }),
            (StartingValue::Discrete(s), None) => {
                let lp = -(s.len() as f64).ln();
                for &r in s {
                    out.push(Opt {
                        state: j,
                        start: Start::Value(r),
                        log_w: base + lp + window_log_lik(f.kind, shape, r, a, a, b, ev),
                    });
                }
            }
            (StartingValue::Gamma { shape: eta, rate: nu }, None) => {
                let n = ev.len() as f64;
                let log_z = eta * nu.ln() - ln_gamma(*eta) + ln_gamma(eta + n)
                    - (eta + n) * (nu + len).ln();
                out.push(Opt {
                    state: j,
                    start: Start::Draw {
                        shape: eta + n,
                        rate: nu + len,
                    },
                    log_w: base + log_z,
                });
            }
            (StartingValue::Fixed(_), None) => unreachable!("fixed starting values carry a level"),
        }
    }

    /// All admissible `(state, R)` continuations for window `l`.
    pub(super) fn window_options(
        &self,
        l: usize,
        prev: Option<Prev>,
        terminal: Option<usize>,
        out: &mut Vec<Opt>,
    ) {
        out.clear();
        let spec = self.spec;
        let m = &spec.state_map;
        match prev {
            None => {
                for j in 0..m.e {
                    if spec.pi0[j] > 0.0 {
                        self.push_moves(l, j, spec.pi0[j].ln(), out);
                    }
                }
            }
            Some(p) => {
                let i = p.state;
                let k = m.h[i];
                let stay = self.state.omega[k] + self.q[(i, i)];
                if stay > 0.0 {
                    let f = &spec.forms[k];
                    let (a, b) = (self.win.start[l], self.win.end[l]);
                    let (lo, hi) = self.win.ev[l];
                    let shape = f.split_params(&self.state.psi[k]).1;
                    let ll = window_log_lik(f.kind, shape, p.r, p.delta, a, b, &self.y.times[lo..hi]);
                    out.push(Opt {
                        state: i,
                        start: Start::Stay,
                        log_w: stay.ln() - self.state.omega[k] * (b - a) + ll,
                    });
                }
                for j in 0..m.e {
                    if j != i && self.q[(i, j)] > 0.0 {
                        self.push_moves(l, j, self.log_q[(i, j)], out);
                    }
                }
            }
        }
        if let Some(t) = terminal {
            for o in out.iter_mut() {
                o.log_w += if o.state == t { LOG_ZERO } else { self.log_q[(o.state, t)] };
            }
        }
    }

    fn level_of(&self, state: usize, r: f64) -> f64 {
        let k = self.spec.state_map.h[state];
        if self.spec.forms[k].has_level_param() {
            self.state.psi[k][0]
        } else {
            r
        }
    }

    /// Forward pass over windows `lo..hi`. With `propose`, samples a new
    /// trajectory into the proposal buffers; otherwise follows the current
    /// one. Returns the sum of log normalizing constants, or `None` when some
    /// window has no admissible continuation.
    pub(super) fn block_pass(&mut self, lo: usize, hi: usize, propose: bool) -> Option<f64> {
        let n = self.state.v.len();
        let terminal = (hi < n).then(|| self.state.v[hi]);
        let mut prev = if lo == 0 {
            None
        } else {
            Some(Prev {
                state: self.state.v[lo],
                delta: self.win.delta[lo],
                r: self.level_of(self.state.v[lo], self.state.r[lo]),
            })
        };
        if propose {
            self.prop_v.resize(n, 0);
            self.prop_r.resize(n, 0.0);
            self.prop_delta.resize(n, 0.0);
            if lo > 0 {
                self.prop_v[lo] = self.state.v[lo];
                self.prop_r[lo] = self.state.r[lo];
                self.prop_delta[lo] = self.win.delta[lo];
            }
        }
        let first = if lo == 0 { 0 } else { lo + 1 };
        let mut opts = std::mem::take(&mut self.opts);
        let mut total = 0.0;
        let mut ok = true;
        for l in first..hi {
            let term = if l + 1 == hi { terminal } else { None };
            self.window_options(l, prev, term, &mut opts);
            let lz = log_sum_exp(opts.iter().map(|o| o.log_w));
            if lz == LOG_ZERO || lz.is_nan() {
                ok = false;
                break;
            }
            total += lz;
            let next = if propose {
                let u = self.rng.random::<f64>();
                let mut acc = 0.0;
                let mut pick = None;
                for o in opts.iter() {
                    if o.log_w == LOG_ZERO {
                        continue;
                    }
                    acc += (o.log_w - lz).exp();
                    pick = Some(*o);
                    if u < acc {
                        break;
                    }
                }
                let o = pick.expect("positive total mass");
                let a = self.win.start[l];
                let p = match o.start {
                    Start::Stay => {
                        let p = prev.expect("stay needs a previous window");
                        Prev { state: p.state, delta: p.delta, r: p.r }
                    }
                    Start::Value(r) => Prev { state: o.state, delta: a, r },
                    Start::Draw { shape, rate } => {
                        let r = Gamma::new(shape, 1.0 / rate)
                            .expect("valid gamma")
                            .sample(&mut self.rng);
                        Prev { state: o.state, delta: a, r }
                    }
                };
                self.prop_v[l] = p.state;
                self.prop_r[l] = p.r;
                self.prop_delta[l] = p.delta;
                p
            } else {
                Prev {
                    state: self.state.v[l],
                    delta: self.win.delta[l],
                    r: self.level_of(self.state.v[l], self.state.r[l]),
                }
            };
            prev = Some(next);
        }
        self.opts = opts;
        ok.then_some(total)
    }

    /// One MH step on windows `lo..hi`. `bounds` is the partition in force
    /// when `partitioned`; proposals that would change it are rejected.
    pub(super) fn block_mh(&mut self, lo: usize, hi: usize, bounds: &[usize], partitioned: bool) -> bool {
        let Some(cur) = self.block_pass(lo, hi, false) else {
            // the current path always has positive mass; treat as a rejection
            self.stats.failed_proposals += 1;
            return false;
        };
        let Some(prop) = self.block_pass(lo, hi, true) else {
            self.stats.failed_proposals += 1;
            return false;
        };
        if partitioned {
            let mut v = self.state.v.clone();
            v[lo..hi].copy_from_slice(&self.prop_v[lo..hi]);
            let nb = boundaries(&self.state.w, &v, self.spec.k(), self.state.n_blocks);
            if nb != bounds {
                self.stats.level_set_rejects += 1;
                return false;
            }
        }
        let log_a = prop - cur;
        if log_a >= 0.0 || self.rng.random::<f64>().ln() < log_a {
            let first = if lo == 0 { 0 } else { lo + 1 };
            for l in first..hi {
                self.state.v[l] = self.prop_v[l];
                let k = self.spec.state_map.h[self.prop_v[l]];
                self.state.r[l] = if self.spec.forms[k].has_level_param() {
                    0.0
                } else {
                    self.prop_r[l]
                };
                self.win.delta[l] = self.prop_delta[l];
            }
            true
        } else {
            false
        }
    }
}

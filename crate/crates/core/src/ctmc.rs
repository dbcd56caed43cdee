//! CTMC simulation, uniformization and virtual-jump resampling.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};

use crate::error::{Error, Result};
use crate::model::{QParams, StateMap};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub state: usize,
}

/// A CTMC trajectory on `[0, S]`: initial state and non-virtual jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct CtmcPath {
    pub v0: usize,
    pub jumps: Vec<Jump>,
}

impl CtmcPath {
    pub fn constant(v0: usize) -> Self {
        Self { v0, jumps: vec![] }
    }

    pub fn state_at(&self, s: f64) -> usize {
        let i = self.jumps.partition_point(|j| j.time <= s);
        if i == 0 {
            self.v0
        } else {
            self.jumps[i - 1].state
        }
    }

    pub fn final_state(&self) -> usize {
        self.jumps.last().map_or(self.v0, |j| j.state)
    }

    /// `(start, end, state)` for every segment of the path on `[0, horizon]`.
    pub fn segments(&self, horizon: f64) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        (0..=self.jumps.len()).map(move |i| {
            let start = if i == 0 { 0.0 } else { self.jumps[i - 1].time };
            let end = self.jumps.get(i).map_or(horizon, |j| j.time);
            let state = if i == 0 { self.v0 } else { self.jumps[i - 1].state };
            (start, end, state)
        })
    }

    pub fn is_valid(&self, horizon: f64) -> bool {
        let mut prev_t = 0.0;
        let mut prev_s = self.v0;
        for j in &self.jumps {
            if !(j.time > prev_t) || j.time > horizon || j.state == prev_s {
                return false;
            }
            prev_t = j.time;
            prev_s = j.state;
        }
        true
    }
}

/// A CTMC trajectory together with the IF starting value of every segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSkeleton {
    pub path: CtmcPath,
    pub starting_values: Vec<f64>,
}

impl PathSkeleton {
    pub fn new(path: CtmcPath, starting_values: Vec<f64>) -> Result<Self> {
        if starting_values.len() != path.jumps.len() + 1 {
            return Err(Error::Dimension(format!(
                "{} starting values for {} segments",
                starting_values.len(),
                path.jumps.len() + 1
            )));
        }
        Ok(Self {
            path,
            starting_values,
        })
    }

    /// `(start, end, state, R)` per segment.
    pub fn segments(&self, horizon: f64) -> impl Iterator<Item = (f64, f64, usize, f64)> + '_ {
        self.path
            .segments(horizon)
            .zip(&self.starting_values)
            .map(|((a, b, s), &r)| (a, b, s, r))
    }

    pub fn n_jumps(&self) -> usize {
        self.path.jumps.len()
    }
}

/// Gillespie simulation of `CTMC(pi0, Q)` on `[0, S]`.
pub fn simulate_ctmc<R: Rng + ?Sized>(
    q: &DMatrix<f64>,
    pi0: &[f64],
    horizon: f64,
    rng: &mut R,
) -> CtmcPath {
    let v0 = sample_index(pi0, rng);
    simulate_ctmc_from(q, v0, 0.0, horizon, rng)
}

/// Continues a CTMC from state `v0` at time `t0` up to `horizon`.
pub fn simulate_ctmc_from<R: Rng + ?Sized>(
    q: &DMatrix<f64>,
    v0: usize,
    t0: f64,
    horizon: f64,
    rng: &mut R,
) -> CtmcPath {
    let e = q.nrows();
    let mut jumps = Vec::new();
    let mut t = t0;
    let mut cur = v0;
    let mut row = vec![0.0; e];
    loop {
        let rate = -q[(cur, cur)];
        if !(rate > 0.0) {
            break;
        }
        t += Exp::new(rate).expect("positive rate").sample(rng);
        if t > horizon {
            break;
        }
        for (j, r) in row.iter_mut().enumerate() {
            *r = if j == cur { 0.0 } else { q[(cur, j)] };
        }
        cur = sample_index(&row, rng);
        jumps.push(Jump { time: t, state: cur });
    }
    CtmcPath { v0, jumps }
}

/// Draws an index with probability proportional to `weights`.
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if u < w {
                return i;
            }
            u -= w;
            last = i;
        }
    }
    last
}

/// Per-form dominating rates `Ω_k = κ |Q_k|`.
pub fn omega_from(q: &QParams, kappa: f64) -> Vec<f64> {
    (0..q.theta_rates.len())
        .map(|k| kappa * q.holding_rate(k))
        .collect()
}

fn check_omega(q: &DMatrix<f64>, m: &StateMap, omega: &[f64], strict: bool) -> Result<()> {
    for i in 0..m.e {
        let k = m.h[i];
        let rate = -q[(i, i)];
        let bad = if strict && rate > 0.0 {
            omega[k] <= rate
        } else {
            omega[k] < rate
        };
        if bad || !omega[k].is_finite() {
            return Err(Error::InvalidOmega {
                form: k + 1,
                omega: omega[k],
                rate,
            });
        }
    }
    Ok(())
}

/// `B = I + Q / Ω_{h(j)}` row by row.
pub fn uniformization_transition(
    q: &DMatrix<f64>,
    m: &StateMap,
    omega: &[f64],
) -> Result<DMatrix<f64>> {
    check_omega(q, m, omega, false)?;
    let mut b = DMatrix::zeros(m.e, m.e);
    for i in 0..m.e {
        let w = omega[m.h[i]];
        for j in 0..m.e {
            let delta = if i == j { 1.0 } else { 0.0 };
            b[(i, j)] = if w > 0.0 { delta + q[(i, j)] / w } else { delta };
        }
    }
    Ok(b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Label {
    Virtual,
    NonVirtual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugEvent {
    pub time: f64,
    pub state: usize,
}

/// Uniformized trajectory: candidate times `W` with states `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPath {
    pub v0: usize,
    pub events: Vec<AugEvent>,
    pub omega: Vec<f64>,
}

impl AugmentedPath {
    pub fn label(&self, l: usize) -> Label {
        let prev = if l == 0 {
            self.v0
        } else {
            self.events[l - 1].state
        };
        if self.events[l].state == prev {
            Label::Virtual
        } else {
            Label::NonVirtual
        }
    }

    pub fn n_virtual(&self) -> usize {
        (0..self.events.len())
            .filter(|&l| self.label(l) == Label::Virtual)
            .count()
    }

    pub fn collapse(&self) -> CtmcPath {
        let mut jumps = Vec::new();
        let mut prev = self.v0;
        for e in &self.events {
            if e.state != prev {
                jumps.push(Jump {
                    time: e.time,
                    state: e.state,
                });
                prev = e.state;
            }
        }
        CtmcPath { v0: self.v0, jumps }
    }

    /// CSV rows `time,state,label` with one-based states.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,state,label\n");
        out.push_str(&format!("0,{},initial\n", self.v0 + 1));
        for (l, e) in self.events.iter().enumerate() {
            let lab = match self.label(l) {
                Label::Virtual => "virtual",
                Label::NonVirtual => "nonvirtual",
            };
            out.push_str(&format!("{},{},{}\n", e.time, e.state + 1, lab));
        }
        out
    }
}

/// Simulates the uniformized chain directly: candidate times at rate
/// `Ω_{h(V)}`, moves by `B`.
pub fn simulate_augmented<R: Rng + ?Sized>(
    q: &DMatrix<f64>,
    m: &StateMap,
    omega: &[f64],
    pi0: &[f64],
    horizon: f64,
    rng: &mut R,
) -> Result<AugmentedPath> {
    check_omega(q, m, omega, false)?;
    let b = uniformization_transition(q, m, omega)?;
    let v0 = sample_index(pi0, rng);
    let mut events = Vec::new();
    let mut t = 0.0;
    let mut cur = v0;
    let mut row = vec![0.0; m.e];
    loop {
        let w = omega[m.h[cur]];
        if !(w > 0.0) {
            break;
        }
        t += Exp::new(w).expect("positive rate").sample(rng);
        if t > horizon {
            break;
        }
        for (j, r) in row.iter_mut().enumerate() {
            *r = b[(cur, j)].max(0.0);
        }
        cur = sample_index(&row, rng);
        events.push(AugEvent { time: t, state: cur });
    }
    Ok(AugmentedPath {
        v0,
        events,
        omega: omega.to_vec(),
    })
}

/// Draws the virtual jumps given the skeleton: a Poisson process of rate
/// `Ω_k - |Q_k|` on each segment.
pub fn resample_virtual_jumps<R: Rng + ?Sized>(
    path: &CtmcPath,
    horizon: f64,
    q: &DMatrix<f64>,
    m: &StateMap,
    omega: &[f64],
    rng: &mut R,
) -> Result<AugmentedPath> {
    check_omega(q, m, omega, false)?;
    let mut events = Vec::with_capacity(path.jumps.len() * 2);
    let mut buf = Vec::new();
    for (i, (a, b, state)) in path.segments(horizon).enumerate() {
        let rate = omega[m.h[state]] + q[(state, state)];
        buf.clear();
        poisson_times(rate, a, b, rng, &mut buf);
        events.extend(buf.iter().map(|&time| AugEvent { time, state }));
        if let Some(j) = path.jumps.get(i) {
            events.push(AugEvent {
                time: j.time,
                state: j.state,
            });
        }
    }
    Ok(AugmentedPath {
        v0: path.v0,
        events,
        omega: omega.to_vec(),
    })
}

/// Sorted event times of a homogeneous Poisson process on `(a, b)`.
pub fn poisson_times<R: Rng + ?Sized>(rate: f64, a: f64, b: f64, rng: &mut R, out: &mut Vec<f64>) {
    let mean = rate * (b - a);
    if !(mean > 0.0) {
        return;
    }
    let n = Poisson::new(mean).expect("positive mean").sample(rng) as usize;
    let start = out.len();
    for _ in 0..n {
        let t = a + (b - a) * rng.random::<f64>();
        // a draw landing exactly on the left end would collide with a jump
        out.push(if t > a { t } else { a + (b - a) * 0.5 });
    }
    out[start..].sort_by(|x, y| x.total_cmp(y));
}

/// `exp(Q t)` by scaling and squaring.
pub fn matrix_exponential(q: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    (q * t).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_state_map;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_state() -> (DMatrix<f64>, StateMap) {
        (
            DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]),
            build_state_map(2, &[false, false]),
        )
    }

    #[test]
    fn uniformization_examples() {
        let (q, m) = two_state();
        let b = uniformization_transition(&q, &m, &[2.0, 2.0]).unwrap();
        assert_eq!(b, DMatrix::from_element(2, 2, 0.5));
        let b = uniformization_transition(&q, &m, &[1.0, 1.0]).unwrap();
        assert_eq!(b[(0, 0)], 0.0);
        assert!(uniformization_transition(&q, &m, &[0.5, 1.0]).is_err());
    }

    #[test]
    fn matrix_exponential_examples() {
        let (q, _) = two_state();
        assert_eq!(matrix_exponential(&q, 0.0), DMatrix::identity(2, 2));
        let p = matrix_exponential(&q, 1.0);
        assert!((p[(0, 0)] - 0.5 * (1.0 + (-2.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn resample_keeps_skeleton() {
        let (q, m) = two_state();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let path = CtmcPath {
            v0: 0,
            jumps: vec![
                Jump { time: 1.0, state: 1 },
                Jump { time: 2.5, state: 0 },
            ],
        };
        for _ in 0..100 {
            let aug = resample_virtual_jumps(&path, 4.0, &q, &m, &[2.0, 2.0], &mut rng).unwrap();
            assert_eq!(aug.collapse(), path);
        }
        let aug = resample_virtual_jumps(&path, 4.0, &q, &m, &[1.0, 1.0], &mut rng).unwrap();
        assert_eq!(aug.events.len(), 2);
    }

    #[test]
    fn no_jumps_when_rates_vanish() {
        let q = DMatrix::from_row_slice(2, 2, &[-1e-12, 1e-12, 1e-12, -1e-12]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n: usize = (0..1000)
            .map(|_| simulate_ctmc(&q, &[1.0, 0.0], 10.0, &mut rng).jumps.len())
            .sum();
        assert_eq!(n, 0);
    }
}

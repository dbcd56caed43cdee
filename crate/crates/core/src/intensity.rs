//! Piecewise intensity functions induced by a skeleton.

use crate::ctmc::PathSkeleton;
use crate::epidemic::{decay_integral, decay_value, growth_integral, growth_value};
use crate::error::{Error, Result};
use crate::model::{FormKind, FunctionalForm, ModelSpec};

/// One piece of the IF: form `kind` started at `start` with value `r`.
#[derive(Debug, Clone, Copy)]
pub struct Segment<'a> {
    pub start: f64,
    pub end: f64,
    pub kind: FormKind,
    pub r: f64,
    pub shape: &'a [f64],
}

/// `g(s)` for a form that started at `delta` with value `r`.
#[inline]
pub fn form_value(kind: FormKind, shape: &[f64], r: f64, delta: f64, s: f64) -> f64 {
    match kind {
        FormKind::Constant => r,
        FormKind::Linear => r + shape[0] * (s - delta),
        FormKind::Exponential => r * (shape[0] * (s - delta)).exp(),
        FormKind::EpidemicGrowth => growth_value(shape, s),
        FormKind::EpidemicDecay => decay_value(shape, r, delta, s),
    }
}

/// `∫_a^b g(s) ds` in closed form.
pub fn form_integral(kind: FormKind, shape: &[f64], r: f64, delta: f64, a: f64, b: f64) -> f64 {
    let len = b - a;
    match kind {
        FormKind::Constant => r * len,
        FormKind::Linear => {
            let (u, v) = (a - delta, b - delta);
            r * len + 0.5 * shape[0] * (v - u) * (v + u)
        }
        FormKind::Exponential => {
            let rho = shape[0];
            let x = rho * len;
            let base = r * (rho * (a - delta)).exp();
            if x.abs() < 1e-12 {
                base * len * (1.0 + 0.5 * x)
            } else {
                base * x.exp_m1() / rho
            }
        }
        FormKind::EpidemicGrowth => growth_integral(shape, a, b),
        FormKind::EpidemicDecay => decay_integral(shape, r, delta, a, b),
    }
}

/// Minimum and maximum of `g` over `[a, b]`. Every supported form is monotone.
#[inline]
pub fn form_range(kind: FormKind, shape: &[f64], r: f64, delta: f64, a: f64, b: f64) -> (f64, f64) {
    match kind {
        FormKind::Constant => (r, r),
        _ => {
            let x = form_value(kind, shape, r, delta, a);
            let y = form_value(kind, shape, r, delta, b);
            if x.is_nan() || y.is_nan() {
                (f64::NAN, f64::NAN)
            } else {
                (x.min(y), x.max(y))
            }
        }
    }
}

impl Segment<'_> {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn value(&self, s: f64) -> f64 {
        form_value(self.kind, self.shape, self.r, self.start, s)
    }

    pub fn integral(&self) -> f64 {
        form_integral(self.kind, self.shape, self.r, self.start, self.start, self.end)
    }

    pub fn min(&self) -> f64 {
        form_range(self.kind, self.shape, self.r, self.start, self.start, self.end).0
    }

    pub fn max(&self) -> f64 {
        form_range(self.kind, self.shape, self.r, self.start, self.start, self.end).1
    }
}

pub fn integrate_segment(seg: &Segment) -> f64 {
    seg.integral()
}

pub fn min_on_segment(seg: &Segment) -> f64 {
    seg.min()
}

/// The IF of a skeleton under given form parameters.
#[derive(Debug, Clone, Copy)]
pub struct Intensity<'a> {
    pub forms: &'a [FunctionalForm],
    pub params: &'a [Vec<f64>],
    pub h: &'a [usize],
    pub skel: &'a PathSkeleton,
    pub horizon: f64,
}

impl<'a> Intensity<'a> {
    pub fn segments(&self) -> impl Iterator<Item = Segment<'a>> + 'a {
        let forms = self.forms;
        let params = self.params;
        let h = self.h;
        self.skel
            .segments(self.horizon)
            .map(move |(start, end, state, r)| {
                let k = h[state];
                let (level, shape) = forms[k].split_params(&params[k]);
                Segment {
                    start,
                    end,
                    kind: forms[k].kind,
                    r: level.unwrap_or(r),
                    shape,
                }
            })
    }

    pub fn segment_at(&self, s: f64) -> Segment<'a> {
        let i = self.skel.path.jumps.partition_point(|j| j.time <= s);
        self.segments().nth(i).expect("segment index in range")
    }

    /// λ(s), right-continuous at jump times; `S` belongs to the last segment.
    pub fn value(&self, s: f64) -> f64 {
        self.segment_at(s).value(s)
    }

    pub fn integral(&self) -> f64 {
        self.segments().map(|s| s.integral()).sum()
    }

    pub fn integral_between(&self, a: f64, b: f64) -> f64 {
        self.segments()
            .filter(|s| s.end > a && s.start < b)
            .map(|s| form_integral(s.kind, s.shape, s.r, s.start, s.start.max(a), s.end.min(b)))
            .sum()
    }

    pub fn min(&self) -> f64 {
        self.segments().map(|s| s.min()).fold(f64::INFINITY, f64::min)
    }

    /// Values on a grid.
    pub fn grid_values(&self, grid: &[f64]) -> Vec<f64> {
        let segs: Vec<Segment> = self.segments().collect();
        let mut i = 0;
        grid.iter()
            .map(|&t| {
                while i + 1 < segs.len() && segs[i + 1].start <= t {
                    i += 1;
                }
                while i > 0 && segs[i].start > t {
                    i -= 1;
                }
                segs[i].value(t)
            })
            .collect()
    }
}

/// λ(s) for a skeleton under the parameters stored in `spec`.
pub fn evaluate(skel: &PathSkeleton, spec: &ModelSpec, s: f64) -> Result<f64> {
    if !(0.0..=spec.horizon).contains(&s) {
        return Err(Error::OutOfWindow {
            time: s,
            horizon: spec.horizon,
        });
    }
    let params = spec.initial_params();
    let f = Intensity {
        forms: &spec.forms,
        params: &params,
        h: &spec.state_map.h,
        skel,
        horizon: spec.horizon,
    };
    Ok(f.value(s))
}

/// Gaussian kernel estimate of the IF with reflection at `0` and `S`.
pub fn kernel_estimate(events: &[f64], horizon: f64, bandwidth: f64, grid: &[f64]) -> Result<Vec<f64>> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let norm = 1.0 / (bandwidth * crate::special::SQRT_2PI);
    let reach = 8.0 * bandwidth;
    Ok(grid
        .iter()
        .map(|&x| {
            let lo = events.partition_point(|&t| t < x - reach);
            let hi = events.partition_point(|&t| t <= x + reach);
            let mut acc = 0.0;
            for &t in &events[lo..hi] {
                let z = (x - t) / bandwidth;
                acc += (-0.5 * z * z).exp();
            }
            // mirrored copies near the edges
            if x < reach {
                let hi = events.partition_point(|&t| t <= reach - x);
                for &t in &events[..hi] {
                    let z = (x + t) / bandwidth;
                    acc += (-0.5 * z * z).exp();
                }
            }
            if x > horizon - reach {
                let lo = events.partition_point(|&t| t < horizon - reach + (horizon - x));
                for &t in &events[lo..] {
                    let z = (x - (2.0 * horizon - t)) / bandwidth;
                    acc += (-0.5 * z * z).exp();
                }
            }
            acc * norm
        })
        .collect())
}

/// Silverman's rule of thumb.
pub fn default_bandwidth(events: &[f64]) -> f64 {
    let n = events.len().max(2) as f64;
    let mean = events.iter().sum::<f64>() / n;
    let var = events.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
    1.06 * var.sqrt().max(1e-9) * n.powf(-0.2)
}

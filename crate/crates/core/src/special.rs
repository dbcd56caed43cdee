//! Normal distribution helpers and log-space arithmetic.

use libm::erfc;

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal cdf.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Φ(x)` without cancellation.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

pub fn norm_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// `G(u) = φ(u) - u (1 - Φ(u))`, so that `uΦ(u) + φ(u) = u + G(u) = G(-u)`.
fn tail_antiderivative(u: f64) -> f64 {
    norm_pdf(u) - u * norm_sf(u)
}

/// Antiderivative `F(u) = uΦ(u) + φ(u)` of the normal cdf.
pub fn norm_cdf_antiderivative(u: f64) -> f64 {
    if u < 0.0 {
        tail_antiderivative(-u)
    } else {
        u + tail_antiderivative(u)
    }
}

/// `F(u1) - F(u0)` with the linear parts cancelled analytically.
pub fn norm_cdf_integral(u0: f64, u1: f64) -> f64 {
    let part = |u: f64| {
        if u < 0.0 {
            (0.0, tail_antiderivative(-u))
        } else {
            (u, tail_antiderivative(u))
        }
    };
    let (l0, g0) = part(u0);
    let (l1, g1) = part(u1);
    (l1 - l0) + (g1 - g0)
}

/// Inverse standard normal cdf: Acklam's rational approximation followed by
/// one Halley refinement step.
pub fn norm_quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // Residual evaluated on the tail that keeps full relative precision.
    let e = if x < 0.0 {
        norm_cdf(x) - p
    } else {
        (1.0 - p) - norm_sf(x)
    };
    let u = e * SQRT_2PI * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// `ln(sum(exp(xs)))`, returning `-inf` for an empty or all-zero input.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = xs.into_iter().map(|x| (x - max).exp()).sum();
    max + s.ln()
}

pub fn gamma_ln_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Log density of a Dirichlet distribution at `p`.
pub fn dirichlet_ln_pdf(p: &[f64], alpha: &[f64]) -> f64 {
    let total: f64 = alpha.iter().sum();
    let mut out = ln_gamma(total);
    for (&x, &a) in p.iter().zip(alpha) {
        if x < 0.0 || (x == 0.0 && a < 1.0) {
            return f64::NEG_INFINITY;
        }
        out -= ln_gamma(a);
        if a != 1.0 {
            out += (a - 1.0) * x.ln();
        }
    }
    out
}

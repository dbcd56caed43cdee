//! Independent reference computations for the integration tests.
#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Kolmogorov survival function `P(K > x)`.
fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in 1..200 {
        let t = 2.0 * (-2.0 * (j * j) as f64 * x * x).exp();
        s += if j % 2 == 1 { t } else { -t };
        if t < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value. Ties are
/// handled by stepping both empirical cdfs past equal values together.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let sq = ne.sqrt();
    (d, kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d))
}

/// One-sample KS test against a continuous cdf.
pub fn ks_one_sample(x: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut x = x.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    let sq = n.sqrt();
    (d, kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d))
}

/// Pearson chi-square goodness of fit. Cells with expected count below 5
/// are pooled into their neighbours; returns `(statistic, p-value)`.
pub fn chi_square_gof(observed: &[f64], probs: &[f64]) -> (f64, f64) {
    let n: f64 = observed.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&ob, &p) in observed.iter().zip(probs) {
        o += ob;
        e += p * n;
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => cells.push((o, e)),
        }
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = (cells.len() - 1).max(1) as f64;
    (stat, ChiSquared::new(df).unwrap().sf(stat))
}

/// Adaptive Simpson quadrature.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Matrix exponential by scaling and squaring of a Taylor series.
pub fn expm(q: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    let n = q.len();
    let norm = q.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max) * t;
    let s = (norm.max(1e-300).log2().ceil().max(0.0) as i32) + 4;
    let h = t / 2f64.powi(s);
    let a: Vec<Vec<f64>> = q.iter().map(|r| r.iter().map(|x| x * h).collect()).collect();
    let mul = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| {
        let mut z = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    z[i][j] += x[i][k] * y[k][j];
                }
            }
        }
        z
    };
    let mut out: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let mut term = out.clone();
    for k in 1..30 {
        term = mul(&term, &a);
        for r in term.iter_mut() {
            for x in r.iter_mut() {
                *x /= k as f64;
            }
        }
        for i in 0..n {
            for j in 0..n {
                out[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        out = mul(&out, &out);
    }
    out
}

/// `|est - truth| ≤ k · se`.
pub fn within_se(est: f64, truth: f64, se: f64, k: f64) -> bool {
    (est - truth).abs() <= k * se
}

pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

pub fn poisson_pmf(k: usize, mean: f64) -> f64 {
    let mut lp = -mean + k as f64 * mean.ln();
    for i in 1..=k {
        lp -= (i as f64).ln();
    }
    lp.exp()
}

/// Standard normal cdf via the complementary error function of statrs.
pub fn phi(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Prints a criterion line and returns whether it passed.
pub fn report(id: u32, name: &str, pass: bool, detail: &str) -> bool {
    use std::io::Write;
    // written to the raw handle so the line shows without --nocapture
    let _ = writeln!(
        std::io::stderr(),
        "criterion {id:>2} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

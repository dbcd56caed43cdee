//! Conjugate draws for the Q parameters.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::likelihood::SuffStats;
use crate::model::{PriorSpec, QParams, RatePrior, StateMap, TransPrior};

pub type ThetaPosterior = (Vec<Option<(f64, f64)>>, Vec<Option<Vec<f64>>>);

/// Full-conditional hyperparameters given the skeleton statistics:
/// `(shape, rate)` per form and Dirichlet concentrations per form.
/// `None` marks fixed components.
pub fn theta_posterior(stats: &SuffStats, priors: &PriorSpec, m: &StateMap) -> ThetaPosterior {
    let rates = (0..m.k)
        .map(|k| match priors.theta_rates[k] {
            RatePrior::Gamma { shape, rate } => {
                Some((shape + stats.departures[k] as f64, rate + stats.tau[k]))
            }
            RatePrior::Fixed => None,
        })
        .collect();
    let trans = (0..m.k)
        .map(|k| match &priors.theta_trans[k] {
            TransPrior::Dirichlet(g) => Some(
                m.trans_targets(k)
                    .iter()
                    .zip(g)
                    .map(|(&j, &a)| a + stats.transitions[k][j] as f64)
                    .collect(),
            ),
            TransPrior::Fixed => None,
        })
        .collect();
    (rates, trans)
}

pub fn draw_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let mut x: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive concentration").sample(rng))
        .collect();
    let s: f64 = x.iter().sum();
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    } else {
        // all draws underflowed: fall back to the largest concentration
        let i = alpha
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i);
        x.iter_mut().enumerate().for_each(|(j, v)| *v = f64::from(u8::from(j == i)));
    }
    x
}

/// Draws θ from its Gamma / Dirichlet full conditionals; fixed components are
/// copied from `current`.
pub fn draw_theta<R: Rng + ?Sized>(
    stats: &SuffStats,
    priors: &PriorSpec,
    current: &QParams,
    m: &StateMap,
    rng: &mut R,
) -> QParams {
    let (rates, trans) = theta_posterior(stats, priors, m);
    let mut out = current.clone();
    for k in 0..m.k {
        if let Some((shape, rate)) = rates[k] {
            let x = Gamma::new(shape, 1.0 / rate).expect("valid gamma").sample(rng);
            out.theta_rates[k] = x.max(f64::MIN_POSITIVE);
        }
        if let Some(alpha) = &trans[k] {
            if !alpha.is_empty() {
                out.theta_trans[k] = draw_dirichlet(alpha, rng);
            }
        }
    }
    out
}

//! Built-in simulation scenarios. Each has a matching TOML file under
//! `scenarios/`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Config, EpidemicSettings};
use crate::ctmc::{CtmcPath, Jump, PathSkeleton};
use crate::epidemic::{epidemic_skeleton, EpidemicParams};
use crate::error::Result;
use crate::likelihood::PointPattern;
use crate::mcmc::SamplerConfig;
use crate::model::{
    FormKind, FunctionalForm, ModelSpec, PriorSpec, PsiPrior, QParams, RatePrior, StartingValue,
    TransPrior,
};
use crate::simulate::{simulate_events, simulate_skeleton};

/// Three-form model (increasing line, decreasing line, constant) on `[0, 50]`
/// with the IF scaled by `scale`; `informative` selects normal priors on the
/// line parameters, scaled alike.
pub fn a_config(scale: f64, informative: bool) -> Config {
    let forms = vec![
        FunctionalForm::linear(0.5 * scale, 0.25 * scale),
        FunctionalForm::linear(6.0 * scale, -0.25 * scale),
        FunctionalForm::constant(0.5 * scale),
    ];
    let psi = if informative {
        vec![
            vec![
                PsiPrior::Normal { mean: scale, sd: 2.0 * scale },
                PsiPrior::Normal { mean: 0.5 * scale, sd: 0.6 * scale },
            ],
            vec![
                PsiPrior::Normal { mean: 5.0 * scale, sd: 2.0 * scale },
                PsiPrior::Normal { mean: -0.5 * scale, sd: 0.6 * scale },
            ],
            vec![PsiPrior::Gamma { shape: 1.0, rate: 1.0 / scale }],
        ]
    } else {
        vec![
            vec![PsiPrior::flat(); 2],
            vec![PsiPrior::flat(); 2],
            vec![PsiPrior::Gamma { shape: 1.0, rate: 1.0 }],
        ]
    };
    let spec = ModelSpec::new(
        forms,
        QParams {
            theta_rates: vec![0.05; 3],
            theta_trans: vec![vec![0.5, 0.5]; 3],
        },
        PriorSpec {
            theta_rates: vec![RatePrior::Fixed; 3],
            theta_trans: vec![TransPrior::Fixed; 3],
            psi,
        },
        None,
        50.0,
    );
    let truth = PathSkeleton::new(
        CtmcPath {
            v0: 1,
            jumps: vec![
                Jump { time: 14.2, state: 2 },
                Jump { time: 36.5, state: 0 },
            ],
        },
        vec![6.0 * scale, 0.5 * scale, 0.5 * scale],
    )
    .expect("three segments");
    Config {
        spec,
        sampler: SamplerConfig {
            n_iter: 50_000,
            burn_in: 10_000,
            adapt_until: 10_000,
            ..SamplerConfig::default()
        },
        chains: 1,
        data_kind: Default::default(),
        truth: Some(truth),
        epidemic: None,
    }
}

pub fn a1() -> Config {
    a_config(1.0, true)
}

/// Three forms with self-jumps for both lines; `levels` are
/// `[[ψ11, ψ12], [ψ21, ψ22], [ψ31]]`.
pub fn b_config(levels: [[f64; 2]; 2], constant: f64, horizon: f64, truth: PathSkeleton) -> Config {
    let forms = vec![
        FunctionalForm::linear(levels[0][0], levels[0][1]).with_self_jump(true),
        FunctionalForm::linear(levels[1][0], levels[1][1]).with_self_jump(true),
        FunctionalForm::constant(constant),
    ];
    let spec = ModelSpec::new(
        forms,
        QParams {
            theta_rates: vec![1.0 / 15.0; 3],
            theta_trans: vec![vec![1.0 / 3.0; 3], vec![1.0 / 3.0; 3], vec![0.5, 0.5]],
        },
        PriorSpec {
            theta_rates: vec![
                RatePrior::Gamma { shape: 1.0, rate: 10.0 },
                RatePrior::Gamma { shape: 1.0, rate: 10.0 },
                RatePrior::Gamma { shape: 1.0, rate: 5.0 },
            ],
            theta_trans: vec![
                TransPrior::Dirichlet(vec![1.0; 3]),
                TransPrior::Dirichlet(vec![1.0; 3]),
                TransPrior::Dirichlet(vec![1.0; 2]),
            ],
            psi: vec![vec![PsiPrior::flat(); 2], vec![PsiPrior::flat(); 2], vec![PsiPrior::flat()]],
        },
        None,
        horizon,
    );
    Config {
        spec,
        sampler: SamplerConfig {
            n_iter: 50_000,
            burn_in: 10_000,
            adapt_until: 10_000,
            ..SamplerConfig::default()
        },
        chains: 1,
        data_kind: Default::default(),
        truth: Some(truth),
        epidemic: None,
    }
}

pub const EPIDEMIC_TRUTH: EpidemicParams = EpidemicParams {
    a: 250.0,
    b1: 9.0,
    d1: -2.2,
    c1_dot: 2.5,
    b2: 12.0,
    d2: 1.0,
    c2_dot: 1.25,
};

/// Normal-cdf growth and decay with parameters of the magnitude seen in
/// dengue data: `a = 250, b1 = 9, d1 = -2.2, ċ1 = 2.5, b2 = 12, d2 = 1,
/// ċ2 = 1.25`, change at day 150 of 371.
pub fn epidemic() -> Config {
    let forms = vec![
        FunctionalForm::new(
            FormKind::EpidemicGrowth,
            vec![250.0, 9.0, -2.2, 2.5],
            StartingValue::Fixed(0.0),
        ),
        FunctionalForm::new(
            FormKind::EpidemicDecay,
            vec![12.0, 1.0, 1.25],
            StartingValue::Fixed(0.0),
        ),
    ];
    let lower0 = |x: f64| PsiPrior::ImproperUniform { lower: Some(x), upper: None };
    let spec = ModelSpec::new(
        forms,
        QParams {
            theta_rates: vec![1.0 / 120.0, 1.0 / 250.0],
            theta_trans: vec![vec![1.0], vec![1.0]],
        },
        PriorSpec {
            theta_rates: vec![RatePrior::Fixed; 2],
            theta_trans: vec![TransPrior::Fixed; 2],
            psi: vec![
                vec![
                    PsiPrior::TruncatedUniform { lower: 0.0, upper: 400.0 },
                    lower0(0.0),
                    PsiPrior::flat(),
                    lower0(0.0),
                ],
                vec![
                    lower0(0.0),
                    PsiPrior::ImproperUniform { lower: None, upper: Some(3.0) },
                    lower0(0.0),
                ],
            ],
        },
        Some(vec![1.0, 0.0]),
        371.0,
    );
    Config {
        spec,
        sampler: SamplerConfig {
            n_iter: 6_000,
            burn_in: 2_000,
            adapt_until: 2_000,
            omega_multiplier: 5.0,
            ..SamplerConfig::default()
        },
        chains: 1,
        data_kind: Default::default(),
        truth: Some(epidemic_skeleton(&EPIDEMIC_TRUTH, 150.0)),
        epidemic: Some(EpidemicSettings {
            change_window: None,
            change_time: Some(150.0),
        }),
    }
}

/// The epidemic scenario observed only up to `horizon`, with `b2` fixed at
/// its true value.
pub fn epidemic_truncated(horizon: f64) -> Config {
    let mut cfg = epidemic();
    cfg.spec.horizon = horizon;
    cfg.spec.priors.psi[1][0] = PsiPrior::Fixed;
    cfg
}

/// Events simulated from a config's truth path with the given seed.
pub fn simulate_truth(cfg: &Config, seed: u64) -> Result<PointPattern> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = cfg.spec.initial_params();
    let truth = cfg
        .truth
        .as_ref()
        .ok_or_else(|| crate::Error::Config("scenario has no truth path".into()))?;
    let t = simulate_events(&cfg.spec, &params, truth, &mut rng)?;
    PointPattern::new(t, cfg.spec.horizon)
}

/// First seed from `start` whose simulated data has exactly `n` events.
pub fn seed_with_count(cfg: &Config, n: usize, start: u64) -> Result<u64> {
    (start..start + 100_000)
        .find(|&s| simulate_truth(cfg, s).map(|y| y.len() == n).unwrap_or(false))
        .ok_or_else(|| crate::Error::Config(format!("no seed gives {n} events")))
}

fn b_scenario(levels: [[f64; 2]; 2], constant: f64, horizon: f64, seed: u64) -> Config {
    let placeholder = PathSkeleton::new(CtmcPath::constant(0), vec![levels[0][0]]).expect("one segment");
    let mut cfg = b_config(levels, constant, horizon, placeholder);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = cfg.spec.initial_params();
    cfg.truth =
        Some(simulate_skeleton(&cfg.spec, &params, 1000, &mut rng).expect("non-negative path"));
    cfg
}

/// Ten IF changes, about 2000 expected events.
pub fn b1() -> Config {
    b_scenario([[1.7, 0.85], [20.4, -0.85]], 1.7, 130.0, 9)
}

/// Twenty IF changes, about 2000 expected events.
pub fn b2() -> Config {
    b_scenario([[1.0, 0.5], [12.0, -0.5]], 1.0, 240.0, 174)
}

/// Forty IF changes, about 2000 expected events.
pub fn b3() -> Config {
    b_scenario([[0.5, 0.25], [6.0, -0.25]], 0.5, 515.0, 277)
}

/// Scenario by name: `a1`..`a5`, `b1`..`b3`, `epidemic`.
pub fn by_name(name: &str) -> Option<Config> {
    Some(match name {
        "a1" => a1(),
        "a2" => a_config(5.0, false),
        "a3" => a_config(20.0, false),
        "a4" => a_config(100.0, false),
        "a5" => a_config(300.0, false),
        "b1" => b1(),
        "b2" => b2(),
        "b3" => b3(),
        "epidemic" => epidemic(),
        _ => return None,
    })
}

pub const NAMES: [&str; 9] = ["a1", "a2", "a3", "a4", "a5", "b1", "b2", "b3", "epidemic"];

//! TOML run configuration: model, sampler settings and optional truth.
//!
//! ```toml
//! horizon = 50.0
//!
//! [[forms]]
//! kind = "linear"             # constant | linear | exponential | epidemic_growth | epidemic_decay
//! psi = [0.25]                # shape parameters
//! starting_value = { fixed = 0.5 }   # or { discrete = [..] } / { gamma = { shape = .., rate = .. } }
//! self_jump = false
//!
//! [qmatrix]
//! rates = [0.05]
//! transitions = [[]]
//! pi0 = [1.0]                 # optional, states are numbered 1..E
//!
//! [priors]
//! theta_rates = [{ gamma = { shape = 1.0, rate = 10.0 } }]   # or "fixed"
//! theta_trans = [{ dirichlet = [1.0, 1.0] }]                 # or "fixed"
//! psi = [[{ normal = { mean = 1.0, sd = 2.0 } }, "flat"]]
//!
//! [mcmc]
//! n_iter = 10000
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ctmc::{CtmcPath, Jump, PathSkeleton};
use crate::error::{Error, Result};
use crate::mcmc::SamplerConfig;
use crate::model::{
    build_state_map, FormKind, FunctionalForm, ModelSpec, PriorSpec, PsiPrior, QParams, RatePrior,
    StartingValue, TransPrior,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindCfg {
    Constant,
    Linear,
    Exponential,
    EpidemicGrowth,
    EpidemicDecay,
}

impl From<KindCfg> for FormKind {
    fn from(k: KindCfg) -> Self {
        match k {
            KindCfg::Constant => FormKind::Constant,
            KindCfg::Linear => FormKind::Linear,
            KindCfg::Exponential => FormKind::Exponential,
            KindCfg::EpidemicGrowth => FormKind::EpidemicGrowth,
            KindCfg::EpidemicDecay => FormKind::EpidemicDecay,
        }
    }
}

impl From<FormKind> for KindCfg {
    fn from(k: FormKind) -> Self {
        match k {
            FormKind::Constant => KindCfg::Constant,
            FormKind::Linear => KindCfg::Linear,
            FormKind::Exponential => KindCfg::Exponential,
            FormKind::EpidemicGrowth => KindCfg::EpidemicGrowth,
            FormKind::EpidemicDecay => KindCfg::EpidemicDecay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum StartCfg {
    Fixed(f64),
    Discrete(Vec<f64>),
    Gamma { shape: f64, rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FormCfg {
    kind: KindCfg,
    #[serde(default)]
    psi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    starting_value: Option<StartCfg>,
    #[serde(default)]
    self_jump: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QCfg {
    rates: Vec<f64>,
    transitions: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pi0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum RatePriorCfg {
    Fixed,
    Gamma { shape: f64, rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum TransPriorCfg {
    Fixed,
    Dirichlet(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum PsiPriorCfg {
    Flat,
    Fixed,
    ImproperUniform {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        upper: Option<f64>,
    },
    Normal { mean: f64, sd: f64 },
    Gamma { shape: f64, rate: f64 },
    TruncatedUniform { lower: f64, upper: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorsCfg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_rates: Option<Vec<RatePriorCfg>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_trans: Option<Vec<TransPriorCfg>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    psi: Option<Vec<Vec<PsiPriorCfg>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct McmcCfg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    thin: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega_multiplier: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ctmc_updates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adapt_window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adapt_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adapt_until: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rw_target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    full_block_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_blocks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    chains: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruthCfg {
    /// One-based initial state.
    v0: usize,
    /// `[time, one-based state]` pairs.
    #[serde(default)]
    jumps: Vec<(f64, usize)>,
    starting_values: Vec<f64>,
}

/// Settings for the epidemic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpidemicSettings {
    /// Truncation window for the change time; defaults to half and one and a
    /// half times the peak of a kernel estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub change_window: Option<(f64, f64)>,
    /// Initial (or true, for simulation) change time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub change_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    #[default]
    EventTimes,
    WeeklyCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileCfg {
    horizon: f64,
    #[serde(default, skip_serializing_if = "is_default")]
    data_kind: DataKind,
    forms: Vec<FormCfg>,
    qmatrix: QCfg,
    #[serde(default)]
    priors: PriorsCfg,
    #[serde(default)]
    mcmc: McmcCfg,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth: Option<TruthCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epidemic: Option<EpidemicSettings>,
}

fn is_default<T: Default + PartialEq>(x: &T) -> bool {
    *x == T::default()
}

/// A parsed configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub spec: ModelSpec,
    pub sampler: SamplerConfig,
    pub chains: usize,
    pub data_kind: DataKind,
    pub truth: Option<PathSkeleton>,
    pub epidemic: Option<EpidemicSettings>,
}

const EPIDEMIC_PLACEHOLDER_START: f64 = 0.0;

fn to_start(s: Option<StartCfg>, kind: FormKind, i: usize) -> Result<StartingValue> {
    match s {
        Some(StartCfg::Fixed(v)) => Ok(StartingValue::Fixed(v)),
        Some(StartCfg::Discrete(v)) => Ok(StartingValue::Discrete(v)),
        Some(StartCfg::Gamma { shape, rate }) => Ok(StartingValue::Gamma { shape, rate }),
        None if kind.is_epidemic() => Ok(StartingValue::Fixed(EPIDEMIC_PLACEHOLDER_START)),
        None => Err(Error::Config(format!("form {}: missing starting_value", i + 1))),
    }
}

fn from_start(s: &StartingValue, kind: FormKind) -> Option<StartCfg> {
    if kind.is_epidemic() {
        return None;
    }
    Some(match s {
        StartingValue::Fixed(v) => StartCfg::Fixed(*v),
        StartingValue::Discrete(v) => StartCfg::Discrete(v.clone()),
        StartingValue::Gamma { shape, rate } => StartCfg::Gamma {
            shape: *shape,
            rate: *rate,
        },
    })
}

fn to_psi_prior(p: PsiPriorCfg) -> PsiPrior {
    match p {
        PsiPriorCfg::Flat => PsiPrior::flat(),
        PsiPriorCfg::Fixed => PsiPrior::Fixed,
        PsiPriorCfg::ImproperUniform { lower, upper } => PsiPrior::ImproperUniform { lower, upper },
        PsiPriorCfg::Normal { mean, sd } => PsiPrior::Normal { mean, sd },
        PsiPriorCfg::Gamma { shape, rate } => PsiPrior::Gamma { shape, rate },
        PsiPriorCfg::TruncatedUniform { lower, upper } => PsiPrior::TruncatedUniform { lower, upper },
    }
}

fn from_psi_prior(p: &PsiPrior) -> PsiPriorCfg {
    match *p {
        PsiPrior::ImproperUniform {
            lower: None,
            upper: None,
        } => PsiPriorCfg::Flat,
        PsiPrior::ImproperUniform { lower, upper } => PsiPriorCfg::ImproperUniform { lower, upper },
        PsiPrior::Normal { mean, sd } => PsiPriorCfg::Normal { mean, sd },
        PsiPrior::Gamma { shape, rate } => PsiPriorCfg::Gamma { shape, rate },
        PsiPrior::TruncatedUniform { lower, upper } => PsiPriorCfg::TruncatedUniform { lower, upper },
        PsiPrior::Fixed => PsiPriorCfg::Fixed,
    }
}

impl Config {
    /// Wraps a spec with default sampler settings.
    pub fn new(spec: ModelSpec) -> Self {
        Self {
            spec,
            sampler: SamplerConfig::default(),
            chains: 1,
            data_kind: DataKind::EventTimes,
            truth: None,
            epidemic: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let f: FileCfg = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_file_cfg(f)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    fn from_file_cfg(f: FileCfg) -> Result<Self> {
        let k = f.forms.len();
        let mut forms = Vec::with_capacity(k);
        for (i, fc) in f.forms.into_iter().enumerate() {
            let kind: FormKind = fc.kind.into();
            forms.push(FunctionalForm {
                kind,
                psi: fc.psi,
                starting_value: to_start(fc.starting_value, kind, i)?,
                self_jump: fc.self_jump,
            });
        }
        let flags: Vec<bool> = forms.iter().map(|f| f.self_jump).collect();
        let m = build_state_map(k, &flags);
        let q = QParams {
            theta_rates: f.qmatrix.rates,
            theta_trans: f.qmatrix.transitions,
        };
        let theta_rates = match f.priors.theta_rates {
            Some(v) => v
                .into_iter()
                .map(|p| match p {
                    RatePriorCfg::Fixed => RatePrior::Fixed,
                    RatePriorCfg::Gamma { shape, rate } => RatePrior::Gamma { shape, rate },
                })
                .collect(),
            None => vec![RatePrior::Fixed; k],
        };
        let theta_trans = match f.priors.theta_trans {
            Some(v) => v
                .into_iter()
                .map(|p| match p {
                    TransPriorCfg::Fixed => TransPrior::Fixed,
                    TransPriorCfg::Dirichlet(g) => TransPrior::Dirichlet(g),
                })
                .collect(),
            None => vec![TransPrior::Fixed; k],
        };
        let psi = match f.priors.psi {
            Some(v) => v
                .into_iter()
                .map(|ps| ps.into_iter().map(to_psi_prior).collect())
                .collect(),
            None => forms
                .iter()
                .map(|f| vec![PsiPrior::flat(); f.n_params()])
                .collect(),
        };
        let spec = ModelSpec::new(
            forms,
            q,
            PriorSpec {
                theta_rates,
                theta_trans,
                psi,
            },
            f.qmatrix.pi0,
            f.horizon,
        );
        let d = SamplerConfig::default();
        let mc = f.mcmc;
        let omega_default = if spec.is_epidemic() { 5.0 } else { d.omega_multiplier };
        let sampler = SamplerConfig {
            n_iter: mc.n_iter.unwrap_or(d.n_iter),
            burn_in: mc.burn_in.unwrap_or(d.burn_in),
            thin: mc.thin.unwrap_or(d.thin),
            omega_multiplier: mc.omega_multiplier.unwrap_or(omega_default),
            ctmc_updates: mc.ctmc_updates.unwrap_or(d.ctmc_updates),
            adapt_window: mc.adapt_window.unwrap_or(d.adapt_window),
            adapt_threshold: mc.adapt_threshold.unwrap_or(d.adapt_threshold),
            adapt_until: mc.adapt_until.unwrap_or(d.adapt_until),
            rw_target: mc.rw_target.unwrap_or(d.rw_target),
            full_block_prob: mc.full_block_prob.unwrap_or(d.full_block_prob),
            initial_blocks: mc.initial_blocks.unwrap_or(d.initial_blocks),
            seed: mc.seed.unwrap_or(d.seed),
        };
        let truth = match f.truth {
            Some(t) => {
                let one_based = |s: usize| {
                    s.checked_sub(1)
                        .filter(|&x| x < m.e)
                        .ok_or_else(|| Error::Config(format!("truth: state {s} out of range")))
                };
                let path = CtmcPath {
                    v0: one_based(t.v0)?,
                    jumps: t
                        .jumps
                        .iter()
                        .map(|&(time, s)| Ok(Jump { time, state: one_based(s)? }))
                        .collect::<Result<_>>()?,
                };
                Some(PathSkeleton::new(path, t.starting_values)?)
            }
            None => None,
        };
        Ok(Self {
            spec,
            sampler,
            chains: mc.chains.unwrap_or(1),
            data_kind: f.data_kind,
            truth,
            epidemic: f.epidemic,
        })
    }

    fn to_file_cfg(&self) -> FileCfg {
        let s = &self.spec;
        let d = SamplerConfig::default();
        let c = &self.sampler;
        let opt = |x: usize, y: usize| (x != y).then_some(x);
        let optf = |x: f64, y: f64| (x != y).then_some(x);
        let omega_default = if s.is_epidemic() { 5.0 } else { d.omega_multiplier };
        FileCfg {
            horizon: s.horizon,
            data_kind: self.data_kind,
            forms: s
                .forms
                .iter()
                .map(|f| FormCfg {
                    kind: f.kind.into(),
                    psi: f.psi.clone(),
                    starting_value: from_start(&f.starting_value, f.kind),
                    self_jump: f.self_jump,
                })
                .collect(),
            qmatrix: QCfg {
                rates: s.q.theta_rates.clone(),
                transitions: s.q.theta_trans.clone(),
                pi0: Some(s.pi0.clone()),
            },
            priors: PriorsCfg {
                theta_rates: Some(
                    s.priors
                        .theta_rates
                        .iter()
                        .map(|p| match *p {
                            RatePrior::Fixed => RatePriorCfg::Fixed,
                            RatePrior::Gamma { shape, rate } => RatePriorCfg::Gamma { shape, rate },
                        })
                        .collect(),
                ),
                theta_trans: Some(
                    s.priors
                        .theta_trans
                        .iter()
                        .map(|p| match p {
                            TransPrior::Fixed => TransPriorCfg::Fixed,
                            TransPrior::Dirichlet(g) => TransPriorCfg::Dirichlet(g.clone()),
                        })
                        .collect(),
                ),
                psi: Some(
                    s.priors
                        .psi
                        .iter()
                        .map(|ps| ps.iter().map(from_psi_prior).collect())
                        .collect(),
                ),
            },
            mcmc: McmcCfg {
                n_iter: opt(c.n_iter, d.n_iter),
                burn_in: opt(c.burn_in, d.burn_in),
                thin: opt(c.thin, d.thin),
                omega_multiplier: optf(c.omega_multiplier, omega_default),
                ctmc_updates: opt(c.ctmc_updates, d.ctmc_updates),
                adapt_window: opt(c.adapt_window, d.adapt_window),
                adapt_threshold: optf(c.adapt_threshold, d.adapt_threshold),
                adapt_until: opt(c.adapt_until, d.adapt_until),
                rw_target: optf(c.rw_target, d.rw_target),
                full_block_prob: optf(c.full_block_prob, d.full_block_prob),
                initial_blocks: opt(c.initial_blocks, d.initial_blocks),
                seed: (c.seed != d.seed).then_some(c.seed),
                chains: opt(self.chains, 1),
            },
            truth: self.truth.as_ref().map(|t| TruthCfg {
                v0: t.path.v0 + 1,
                jumps: t.path.jumps.iter().map(|j| (j.time, j.state + 1)).collect(),
                starting_values: t.starting_values.clone(),
            }),
            epidemic: self.epidemic.clone(),
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(&self.to_file_cfg()).map_err(|e| Error::Config(e.to_string()))
    }
}

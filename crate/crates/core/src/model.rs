//! Model objects: functional forms, the CTMC state map, Q-matrix parameters
//! and priors.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FormKind {
    Constant,
    Linear,
    Exponential,
    EpidemicGrowth,
    EpidemicDecay,
}

impl FormKind {
    /// Number of shape parameters (excluding the level).
    pub fn n_shape(self) -> usize {
        match self {
            FormKind::Constant => 0,
            FormKind::Linear | FormKind::Exponential => 1,
            FormKind::EpidemicGrowth => 4,
            FormKind::EpidemicDecay => 3,
        }
    }

    pub fn is_epidemic(self) -> bool {
        matches!(self, FormKind::EpidemicGrowth | FormKind::EpidemicDecay)
    }

    pub fn name(self) -> &'static str {
        match self {
            FormKind::Constant => "constant",
            FormKind::Linear => "linear",
            FormKind::Exponential => "exponential",
            FormKind::EpidemicGrowth => "epidemic_growth",
            FormKind::EpidemicDecay => "epidemic_decay",
        }
    }
}

/// How the IF value at the start of each visit is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum StartingValue {
    /// One level shared by every visit. It is estimated as the first
    /// parameter of the form; the value here is its initial value.
    Fixed(f64),
    /// Redrawn on every visit, uniformly from a finite support.
    Discrete(Vec<f64>),
    /// Redrawn on every visit from Gamma(shape, rate). Constant forms only.
    Gamma { shape: f64, rate: f64 },
}

impl StartingValue {
    pub fn varies(&self) -> bool {
        !matches!(self, StartingValue::Fixed(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalForm {
    pub kind: FormKind,
    /// Shape parameters: slope for linear, rate for exponential,
    /// `(a, b1, d1, c1_dot)` for epidemic growth and `(b2, d2, c2_dot)` for decay.
    pub psi: Vec<f64>,
    pub starting_value: StartingValue,
    pub self_jump: bool,
}

impl FunctionalForm {
    pub fn new(kind: FormKind, psi: Vec<f64>, starting_value: StartingValue) -> Self {
        Self {
            kind,
            psi,
            starting_value,
            self_jump: false,
        }
    }

    pub fn constant(level: f64) -> Self {
        Self::new(FormKind::Constant, vec![], StartingValue::Fixed(level))
    }

    pub fn linear(intercept: f64, slope: f64) -> Self {
        Self::new(FormKind::Linear, vec![slope], StartingValue::Fixed(intercept))
    }

    pub fn exponential(level: f64, rate: f64) -> Self {
        Self::new(FormKind::Exponential, vec![rate], StartingValue::Fixed(level))
    }

    pub fn with_self_jump(mut self, on: bool) -> Self {
        self.self_jump = on;
        self
    }

    /// True when the level is a parameter of the form rather than a
    /// per-visit draw.
    pub fn has_level_param(&self) -> bool {
        !self.kind.is_epidemic() && !self.starting_value.varies()
    }

    /// Length of the full parameter vector `[level?, shape...]`.
    pub fn n_params(&self) -> usize {
        self.kind.n_shape() + usize::from(self.has_level_param())
    }

    pub fn initial_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        if self.has_level_param() {
            if let StartingValue::Fixed(v) = self.starting_value {
                out.push(v);
            }
        }
        out.extend_from_slice(&self.psi);
        out
    }

    /// Splits a full parameter vector into `(level, shape)`.
    pub fn split_params<'a>(&self, params: &'a [f64]) -> (Option<f64>, &'a [f64]) {
        if self.has_level_param() {
            (Some(params[0]), &params[1..])
        } else {
            (None, params)
        }
    }

    pub fn param_names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.has_level_param() {
            out.push("level");
        }
        out.extend_from_slice(match self.kind {
            FormKind::Constant => &[][..],
            FormKind::Linear => &["slope"],
            FormKind::Exponential => &["rate"],
            FormKind::EpidemicGrowth => &["a", "b1", "d1", "c1_dot"],
            FormKind::EpidemicDecay => &["b2", "d2", "c2_dot"],
        });
        out
    }
}

/// CTMC states and their functional forms. Indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateMap {
    pub k: usize,
    pub e: usize,
    pub h: Vec<usize>,
    pub self_jump: Vec<bool>,
}

pub fn build_state_map(k: usize, self_jump: &[bool]) -> StateMap {
    let any = self_jump.iter().any(|&f| f);
    let e = if any { 2 * k } else { k };
    StateMap {
        k,
        e,
        h: (0..e).map(|j| j % k).collect(),
        self_jump: self_jump.to_vec(),
    }
}

impl StateMap {
    /// Forms reachable from form `k`, in the order used by `theta_trans[k]`.
    pub fn trans_targets(&self, k: usize) -> Vec<usize> {
        (0..self.k)
            .filter(|&j| j != k || self.self_jump[k])
            .collect()
    }

    pub fn trans_len(&self, k: usize) -> usize {
        self.k - 1 + usize::from(self.self_jump[k])
    }

    /// State entered when form `from_state`'s chain moves to form `to`.
    pub fn target_state(&self, from_state: usize, to: usize) -> usize {
        let k = self.h[from_state];
        if to != k {
            to
        } else if from_state < self.k {
            self.k + k
        } else {
            k
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QParams {
    pub theta_rates: Vec<f64>,
    pub theta_trans: Vec<Vec<f64>>,
}

impl QParams {
    /// Holding rate |Q_k| of form `k`; zero when the form has nowhere to go.
    pub fn holding_rate(&self, k: usize) -> f64 {
        if self.theta_trans[k].is_empty() {
            0.0
        } else {
            self.theta_rates[k]
        }
    }

    pub fn validate(&self, m: &StateMap) -> Result<()> {
        if self.theta_rates.len() != m.k || self.theta_trans.len() != m.k {
            return Err(Error::Dimension(format!(
                "expected {} rates and transition vectors, got {} and {}",
                m.k,
                self.theta_rates.len(),
                self.theta_trans.len()
            )));
        }
        for k in 0..m.k {
            if self.theta_trans[k].len() != m.trans_len(k) {
                return Err(Error::Dimension(format!(
                    "form {}: transition vector has length {}, expected {}",
                    k + 1,
                    self.theta_trans[k].len(),
                    m.trans_len(k)
                )));
            }
            if !(self.theta_rates[k] > 0.0) || !self.theta_rates[k].is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "form {}: rate must be positive",
                    k + 1
                )));
            }
            let p = &self.theta_trans[k];
            if p.iter().any(|&x| !(x >= 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "form {}: negative transition probability",
                    k + 1
                )));
            }
            let s: f64 = p.iter().sum();
            if !p.is_empty() && (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "form {}: transition probabilities sum to {s}",
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

/// Expands `(θ, θ_k·)` into the E×E generator, with self-jumps routed
/// between the two copies of a form.
pub fn expand_q_matrix(q: &QParams, m: &StateMap) -> Result<DMatrix<f64>> {
    if q.theta_rates.len() != m.k || q.theta_trans.len() != m.k {
        return Err(Error::Dimension(format!(
            "Q parameters for {} forms, state map has {}",
            q.theta_rates.len(),
            m.k
        )));
    }
    let mut out = DMatrix::zeros(m.e, m.e);
    for i in 0..m.e {
        let k = m.h[i];
        let targets = m.trans_targets(k);
        if q.theta_trans[k].len() != targets.len() {
            return Err(Error::Dimension(format!(
                "form {}: transition vector has length {}, expected {}",
                k + 1,
                q.theta_trans[k].len(),
                targets.len()
            )));
        }
        let mut total = 0.0;
        for (&to, &p) in targets.iter().zip(&q.theta_trans[k]) {
            let rate = q.theta_rates[k] * p;
            out[(i, m.target_state(i, to))] += rate;
            total += rate;
        }
        out[(i, i)] = -total;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RatePrior {
    Gamma { shape: f64, rate: f64 },
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransPrior {
    Dirichlet(Vec<f64>),
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PsiPrior {
    ImproperUniform { lower: Option<f64>, upper: Option<f64> },
    Normal { mean: f64, sd: f64 },
    Gamma { shape: f64, rate: f64 },
    TruncatedUniform { lower: f64, upper: f64 },
    /// Held at its initial value.
    Fixed,
}

impl PsiPrior {
    pub fn flat() -> Self {
        PsiPrior::ImproperUniform {
            lower: None,
            upper: None,
        }
    }

    /// Log density up to a constant; `-inf` outside the support.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        use crate::special::{gamma_ln_pdf, norm_ln_pdf};
        match *self {
            PsiPrior::ImproperUniform { lower, upper } => {
                if lower.is_some_and(|l| x <= l) || upper.is_some_and(|u| x >= u) {
                    f64::NEG_INFINITY
                } else {
                    0.0
                }
            }
            PsiPrior::Normal { mean, sd } => norm_ln_pdf(x, mean, sd),
            PsiPrior::Gamma { shape, rate } => gamma_ln_pdf(x, shape, rate),
            PsiPrior::TruncatedUniform { lower, upper } => {
                if x > lower && x < upper {
                    -(upper - lower).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            PsiPrior::Fixed => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub theta_rates: Vec<RatePrior>,
    pub theta_trans: Vec<TransPrior>,
    /// Per form, one prior per entry of the full parameter vector.
    pub psi: Vec<Vec<PsiPrior>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub forms: Vec<FunctionalForm>,
    pub state_map: StateMap,
    /// Initial Q parameters; the values used when a prior is `Fixed`.
    pub q: QParams,
    pub priors: PriorSpec,
    pub pi0: Vec<f64>,
    pub horizon: f64,
}

/// Uniform over the first-copy states.
pub fn default_pi0(m: &StateMap) -> Vec<f64> {
    (0..m.e)
        .map(|j| if j < m.k { 1.0 / m.k as f64 } else { 0.0 })
        .collect()
}

impl ModelSpec {
    /// Builds a spec whose state map follows the forms' self-jump flags.
    pub fn new(
        forms: Vec<FunctionalForm>,
        q: QParams,
        priors: PriorSpec,
        pi0: Option<Vec<f64>>,
        horizon: f64,
    ) -> Self {
        let flags: Vec<bool> = forms.iter().map(|f| f.self_jump).collect();
        let state_map = build_state_map(forms.len(), &flags);
        let pi0 = pi0.unwrap_or_else(|| default_pi0(&state_map));
        Self {
            forms,
            state_map,
            q,
            priors,
            pi0,
            horizon,
        }
    }

    pub fn k(&self) -> usize {
        self.state_map.k
    }

    pub fn initial_params(&self) -> Vec<Vec<f64>> {
        self.forms.iter().map(|f| f.initial_params()).collect()
    }

    pub fn is_epidemic(&self) -> bool {
        self.forms.iter().any(|f| f.kind.is_epidemic())
    }

    /// Every violated invariant, as human-readable messages.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let k = self.forms.len();
        if k == 0 {
            out.push("at least one functional form is required".into());
            return out;
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            out.push(format!("horizon must be positive, got {}", self.horizon));
        }

        let m = &self.state_map;
        let flags: Vec<bool> = self.forms.iter().map(|f| f.self_jump).collect();
        if *m != build_state_map(k, &flags) {
            out.push("state map does not match the forms' self-jump flags".into());
        }

        for (i, f) in self.forms.iter().enumerate() {
            let n = i + 1;
            if f.psi.len() != f.kind.n_shape() {
                out.push(format!(
                    "form {n}: {} takes {} shape parameters, got {}",
                    f.kind.name(),
                    f.kind.n_shape(),
                    f.psi.len()
                ));
            }
            if f.psi.iter().any(|x| !x.is_finite()) {
                out.push(format!("form {n}: non-finite shape parameter"));
            }
            match &f.starting_value {
                StartingValue::Fixed(v) => {
                    if !v.is_finite() {
                        out.push(format!("form {n}: non-finite starting value"));
                    }
                }
                StartingValue::Discrete(s) => {
                    if s.is_empty() {
                        out.push(format!("form {n}: empty starting-value support"));
                    }
                    if s.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                        out.push(format!("form {n}: starting-value support must be positive"));
                    }
                    if s.windows(2).any(|w| w[1] <= w[0]) {
                        out.push(format!(
                            "form {n}: starting-value support must be strictly increasing"
                        ));
                    }
                }
                StartingValue::Gamma { shape, rate } => {
                    if f.kind != FormKind::Constant {
                        out.push(format!(
                            "form {n}: continuous starting-value prior on non-constant form"
                        ));
                    }
                    if !(*shape > 0.0 && *rate > 0.0) {
                        out.push(format!("form {n}: Gamma hyperparameters must be positive"));
                    }
                }
            }
        }

        let n_epi = self.forms.iter().filter(|f| f.kind.is_epidemic()).count();
        if n_epi > 0
            && !(k == 2
                && self.forms[0].kind == FormKind::EpidemicGrowth
                && self.forms[1].kind == FormKind::EpidemicDecay)
        {
            out.push("epidemic forms must appear as exactly [growth, decay]".into());
        }

        if let Err(e) = self.q.validate(m) {
            out.push(e.to_string());
        }

        let p = &self.priors;
        if p.theta_rates.len() != k {
            out.push(format!("expected {k} rate priors, got {}", p.theta_rates.len()));
        }
        for (i, r) in p.theta_rates.iter().enumerate() {
            if let RatePrior::Gamma { shape, rate } = r {
                if !(*shape > 0.0 && *rate > 0.0) {
                    out.push(format!("form {}: rate prior hyperparameters must be positive", i + 1));
                }
            }
        }
        if p.theta_trans.len() != k {
            out.push(format!(
                "expected {k} transition priors, got {}",
                p.theta_trans.len()
            ));
        }
        for (i, t) in p.theta_trans.iter().enumerate().take(k) {
            if let TransPrior::Dirichlet(g) = t {
                if g.len() != m.trans_len(i) {
                    out.push(format!(
                        "form {}: Dirichlet has {} components, expected {}",
                        i + 1,
                        g.len(),
                        m.trans_len(i)
                    ));
                }
                if g.iter().any(|&x| !(x > 0.0)) {
                    out.push(format!("form {}: Dirichlet concentrations must be positive", i + 1));
                }
            }
        }
        if p.psi.len() != k {
            out.push(format!("expected parameter priors for {k} forms, got {}", p.psi.len()));
        }
        for (i, (f, pr)) in self.forms.iter().zip(&p.psi).enumerate() {
            if pr.len() != f.n_params() {
                out.push(format!(
                    "form {}: {} parameter priors for {} parameters",
                    i + 1,
                    pr.len(),
                    f.n_params()
                ));
            }
            for q in pr {
                match *q {
                    PsiPrior::Normal { sd, .. } if !(sd > 0.0) => {
                        out.push(format!("form {}: normal prior sd must be positive", i + 1))
                    }
                    PsiPrior::Gamma { shape, rate } if !(shape > 0.0 && rate > 0.0) => out.push(
                        format!("form {}: Gamma prior hyperparameters must be positive", i + 1),
                    ),
                    PsiPrior::TruncatedUniform { lower, upper } if !(lower < upper) => {
                        out.push(format!("form {}: uniform prior needs lower < upper", i + 1))
                    }
                    _ => {}
                }
            }
            for (j, (&x, q)) in f.initial_params().iter().zip(pr).enumerate() {
                if q.ln_pdf(x) == f64::NEG_INFINITY {
                    out.push(format!(
                        "form {}: initial value of parameter {} lies outside its prior support",
                        i + 1,
                        j + 1
                    ));
                }
            }
        }

        if self.pi0.len() != m.e {
            out.push(format!("pi0 has {} entries, expected {}", self.pi0.len(), m.e));
        } else {
            if self.pi0.iter().any(|&x| !(x >= 0.0)) {
                out.push("pi0 has negative entries".into());
            }
            let s: f64 = self.pi0.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                out.push(format!("pi0 sums to {s}, expected 1"));
            }
            for j in m.k..m.e {
                if self.pi0[j] > 0.0 && !m.self_jump[m.h[j]] {
                    out.push(format!(
                        "pi0 puts mass on state {} but form {} cannot self-jump",
                        j + 1,
                        m.h[j] + 1
                    ));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(v))
        }
    }
}

pub fn validate_model(spec: &ModelSpec) -> Result<()> {
    spec.validate()
}

//! Naive (competing-as-censoring) and competing-risk-aware estimators.

mod nonparametric;
mod regression;

pub use nonparametric::{
    aalen_johansen, all_cause_kaplan_meier, censoring_survival, kaplan_meier, risk_table, RiskRow,
};
pub use regression::{FitDiagnostics, GRADIENT_TOLERANCE, MAX_ITERATIONS};

use serde::{Deserialize, Serialize};

use crate::dataset::{EventCode, SurvivalDataset};
use crate::error::Result;
use crate::step::StepFunction;

/// Anything that predicts a subject's cumulative incidence of its target cause.
pub trait CifModel {
    fn cause(&self) -> u8;
    fn predict_cif(&self, x: &[f64], t: f64) -> f64;
}

fn linear_predictor(beta: &[f64], x: &[f64]) -> f64 {
    beta.iter().zip(x).map(|(b, v)| b * v).sum()
}

/// `1 − exp(−H(t)·exp(β·x))`.
fn ph_cif(baseline: &StepFunction, beta: &[f64], x: &[f64], t: f64) -> f64 {
    let h = baseline.eval(t);
    if h == 0.0 {
        return 0.0;
    }
    -(-h * linear_predictor(beta, x).exp()).exp_m1()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedCox {
    pub beta: Vec<f64>,
    /// Breslow baseline cumulative hazard at `x = 0`.
    pub baseline_cumhaz: StepFunction,
    pub cause: EventCode,
    pub convergence: FitDiagnostics,
}

impl FittedCox {
    pub fn survival(&self, x: &[f64], t: f64) -> f64 {
        (-self.baseline_cumhaz.eval(t) * linear_predictor(&self.beta, x).exp()).exp()
    }
}

impl CifModel for FittedCox {
    fn cause(&self) -> u8 {
        self.cause.0
    }

    fn predict_cif(&self, x: &[f64], t: f64) -> f64 {
        ph_cif(&self.baseline_cumhaz, &self.beta, x, t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedFineGray {
    pub beta: Vec<f64>,
    /// Weighted Breslow baseline cumulative subdistribution hazard at `x = 0`.
    pub baseline_cum_subhaz: StepFunction,
    pub cause: EventCode,
    pub censoring_survival: StepFunction,
    pub convergence: FitDiagnostics,
}

impl CifModel for FittedFineGray {
    fn cause(&self) -> u8 {
        self.cause.0
    }

    fn predict_cif(&self, x: &[f64], t: f64) -> f64 {
        ph_cif(&self.baseline_cum_subhaz, &self.beta, x, t)
    }
}

/// Cox model for `cause` with every other event treated as censoring.
pub fn fit_cox(data: &SurvivalDataset, cause: u8) -> Result<FittedCox> {
    let fit = regression::fit_proportional(data, cause, None)?;
    Ok(FittedCox {
        beta: fit.beta,
        baseline_cumhaz: fit.baseline,
        cause: EventCode(cause),
        convergence: fit.diagnostics,
    })
}

/// Fine-Gray subdistribution hazard model for `cause`, with IPCW weights from
/// the reverse Kaplan-Meier censoring distribution.
pub fn fit_fine_gray(data: &SurvivalDataset, cause: u8) -> Result<FittedFineGray> {
    let g = censoring_survival(data);
    let fit = regression::fit_proportional(data, cause, Some(&g))?;
    Ok(FittedFineGray {
        beta: fit.beta,
        baseline_cum_subhaz: fit.baseline,
        cause: EventCode(cause),
        censoring_survival: g,
        convergence: fit.diagnostics,
    })
}

pub fn predict_cox_cif(model: &FittedCox, x: &[f64], t: f64) -> f64 {
    model.predict_cif(x, t)
}

pub fn predict_fg_cif(model: &FittedFineGray, x: &[f64], t: f64) -> f64 {
    model.predict_cif(x, t)
}

/// Covariate-free Kaplan-Meier model: predicts `1 − S(t)` for every subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaplanMeierModel {
    pub cause: EventCode,
    pub survival: StepFunction,
}

impl KaplanMeierModel {
    pub fn fit(data: &SurvivalDataset, cause: u8) -> Self {
        Self {
            cause: EventCode(cause),
            survival: kaplan_meier(data, cause),
        }
    }
}

impl CifModel for KaplanMeierModel {
    fn cause(&self) -> u8 {
        self.cause.0
    }

    fn predict_cif(&self, _x: &[f64], t: f64) -> f64 {
        1.0 - self.survival.eval(t)
    }
}

/// Covariate-free Aalen-Johansen model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AalenJohansenModel {
    pub cause: EventCode,
    pub cif: StepFunction,
}

impl AalenJohansenModel {
    pub fn fit(data: &SurvivalDataset, cause: u8) -> Self {
        Self {
            cause: EventCode(cause),
            cif: aalen_johansen(data, cause),
        }
    }
}

impl CifModel for AalenJohansenModel {
    fn cause(&self) -> u8 {
        self.cause.0
    }

    fn predict_cif(&self, _x: &[f64], t: f64) -> f64 {
        self.cif.eval(t)
    }
}

/// Predictions of `model` at horizon `t` for every subject of `data`.
pub fn predict_all(model: &dyn CifModel, data: &SurvivalDataset, t: f64) -> Vec<f64> {
    data.subjects()
        .iter()
        .map(|s| model.predict_cif(&s.covariates, t))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cox,
    FineGray,
    Km,
    Aj,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Cox, ModelKind::FineGray, ModelKind::Km, ModelKind::Aj];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cox => "cox",
            ModelKind::FineGray => "finegray",
            ModelKind::Km => "km",
            ModelKind::Aj => "aj",
        }
    }

    /// Whether the model accounts for competing events (as opposed to
    /// recoding them as censoring).
    pub fn handles_competing_risks(self) -> bool {
        matches!(self, ModelKind::FineGray | ModelKind::Aj)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| crate::error::Error::UnknownModelKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Cox(FittedCox),
    FineGray(FittedFineGray),
    Km(KaplanMeierModel),
    Aj(AalenJohansenModel),
}

impl FittedModel {
    pub fn fit(kind: ModelKind, data: &SurvivalDataset, cause: u8) -> Result<Self> {
        if cause == 0 || cause > data.n_risks() {
            return Err(crate::error::Error::InvalidInput(format!(
                "cause {cause} outside 1..={}",
                data.n_risks()
            )));
        }
        Ok(match kind {
            ModelKind::Cox => FittedModel::Cox(fit_cox(data, cause)?),
            ModelKind::FineGray => FittedModel::FineGray(fit_fine_gray(data, cause)?),
            ModelKind::Km => FittedModel::Km(KaplanMeierModel::fit(data, cause)),
            ModelKind::Aj => FittedModel::Aj(AalenJohansenModel::fit(data, cause)),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Cox(_) => ModelKind::Cox,
            FittedModel::FineGray(_) => ModelKind::FineGray,
            FittedModel::Km(_) => ModelKind::Km,
            FittedModel::Aj(_) => ModelKind::Aj,
        }
    }

    /// Regression coefficients; empty for the covariate-free estimators.
    pub fn beta(&self) -> &[f64] {
        match self {
            FittedModel::Cox(m) => &m.beta,
            FittedModel::FineGray(m) => &m.beta,
            FittedModel::Km(_) | FittedModel::Aj(_) => &[],
        }
    }

    pub fn diagnostics(&self) -> Option<&FitDiagnostics> {
        match self {
            FittedModel::Cox(m) => Some(&m.convergence),
            FittedModel::FineGray(m) => Some(&m.convergence),
            FittedModel::Km(_) | FittedModel::Aj(_) => None,
        }
    }
}

impl CifModel for FittedModel {
    fn cause(&self) -> u8 {
        match self {
            FittedModel::Cox(m) => m.cause(),
            FittedModel::FineGray(m) => m.cause(),
            FittedModel::Km(m) => m.cause(),
            FittedModel::Aj(m) => m.cause(),
        }
    }

    fn predict_cif(&self, x: &[f64], t: f64) -> f64 {
        match self {
            FittedModel::Cox(m) => m.predict_cif(x, t),
            FittedModel::FineGray(m) => m.predict_cif(x, t),
            FittedModel::Km(m) => m.predict_cif(x, t),
            FittedModel::Aj(m) => m.predict_cif(x, t),
        }
    }
}

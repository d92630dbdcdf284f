//! Treatment-threshold analysis: who gets treated under a risk rule, and how
//! that lines up with the outcome observed by the horizon.

use serde::{Deserialize, Serialize};

use crate::dataset::{Horizon, SurvivalDataset};
use crate::error::{Error, Result};
use crate::estimators::{predict_all, CifModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPolicy {
    pub threshold: f64,
    pub horizon: Horizon,
    /// Covariate holding age. `None` makes every subject eligible.
    pub age_covariate: Option<usize>,
    pub min_age: f64,
}

impl DecisionPolicy {
    pub fn new(threshold: f64, horizon: Horizon, age_covariate: Option<usize>, min_age: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidInput(format!("threshold {threshold} outside (0, 1)")));
        }
        if !(min_age >= 0.0) {
            return Err(Error::InvalidInput(format!("min_age {min_age} is negative")));
        }
        Ok(Self {
            threshold,
            horizon,
            age_covariate,
            min_age,
        })
    }

    fn eligible(&self, covariates: &[f64]) -> Result<bool> {
        match self.age_covariate {
            None => Ok(true),
            Some(c) => covariates
                .get(c)
                .map(|&age| age > self.min_age)
                .ok_or_else(|| Error::InvalidInput(format!("age covariate {c} not present"))),
        }
    }
}

/// Treated iff older than `min_age` and predicted risk at least `threshold`.
pub fn classify(predictions: &[f64], data: &SurvivalDataset, policy: &DecisionPolicy) -> Result<Vec<bool>> {
    if predictions.len() != data.len() {
        return Err(Error::InvalidInput("predictions do not align with the data".into()));
    }
    data.subjects()
        .iter()
        .zip(predictions)
        .map(|(s, &p)| Ok(policy.eligible(&s.covariates)? && p >= policy.threshold))
        .collect()
}

/// Outcome observed by the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Target,
    Competing,
    EventFree,
    CensoredBeforeHorizon,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [
        Outcome::Target,
        Outcome::Competing,
        Outcome::EventFree,
        Outcome::CensoredBeforeHorizon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Outcome::Target => "target",
            Outcome::Competing => "competing",
            Outcome::EventFree => "event_free",
            Outcome::CensoredBeforeHorizon => "censored_before_horizon",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

pub fn outcome_at(time: f64, event: u8, cause: u8, horizon: f64) -> Outcome {
    if time > horizon {
        Outcome::EventFree
    } else if event == 0 {
        Outcome::CensoredBeforeHorizon
    } else if event == cause {
        Outcome::Target
    } else {
        Outcome::Competing
    }
}

/// Cross-tabulation as fractions of the eligible population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTab {
    pub eligible: usize,
    /// `treated[o]` / `untreated[o]` indexed in `Outcome::ALL` order.
    pub treated: [f64; 4],
    pub untreated: [f64; 4],
    pub treated_fraction: f64,
    /// Treated with an outcome other than the target event.
    pub overtreatment: f64,
    /// Untreated who had the target event.
    pub undertreatment: f64,
}

fn cross_tab(treated: &[bool], outcomes: &[Outcome], eligible: &[bool]) -> CrossTab {
    let mut t = [0usize; 4];
    let mut u = [0usize; 4];
    let mut n = 0usize;
    for ((&tr, &o), &e) in treated.iter().zip(outcomes).zip(eligible) {
        if !e {
            continue;
        }
        n += 1;
        if tr {
            t[o.index()] += 1;
        } else {
            u[o.index()] += 1;
        }
    }
    let frac = |c: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    let treated_count: usize = t.iter().sum();
    CrossTab {
        eligible: n,
        treated: t.map(frac),
        untreated: u.map(frac),
        treated_fraction: frac(treated_count),
        overtreatment: frac(treated_count - t[Outcome::Target.index()]),
        undertreatment: frac(u[Outcome::Target.index()]),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionStratum {
    /// `None` for the whole population, otherwise the group label.
    pub group: Option<u8>,
    pub competing: CrossTab,
    pub non_competing: CrossTab,
    /// Competing minus non-competing.
    pub treated_diff: f64,
    pub overtreatment_diff: f64,
    pub undertreatment_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionReport {
    pub policy: DecisionPolicy,
    pub cause: u8,
    /// Denominator used for every fraction.
    pub denominator: String,
    pub eligible_fraction: f64,
    pub strata: Vec<DecisionStratum>,
}

pub fn decision_report(
    model_c: &dyn CifModel,
    model_nc: &dyn CifModel,
    data: &SurvivalDataset,
    policy: &DecisionPolicy,
    groups: Option<&[u8]>,
) -> Result<DecisionReport> {
    let cause = model_c.cause();
    if model_nc.cause() != cause {
        return Err(Error::InvalidInput("models target different causes".into()));
    }
    let t = policy.horizon.t;
    let treated_c = classify(&predict_all(model_c, data, t), data, policy)?;
    let treated_nc = classify(&predict_all(model_nc, data, t), data, policy)?;
    let outcomes: Vec<Outcome> = data
        .subjects()
        .iter()
        .map(|s| outcome_at(s.time, s.event.0, cause, t))
        .collect();
    let eligible: Vec<bool> = data
        .subjects()
        .iter()
        .map(|s| policy.eligible(&s.covariates))
        .collect::<Result<_>>()?;

    let stratum = |group: Option<u8>| {
        let mask: Vec<bool> = match (group, groups) {
            (Some(g), Some(gs)) => eligible.iter().zip(gs).map(|(&e, &x)| e && x == g).collect(),
            _ => eligible.clone(),
        };
        let c = cross_tab(&treated_c, &outcomes, &mask);
        let nc = cross_tab(&treated_nc, &outcomes, &mask);
        DecisionStratum {
            group,
            treated_diff: c.treated_fraction - nc.treated_fraction,
            overtreatment_diff: c.overtreatment - nc.overtreatment,
            undertreatment_diff: c.undertreatment - nc.undertreatment,
            competing: c,
            non_competing: nc,
        }
    };
    let mut strata = vec![stratum(None)];
    if let Some(gs) = groups {
        if gs.len() != data.len() {
            return Err(Error::InvalidInput("grouping does not align with the data".into()));
        }
        for g in 0..2u8 {
            if !gs.contains(&g) {
                return Err(Error::EmptyGroup);
            }
            strata.push(stratum(Some(g)));
        }
    }
    let n_eligible = eligible.iter().filter(|&&e| e).count();
    Ok(DecisionReport {
        policy: policy.clone(),
        cause,
        denominator: "age-eligible population".into(),
        eligible_fraction: n_eligible as f64 / data.len() as f64,
        strata,
    })
}

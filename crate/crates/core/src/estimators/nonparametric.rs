//! Product-limit style estimators: Kaplan-Meier (naive and all-cause),
//! reverse Kaplan-Meier for the censoring distribution, and Aalen-Johansen.

use crate::dataset::SurvivalDataset;
use crate::step::StepFunction;

/// Counts at one distinct observed time.
#[derive(Debug, Clone)]
pub struct RiskRow {
    pub time: f64,
    pub at_risk: usize,
    /// Number of subjects observed at `time` with each event code, indexed by code.
    pub by_code: Vec<usize>,
}

impl RiskRow {
    pub fn events(&self) -> usize {
        self.by_code[1..].iter().sum()
    }
}

/// Distinct observed times in ascending order with at-risk counts
/// (`#{T_i >= t}`) and per-code tallies.
pub fn risk_table(data: &SurvivalDataset) -> Vec<RiskRow> {
    let n_codes = data.n_risks() as usize + 1;
    let mut obs: Vec<(f64, u8)> = data
        .subjects()
        .iter()
        .map(|s| (s.time, s.event.0))
        .collect();
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rows = Vec::new();
    let mut at_risk = obs.len();
    let mut i = 0;
    while i < obs.len() {
        let t = obs[i].0;
        let mut by_code = vec![0usize; n_codes];
        let mut j = i;
        while j < obs.len() && obs[j].0 == t {
            by_code[obs[j].1 as usize] += 1;
            j += 1;
        }
        rows.push(RiskRow {
            time: t,
            at_risk,
            by_code,
        });
        at_risk -= j - i;
        i = j;
    }
    rows
}

fn product_limit(table: &[RiskRow], events_at: impl Fn(&RiskRow) -> usize) -> StepFunction {
    let mut surv = 1.0;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for row in table {
        let d = events_at(row);
        if d > 0 {
            surv *= (row.at_risk - d) as f64 / row.at_risk as f64;
            times.push(row.time);
            values.push(surv);
        }
    }
    StepFunction::from_sorted(1.0, times, values)
}

/// Kaplan-Meier survival for `cause` with every other event recoded as censoring.
/// `1 - S` is the naive (competing-as-censoring) cumulative incidence.
pub fn kaplan_meier(data: &SurvivalDataset, cause: u8) -> StepFunction {
    let table = risk_table(data);
    let c = cause as usize;
    product_limit(&table, |row| row.by_code.get(c).copied().unwrap_or(0))
}

/// Kaplan-Meier survival where any event counts.
pub fn all_cause_kaplan_meier(data: &SurvivalDataset) -> StepFunction {
    let table = risk_table(data);
    product_limit(&table, RiskRow::events)
}

/// Reverse Kaplan-Meier estimate `Ĝ` of the censoring survival function.
pub fn censoring_survival(data: &SurvivalDataset) -> StepFunction {
    let table = risk_table(data);
    product_limit(&table, |row| row.by_code[0])
}

/// Aalen-Johansen cumulative incidence of `cause`.
pub fn aalen_johansen(data: &SurvivalDataset, cause: u8) -> StepFunction {
    let table = risk_table(data);
    let c = cause as usize;
    let mut surv = 1.0;
    let mut cif = 0.0;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for row in &table {
        let n = row.at_risk as f64;
        let d_cause = row.by_code.get(c).copied().unwrap_or(0);
        if d_cause > 0 {
            cif += surv * d_cause as f64 / n;
            times.push(row.time);
            values.push(cif);
        }
        let d_all = row.events();
        if d_all > 0 {
            surv *= (row.at_risk - d_all) as f64 / n;
        }
    }
    StepFunction::from_sorted(0.0, times, values)
}

//! Competing-risk-corrected predictive metrics at a fixed horizon, with IPCW
//! weights from the reverse Kaplan-Meier censoring distribution.

use serde::{Deserialize, Serialize};

use crate::dataset::{Horizon, SurvivalDataset};
use crate::error::{Error, Result};
use crate::estimators::{censoring_survival, predict_all, CifModel};
use crate::step::StepFunction;

fn inverse_weight(g: f64, t: f64) -> Result<f64> {
    if g > 0.0 {
        Ok(1.0 / g)
    } else {
        Err(Error::CensoringExhausted(t))
    }
}

fn check_aligned(predictions: &[f64], data: &SurvivalDataset) -> Result<()> {
    if predictions.len() != data.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} subjects",
            predictions.len(),
            data.len()
        )));
    }
    Ok(())
}

/// Time-dependent Brier score of cumulative incidence predictions for `cause` at `t`.
///
/// Subjects with any event by `t` are weighted by `1/Ĝ(T_i−)`, subjects still
/// event-free after `t` by `1/Ĝ(t)`, subjects censored by `t` get weight 0.
pub fn td_brier(predictions: &[f64], data: &SurvivalDataset, t: f64, cause: u8) -> Result<f64> {
    check_aligned(predictions, data)?;
    let g = censoring_survival(data);
    td_brier_with(predictions, data, t, cause, &g)
}

pub fn td_brier_with(
    predictions: &[f64],
    data: &SurvivalDataset,
    t: f64,
    cause: u8,
    g: &StepFunction,
) -> Result<f64> {
    check_aligned(predictions, data)?;
    let mut total = 0.0;
    for (s, &p) in data.subjects().iter().zip(predictions) {
        let (w, y) = if s.time <= t && !s.event.is_censored() {
            (inverse_weight(g.eval_left(s.time), t)?, f64::from(s.event.0 == cause))
        } else if s.time > t {
            (inverse_weight(g.eval(t), t)?, 0.0)
        } else {
            continue;
        };
        total += w * (y - p).powi(2);
    }
    Ok(total / data.len() as f64)
}

/// Time-dependent concordance index for `cause` at `t`.
///
/// A case `i` (cause-`cause` event by `t`) is compared with every `j` still at
/// risk after `T_i` (weight `1/Ĝ(T_i−)²`) and with every `j` that had a
/// competing event at or before `T_i` (weight `1/(Ĝ(T_i−)Ĝ(T_j−))`).
/// Prediction ties count one half.
pub fn td_c_index(predictions: &[f64], data: &SurvivalDataset, t: f64, cause: u8) -> Result<f64> {
    check_aligned(predictions, data)?;
    let g = censoring_survival(data);
    td_c_index_with(predictions, data, t, cause, &g)
}

pub fn td_c_index_with(
    predictions: &[f64],
    data: &SurvivalDataset,
    t: f64,
    cause: u8,
    g: &StepFunction,
) -> Result<f64> {
    check_aligned(predictions, data)?;
    let subjects = data.subjects();
    let mut others: Vec<(f64, f64, bool, f64)> = Vec::with_capacity(subjects.len());
    for (s, &p) in subjects.iter().zip(predictions) {
        let competing = !s.event.is_censored() && s.event.0 != cause;
        let gj = if competing { g.eval_left(s.time) } else { 1.0 };
        others.push((s.time, p, competing, gj));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (s, &pi) in subjects.iter().zip(predictions) {
        if s.event.0 != cause || s.time > t {
            continue;
        }
        let gi = inverse_weight(g.eval_left(s.time), s.time)?;
        let mut case_num = 0.0;
        let mut case_den = 0.0;
        for &(tj, pj, competing, gj) in &others {
            let w = if s.time < tj {
                gi * gi
            } else if competing {
                gi * inverse_weight(gj, tj)?
            } else {
                continue;
            };
            case_den += w;
            if pi > pj {
                case_num += w;
            } else if pi == pj {
                case_num += 0.5 * w;
            }
        }
        num += case_num;
        den += case_den;
    }
    if den == 0.0 {
        return Err(Error::NoComparablePairs);
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub td_brier: f64,
    pub td_ci: f64,
}

pub fn scores(model: &dyn CifModel, data: &SurvivalDataset, t: f64) -> Result<Scores> {
    let cause = model.cause();
    let predictions = predict_all(model, data, t);
    let g = censoring_survival(data);
    Ok(Scores {
        td_brier: td_brier_with(&predictions, data, t, cause, &g)?,
        td_ci: td_c_index_with(&predictions, data, t, cause, &g)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupScores {
    pub group: u8,
    pub competing: Scores,
    pub non_competing: Scores,
    /// Competing minus non-competing.
    pub brier_diff: f64,
    pub ci_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub horizon: Horizon,
    pub cause: u8,
    pub competing: Scores,
    pub non_competing: Scores,
    pub groups: Vec<GroupScores>,
    /// `|Δ^C| − |Δ^NC|` where `Δ` is the group-1 minus group-0 metric.
    pub brier_gap_change: f64,
    pub ci_gap_change: f64,
}

/// `|Δ^C| − |Δ^NC|` from the four group-level scores, with `Δ = m(g=1) − m(g=0)`.
pub fn gap_change(competing: [f64; 2], non_competing: [f64; 2]) -> f64 {
    (competing[1] - competing[0]).abs() - (non_competing[1] - non_competing[0]).abs()
}

/// Scores both models overall and within each of the two groups given by
/// `groups` (aligned with `data`), at every horizon.
pub fn group_metric_diff(
    model_c: &dyn CifModel,
    model_nc: &dyn CifModel,
    data: &SurvivalDataset,
    horizons: &[Horizon],
    groups: &[u8],
) -> Result<Vec<EvalReport>> {
    if groups.len() != data.len() {
        return Err(Error::InvalidInput("grouping does not align with the data".into()));
    }
    let members: Vec<Vec<usize>> = (0..2u8)
        .map(|g| (0..groups.len()).filter(|&i| groups[i] == g).collect())
        .collect();
    if members.iter().any(Vec::is_empty) || groups.iter().any(|&g| g > 1) {
        return Err(Error::EmptyGroup);
    }
    let subsets = [data.subset(&members[0])?, data.subset(&members[1])?];
    horizons
        .iter()
        .map(|h| {
            let competing = scores(model_c, data, h.t)?;
            let non_competing = scores(model_nc, data, h.t)?;
            let mut per_group = Vec::with_capacity(2);
            for (g, subset) in subsets.iter().enumerate() {
                let c = scores(model_c, subset, h.t)?;
                let nc = scores(model_nc, subset, h.t)?;
                per_group.push(GroupScores {
                    group: g as u8,
                    competing: c,
                    non_competing: nc,
                    brier_diff: c.td_brier - nc.td_brier,
                    ci_diff: c.td_ci - nc.td_ci,
                });
            }
            let pick = |f: fn(&Scores) -> f64, competing: bool| -> [f64; 2] {
                let s = |gs: &GroupScores| if competing { gs.competing } else { gs.non_competing };
                [f(&s(&per_group[0])), f(&s(&per_group[1]))]
            };
            Ok(EvalReport {
                horizon: h.clone(),
                cause: model_c.cause(),
                competing,
                non_competing,
                brier_gap_change: gap_change(pick(|s| s.td_brier, true), pick(|s| s.td_brier, false)),
                ci_gap_change: gap_change(pick(|s| s.td_ci, true), pick(|s| s.td_ci, false)),
                groups: per_group,
            })
        })
        .collect()
}

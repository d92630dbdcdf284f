//! Relative cumulative incidence discrepancy between a naive
//! (competing-as-censoring) and a competing-risk-aware estimate, its value
//! under the known data-generating process, group averages and gaps, and
//! cross-replication summaries.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Horizon, SurvivalDataset};
use crate::error::{Error, Result};
use crate::estimators::CifModel;
use crate::quadrature::{integrate_adaptive, GaussLegendre};
use crate::sim::{GompertzParams, GroundTruthRow};

pub const QUADRATURE_START_NODES: usize = 64;
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;
const QUADRATURE_MAX_NODES: usize = 8192;
/// Integration is cut where the target's cumulative hazard reaches this
/// value; the remaining mass `exp(-50)` is below double precision.
const HAZARD_CUTOFF: f64 = 50.0;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// `(F_nc − F_c) / max(F_nc, F_c)`, or 0 when both are 0.
pub fn relative_discrepancy(f_nc: f64, f_c: f64) -> f64 {
    let m = f_nc.max(f_c);
    if m <= 0.0 {
        0.0
    } else {
        (f_nc - f_c) / m
    }
}

/// Per-subject empirical discrepancy of `model_nc` against `model_c` at `t`,
/// and its mean.
pub fn empirical_discrepancy(
    model_nc: &dyn CifModel,
    model_c: &dyn CifModel,
    data: &SurvivalDataset,
    t: f64,
) -> (Vec<f64>, f64) {
    let values: Vec<f64> = data
        .subjects()
        .iter()
        .map(|s| {
            relative_discrepancy(
                model_nc.predict_cif(&s.covariates, t),
                model_c.predict_cif(&s.covariates, t),
            )
        })
        .collect();
    let m = mean(&values);
    (values, m)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn other_cause(cause: u8) -> u8 {
    if cause == 1 {
        2
    } else {
        1
    }
}

fn theoretical_parts(row: &GroundTruthRow, cause: u8, t: f64) -> Option<(GompertzParams, GompertzParams, f64, f64)> {
    let target = row.cause_params(cause);
    let competitor = row.cause_params(other_cause(cause));
    let denom = target.cdf(t);
    if !(denom > 0.0) || competitor.scale == 0.0 {
        return None;
    }
    let cutoff = target.inverse_cumulative_hazard(HAZARD_CUTOFF).ok()?;
    Some((target, competitor, denom, t.min(cutoff)))
}

/// `P(T_other < T_r | T_r < t) = ∫₀ᵗ F_other(s) f_r(s) ds / F_r(t)` for the
/// latent Gompertz times of one subject.
pub fn theoretical_discrepancy(row: &GroundTruthRow, cause: u8, t: f64) -> f64 {
    let Some((target, competitor, denom, upper)) = theoretical_parts(row, cause, t) else {
        return 0.0;
    };
    let (num, _) = integrate_adaptive(
        |s| competitor.cdf(s) * target.pdf(s),
        0.0,
        upper,
        QUADRATURE_START_NODES,
        QUADRATURE_TOLERANCE * denom,
        QUADRATURE_MAX_NODES,
    );
    (num / denom).clamp(0.0, 1.0)
}

/// Same quantity with a fixed Gauss-Legendre rule.
pub fn theoretical_discrepancy_with_rule(row: &GroundTruthRow, cause: u8, t: f64, rule: &GaussLegendre) -> f64 {
    let Some((target, competitor, denom, upper)) = theoretical_parts(row, cause, t) else {
        return 0.0;
    };
    let num = rule.integrate(0.0, upper, |s| competitor.cdf(s) * target.pdf(s));
    (num / denom).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentOrderingCheck {
    /// Discrepancy from the true marginal and true CIF.
    pub lhs: f64,
    /// Monte-Carlo `P(D' ≠ r | T_r < t)` from latent time pairs.
    pub rhs: f64,
    pub gap: f64,
    /// Number of latent draws with `T_r < t`.
    pub conditioning_draws: usize,
}

fn latent_draw<R: Rng + ?Sized>(params: GompertzParams, rng: &mut R) -> f64 {
    if params.scale == 0.0 {
        f64::INFINITY
    } else {
        params.sample(rng).unwrap_or(f64::INFINITY)
    }
}

/// Compares the closed-form discrepancy with a brute-force simulation of the
/// latent cause-specific times, row by row.
pub fn latent_ordering_check<R: Rng + ?Sized>(
    rows: &[GroundTruthRow],
    cause: u8,
    t: f64,
    mc_samples: usize,
    rng: &mut R,
) -> Vec<LatentOrderingCheck> {
    rows.iter()
        .map(|row| {
            let lhs = relative_discrepancy(row.marginal(cause, t), row.cif(cause, t));
            let target = row.cause_params(cause);
            let competitor = row.cause_params(other_cause(cause));
            let mut conditioning = 0usize;
            let mut competing_first = 0usize;
            for _ in 0..mc_samples {
                let tr = latent_draw(target, rng);
                let to = latent_draw(competitor, rng);
                if tr < t {
                    conditioning += 1;
                    if to < tr {
                        competing_first += 1;
                    }
                }
            }
            let rhs = if conditioning == 0 {
                0.0
            } else {
                competing_first as f64 / conditioning as f64
            };
            LatentOrderingCheck {
                lhs,
                rhs,
                gap: (lhs - rhs).abs(),
                conditioning_draws: conditioning,
            }
        })
        .collect()
}

/// Group means of a per-subject discrepancy and the between-group gaps,
/// indexed by group label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupDiscrepancy {
    pub mean: [f64; 2],
    pub gap: [f64; 2],
}

pub fn group_discrepancy(values: &[f64], groups: &[u8]) -> Result<GroupDiscrepancy> {
    if values.len() != groups.len() {
        return Err(Error::InvalidInput("discrepancy and group vectors differ in length".into()));
    }
    let mut sum = [0.0; 2];
    let mut count = [0usize; 2];
    for (&v, &g) in values.iter().zip(groups) {
        let g = g as usize;
        if g > 1 {
            return Err(Error::InvalidInput(format!("non-binary group label {g}")));
        }
        sum[g] += v;
        count[g] += 1;
    }
    if count.contains(&0) {
        return Err(Error::EmptyGroup);
    }
    let mean = [sum[0] / count[0] as f64, sum[1] / count[1] as f64];
    Ok(GroupDiscrepancy {
        mean,
        gap: [mean[0] - mean[1], mean[1] - mean[0]],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub horizon: Horizon,
    pub cause: u8,
    pub empirical_mean: f64,
    pub theoretical_mean: f64,
    pub empirical_group: GroupDiscrepancy,
    pub theoretical_group: GroupDiscrepancy,
    pub empirical: Vec<f64>,
    pub theoretical: Vec<f64>,
}

/// Empirical and theoretical discrepancy on `data`, whose subjects align
/// one-to-one with `truth`.
pub fn discrepancy_report(
    model_nc: &dyn CifModel,
    model_c: &dyn CifModel,
    data: &SurvivalDataset,
    truth: &[GroundTruthRow],
    horizon: &Horizon,
    cause: u8,
) -> Result<DiscrepancyReport> {
    if truth.len() != data.len() {
        return Err(Error::InvalidInput(format!(
            "truth has {} rows but data has {} subjects",
            truth.len(),
            data.len()
        )));
    }
    if let Some((s, r)) = data.subjects().iter().zip(truth).find(|(s, r)| s.id != r.id) {
        return Err(Error::InvalidInput(format!(
            "subject `{}` does not align with truth row `{}`",
            s.id, r.id
        )));
    }
    let (empirical, empirical_mean) = empirical_discrepancy(model_nc, model_c, data, horizon.t);
    let theoretical: Vec<f64> = truth
        .iter()
        .map(|r| theoretical_discrepancy(r, cause, horizon.t))
        .collect();
    let theoretical_mean = mean(&theoretical);
    let groups = data.groups();
    Ok(DiscrepancyReport {
        horizon: horizon.clone(),
        cause,
        empirical_mean,
        theoretical_mean,
        empirical_group: group_discrepancy(&empirical, &groups)?,
        theoretical_group: group_discrepancy(&theoretical, &groups)?,
        empirical,
        theoretical,
    })
}

/// One replication's pooled quantities at one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationPoint {
    pub empirical_l: f64,
    pub theoretical_l: f64,
    /// Gap of group 1 against group 0.
    pub empirical_gap: f64,
    pub theoretical_gap: f64,
}

impl From<&DiscrepancyReport> for ReplicationPoint {
    fn from(r: &DiscrepancyReport) -> Self {
        Self {
            empirical_l: r.empirical_mean,
            theoretical_l: r.theoretical_mean,
            empirical_gap: r.empirical_group.gap[1],
            theoretical_gap: r.theoretical_group.gap[1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmseEstimate {
    pub rmse: f64,
    pub bootstrap_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub rmse_l: RmseEstimate,
    pub rmse_gap: RmseEstimate,
    /// OLS slope of empirical on theoretical values across replications.
    pub slope_l: Option<f64>,
    pub slope_gap: Option<f64>,
    pub points: Vec<ReplicationPoint>,
}

pub fn rmse(pairs: &[(f64, f64)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    (pairs.iter().map(|(a, b)| (a - b).powi(2)).sum::<f64>() / pairs.len() as f64).sqrt()
}

/// Ordinary least-squares slope of `y` on `x`; `None` when `x` is constant.
pub fn ols_slope(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return None;
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

fn bootstrap_rmse(pairs: &[(f64, f64)], resamples: usize, rng: &mut ChaCha8Rng) -> RmseEstimate {
    let stats: Vec<f64> = (0..resamples)
        .map(|_| {
            let sample: Vec<(f64, f64)> = (0..pairs.len())
                .map(|_| *pairs.choose(rng).unwrap())
                .collect();
            rmse(&sample)
        })
        .collect();
    let m = mean(&stats);
    let var = if stats.len() > 1 {
        stats.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (stats.len() - 1) as f64
    } else {
        0.0
    };
    RmseEstimate {
        rmse: rmse(pairs),
        bootstrap_sd: var.sqrt(),
    }
}

pub fn study_summary(points: &[ReplicationPoint], bootstrap_seed: u64) -> Result<StudySummary> {
    if points.len() < 2 {
        return Err(Error::InvalidInput(
            "a study summary needs at least two replications".into(),
        ));
    }
    let l: Vec<(f64, f64)> = points.iter().map(|p| (p.theoretical_l, p.empirical_l)).collect();
    let gap: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.theoretical_gap, p.empirical_gap))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(bootstrap_seed);
    let rmse_l = bootstrap_rmse(&l, BOOTSTRAP_RESAMPLES, &mut rng);
    let rmse_gap = bootstrap_rmse(&gap, BOOTSTRAP_RESAMPLES, &mut rng);
    Ok(StudySummary {
        rmse_l,
        rmse_gap,
        slope_l: ols_slope(&l),
        slope_gap: ols_slope(&gap),
        points: points.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(w1: f64, w2: f64, ws: f64) -> GroundTruthRow {
        GroundTruthRow {
            id: "0".into(),
            group: 0,
            w1,
            w2,
            ws,
            wc: 0.0,
            latent_time: 0.0,
            latent_cause: 1,
            censor_time: f64::INFINITY,
        }
    }

    #[test]
    fn relative_discrepancy_examples() {
        assert_eq!(relative_discrepancy(0.5, 0.25), 0.5);
        for x in [0.0, 0.1, 0.7, 1.0] {
            assert_eq!(relative_discrepancy(x, x), 0.0);
        }
        assert_eq!(relative_discrepancy(0.2, 0.4), -0.5);
    }

    #[test]
    fn theoretical_closed_forms() {
        let sym = row(1.0, 1.0, 0.0);
        let t = 2f64.ln();
        // (1/2 − e^{−t} + e^{−2t}/2) / (1 − e^{−t}) at t = ln 2.
        let closed = (0.5 - (-t).exp() + 0.5 * (-2.0 * t).exp()) / (1.0 - (-t).exp());
        assert!((closed - 0.25).abs() < 1e-15);
        assert!((theoretical_discrepancy(&sym, 1, t) - 0.25).abs() < 1e-6);
        assert!((theoretical_discrepancy(&sym, 1, f64::INFINITY) - 0.5).abs() < 1e-6);
        assert!((theoretical_discrepancy(&sym, 1, 1e6) - 0.5).abs() < 1e-6);
        let single = row(1.3, 0.0, 0.4);
        for t in [0.1, 1.0, 10.0] {
            assert_eq!(theoretical_discrepancy(&single, 1, t), 0.0);
        }
        assert_eq!(theoretical_discrepancy(&row(0.0, 1.0, 0.0), 1, 1.0), 0.0);
    }

    #[test]
    fn theoretical_agrees_with_closed_form_cif() {
        // Two routes to the same number: quadrature of the latent times
        // against the closed-form CIF and marginal.
        for &(w1, w2, ws) in &[(0.5, 1.2, 0.3), (2.0, 0.4, 1.5), (0.1, 3.0, 0.0), (1.0, 1.0, 4.0)] {
            let r = row(w1, w2, ws);
            for &t in &[0.05, 0.4, 1.0, 3.0] {
                let via_cif = relative_discrepancy(r.marginal(1, t), r.cif(1, t));
                let via_quad = theoretical_discrepancy(&r, 1, t);
                assert!((via_cif - via_quad).abs() < 1e-8, "({w1},{w2},{ws},{t}): {via_cif} vs {via_quad}");
            }
        }
    }

    #[test]
    fn theoretical_monotone_in_competing_hazard() {
        for &t in &[0.2, 1.0, 5.0] {
            let mut prev = 0.0;
            for k in 0..20 {
                let v = theoretical_discrepancy(&row(0.8, 0.1 * k as f64, 0.7), 1, t);
                assert!((0.0..=1.0).contains(&v));
                assert!(v >= prev - 1e-12);
                prev = v;
            }
        }
    }

    #[test]
    fn latent_ordering_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = latent_ordering_check(&[row(1.0, 0.0, 0.5)], 1, 1.0, 10_000, &mut rng)[0];
        assert_eq!((c.lhs, c.rhs), (0.0, 0.0));
        let c = latent_ordering_check(&[row(1.0, 1.0, 0.0)], 1, 50.0, 100_000, &mut rng)[0];
        assert!((c.lhs - 0.5).abs() < 0.02 && (c.rhs - 0.5).abs() < 0.02);
    }

    #[test]
    fn group_discrepancy_examples() {
        let g = group_discrepancy(&[0.3; 4], &[0, 1, 0, 1]).unwrap();
        assert_eq!(g.gap, [0.0, 0.0]);
        let g = group_discrepancy(&[0.4, 0.1, 0.4, 0.1], &[1, 0, 1, 0]).unwrap();
        assert!((g.gap[1] - 0.3).abs() < 1e-15);
        assert_eq!(g.gap[0], -g.gap[1]);
        let g = group_discrepancy(&[0.2, 0.5], &[0, 1]).unwrap();
        assert!((g.gap[0] + 0.3).abs() < 1e-15 && (g.gap[1] - 0.3).abs() < 1e-15);
        assert!(matches!(group_discrepancy(&[0.1, 0.2], &[1, 1]), Err(Error::EmptyGroup)));
    }

    fn point(theory: f64, emp: f64) -> ReplicationPoint {
        ReplicationPoint {
            empirical_l: emp,
            theoretical_l: theory,
            empirical_gap: emp,
            theoretical_gap: theory,
        }
    }

    #[test]
    fn study_summary_examples() {
        let s = study_summary(&[point(0.2, 0.2), point(0.3, 0.3)], 0).unwrap();
        assert_eq!(s.rmse_l.rmse, 0.0);
        assert_eq!(s.rmse_l.bootstrap_sd, 0.0);
        let s = study_summary(&[point(1.0, 0.0), point(1.0, 0.0)], 0).unwrap();
        assert_eq!(s.rmse_l.rmse, 1.0);
        assert_eq!(s.rmse_l.bootstrap_sd, 0.0);
        let s = study_summary(&[point(0.0, 0.3), point(0.0, 0.4)], 0).unwrap();
        assert!((s.rmse_l.rmse - 0.125f64.sqrt()).abs() < 1e-15);
        assert!((s.rmse_l.rmse - 0.3536).abs() < 1e-4);
        assert!(s.rmse_l.bootstrap_sd > 0.0);
        assert!(study_summary(&[point(0.0, 0.0)], 0).is_err());
    }

    #[test]
    fn ols_slope_recovers_line() {
        let pairs: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        assert!((ols_slope(&pairs).unwrap() - 2.0).abs() < 1e-12);
        assert!(ols_slope(&[(1.0, 2.0), (1.0, 3.0)]).is_none());
    }
}

//! Proportional (sub)hazards regression by Newton-Raphson on the Breslow
//! partial likelihood.
//!
//! The Cox model and the Fine-Gray model share one engine. They differ only
//! in the risk set: Fine-Gray keeps subjects with a competing event at risk
//! after their event time, weighted by `Ĝ(t−) / Ĝ(T_j−)`.

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};
use crate::step::StepFunction;

pub const GRADIENT_TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 100;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    /// Max-norm of the partial-likelihood gradient at the returned coefficients.
    pub gradient_norm: f64,
    pub loglik_trace: Vec<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

pub(crate) struct PhFit {
    pub beta: Vec<f64>,
    pub baseline: StepFunction,
    pub diagnostics: FitDiagnostics,
}

struct EventGroup {
    time: f64,
    /// Range of target events in the time-sorted arrays.
    first: usize,
    last: usize,
    /// Scale applied to the competing-event pool (`Ĝ(t−)`); 0 for Cox.
    pool_scale: f64,
}

struct Problem {
    p: usize,
    mean: Vec<f64>,
    sd: Vec<f64>,
    /// Standardized covariates, row-major, rows sorted by time.
    z: Vec<f64>,
    times: Vec<f64>,
    /// Per-subject weight in the competing pool (`1 / Ĝ(T_j−)`), 0 if not pooled.
    pool_weight: Vec<f64>,
    target: Vec<bool>,
    groups: Vec<EventGroup>,
}

struct Eval {
    loglik: f64,
    grad: Vec<f64>,
    info: Vec<f64>,
    /// Risk-set sums `Σ w exp(η − offset)` per event group.
    s0: Vec<f64>,
    offset: f64,
}

impl Problem {
    fn new(data: &SurvivalDataset, cause: u8, censoring: Option<&StepFunction>) -> Result<(Self, Vec<String>)> {
        let n = data.len();
        let p = data.n_covariates();
        let mut order: Vec<usize> = (0..n).collect();
        let subjects = data.subjects();
        order.sort_by(|&a, &b| subjects[a].time.total_cmp(&subjects[b].time));

        let mut mean = vec![0.0; p];
        let mut sd = vec![0.0; p];
        for j in 0..p {
            let m = subjects.iter().map(|s| s.covariates[j]).sum::<f64>() / n as f64;
            let v = subjects
                .iter()
                .map(|s| (s.covariates[j] - m).powi(2))
                .sum::<f64>()
                / n as f64;
            mean[j] = m;
            sd[j] = v.sqrt();
            if !(sd[j] > 1e-12 * (1.0 + m.abs())) {
                return Err(Error::CollinearCovariates);
            }
        }

        let mut z = Vec::with_capacity(n * p);
        let mut times = Vec::with_capacity(n);
        let mut target = Vec::with_capacity(n);
        let mut pool_weight = Vec::with_capacity(n);
        let mut warnings = Vec::new();
        for &i in &order {
            let s = &subjects[i];
            z.extend((0..p).map(|j| (s.covariates[j] - mean[j]) / sd[j]));
            times.push(s.time);
            target.push(s.event.0 == cause);
            let competing = !s.event.is_censored() && s.event.0 != cause;
            let w = match censoring {
                Some(g) if competing => {
                    let gl = g.eval_left(s.time);
                    if gl > 0.0 {
                        1.0 / gl
                    } else {
                        0.0
                    }
                }
                _ => 0.0,
            };
            pool_weight.push(w);
        }

        let mut groups = Vec::new();
        let mut i = 0;
        let mut last_positive_g = 1.0;
        let mut truncated = false;
        while i < n {
            let t = times[i];
            let mut j = i;
            while j < n && times[j] == t {
                j += 1;
            }
            let first = (i..j).find(|&k| target[k]);
            if let Some(first) = first {
                let last = (i..j).rev().find(|&k| target[k]).unwrap() + 1;
                let pool_scale = match censoring {
                    Some(g) => {
                        let gl = g.eval_left(t);
                        if gl > 0.0 {
                            last_positive_g = gl;
                            gl
                        } else {
                            truncated = true;
                            last_positive_g
                        }
                    }
                    None => 0.0,
                };
                groups.push(EventGroup {
                    time: t,
                    first,
                    last,
                    pool_scale,
                });
            }
            i = j;
        }
        if groups.is_empty() {
            return Err(Error::NoEvents(cause));
        }
        if truncated {
            warnings.push(
                "censoring survival reached zero before the last event; weights truncated at the last time it was positive"
                    .to_string(),
            );
        }
        Ok((
            Self {
                p,
                mean,
                sd,
                z,
                times,
                pool_weight,
                target,
                groups,
            },
            warnings,
        ))
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.z[i * self.p..(i + 1) * self.p]
    }

    fn evaluate(&self, beta: &[f64]) -> Eval {
        let p = self.p;
        let n = self.times.len();
        let eta: Vec<f64> = (0..n)
            .map(|i| self.row(i).iter().zip(beta).map(|(a, b)| a * b).sum())
            .collect();
        let offset = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let offset = if offset.is_finite() { offset } else { 0.0 };
        let risk: Vec<f64> = eta.iter().map(|&e| (e - offset).exp()).collect();

        let ng = self.groups.len();
        let mut s0 = vec![0.0; ng];
        let mut s1 = vec![0.0; ng * p];
        let mut s2 = vec![0.0; ng * p * p];

        let accumulate = |a0: &mut f64, a1: &mut [f64], a2: &mut [f64], i: usize, w: f64| {
            let x = self.row(i);
            *a0 += w;
            for r in 0..p {
                let wx = w * x[r];
                a1[r] += wx;
                for c in 0..=r {
                    a2[r * p + c] += wx * x[c];
                }
            }
        };

        // Subjects still under observation: T_j >= t.
        let (mut a0, mut a1, mut a2) = (0.0, vec![0.0; p], vec![0.0; p * p]);
        let mut idx = n;
        for (k, g) in self.groups.iter().enumerate().rev() {
            while idx > 0 && self.times[idx - 1] >= g.time {
                idx -= 1;
                accumulate(&mut a0, &mut a1, &mut a2, idx, risk[idx]);
            }
            s0[k] = a0;
            s1[k * p..(k + 1) * p].copy_from_slice(&a1);
            s2[k * p * p..(k + 1) * p * p].copy_from_slice(&a2);
        }

        // Competing-event pool: T_j < t, weighted by Ĝ(t−)/Ĝ(T_j−).
        if self.groups.iter().any(|g| g.pool_scale > 0.0) {
            let (mut c0, mut c1, mut c2) = (0.0, vec![0.0; p], vec![0.0; p * p]);
            let mut idx = 0;
            for (k, g) in self.groups.iter().enumerate() {
                while idx < n && self.times[idx] < g.time {
                    if self.pool_weight[idx] > 0.0 {
                        accumulate(&mut c0, &mut c1, &mut c2, idx, risk[idx] * self.pool_weight[idx]);
                    }
                    idx += 1;
                }
                let sc = g.pool_scale;
                s0[k] += sc * c0;
                for r in 0..p {
                    s1[k * p + r] += sc * c1[r];
                }
                for r in 0..p * p {
                    s2[k * p * p + r] += sc * c2[r];
                }
            }
        }

        let mut loglik = 0.0;
        let mut grad = vec![0.0; p];
        let mut info = vec![0.0; p * p];
        for (k, g) in self.groups.iter().enumerate() {
            let d = (g.first..g.last).filter(|&i| self.target[i]).count() as f64;
            let mut eta_sum = 0.0;
            for i in (g.first..g.last).filter(|&i| self.target[i]) {
                eta_sum += eta[i];
                for (r, x) in self.row(i).iter().enumerate() {
                    grad[r] += x;
                }
            }
            let denom = s0[k];
            loglik += eta_sum - d * (denom.ln() + offset);
            let m1 = &s1[k * p..(k + 1) * p];
            for r in 0..p {
                let mr = m1[r] / denom;
                grad[r] -= d * mr;
                for c in 0..=r {
                    let v = d * (s2[k * p * p + r * p + c] / denom - mr * m1[c] / denom);
                    info[r * p + c] += v;
                }
            }
        }
        for r in 0..p {
            for c in 0..r {
                info[c * p + r] = info[r * p + c];
            }
        }
        Eval {
            loglik,
            grad,
            info,
            s0,
            offset,
        }
    }

    /// Gradient max-norm on the original covariate scale.
    fn original_scale_norm(&self, grad: &[f64]) -> f64 {
        grad.iter()
            .zip(&self.sd)
            .map(|(g, s)| (g * s).abs())
            .chain(grad.iter().map(|g| g.abs()))
            .fold(0.0, f64::max)
    }
}

/// Solves `A x = b` for symmetric positive-definite `A` (row-major `p × p`).
fn cholesky_solve(a: &[f64], b: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; p * p];
    let scale = (0..p).map(|i| a[i * p + i].abs()).fold(0.0, f64::max);
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if !(s > 1e-12 * scale.max(1e-300)) {
                    return None;
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    let mut y = vec![0.0; p];
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * p + k] * y[k];
        }
        y[i] = s / l[i * p + i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = y[i];
        for k in i + 1..p {
            s -= l[k * p + i] * x[k];
        }
        x[i] = s / l[i * p + i];
    }
    Some(x)
}

/// Slack for comparing log-likelihoods that differ only by rounding.
pub(crate) fn loglik_slack(loglik: f64) -> f64 {
    1e-12 * (1.0 + loglik.abs())
}

pub(crate) fn fit_proportional(
    data: &SurvivalDataset,
    cause: u8,
    censoring: Option<&StepFunction>,
) -> Result<PhFit> {
    let (problem, warnings) = Problem::new(data, cause, censoring)?;
    let p = problem.p;
    let mut beta = vec![0.0; p];
    let mut current = problem.evaluate(&beta);
    let mut trace = vec![current.loglik];
    let mut grad_trace = Vec::new();
    let mut iterations = 0;

    loop {
        let norm = problem.original_scale_norm(&current.grad);
        grad_trace.push(norm);
        if norm < GRADIENT_TOLERANCE {
            break;
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::NonConvergence {
                iterations,
                trace: grad_trace,
            });
        }
        iterations += 1;
        let step = cholesky_solve(&current.info, &current.grad, p).ok_or(Error::CollinearCovariates)?;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let eval = problem.evaluate(&candidate);
            if eval.loglik.is_finite() && eval.loglik >= current.loglik - loglik_slack(current.loglik) {
                accepted = Some((candidate, eval));
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some((b, e)) => {
                beta = b;
                current = e;
                trace.push(current.loglik);
            }
            None => {
                return Err(Error::NonConvergence {
                    iterations,
                    trace: grad_trace,
                })
            }
        }
    }

    // Back to the original covariate scale: η = β·x − β·μ.
    let beta_orig: Vec<f64> = beta.iter().zip(&problem.sd).map(|(b, s)| b / s).collect();
    let centering: f64 = beta_orig.iter().zip(&problem.mean).map(|(b, m)| b * m).sum();

    // Breslow: ΔH(t_k) = d_k / Σ_{risk set} w exp(β·x).
    let mut cum = 0.0;
    let mut times = Vec::with_capacity(problem.groups.len());
    let mut values = Vec::with_capacity(problem.groups.len());
    for (k, g) in problem.groups.iter().enumerate() {
        let d = (g.first..g.last).filter(|&i| problem.target[i]).count() as f64;
        let log_denom = current.s0[k].ln() + current.offset + centering;
        cum += d * (-log_denom).exp();
        times.push(g.time);
        values.push(cum);
    }
    Ok(PhFit {
        beta: beta_orig,
        baseline: StepFunction::from_sorted(0.0, times, values),
        diagnostics: FitDiagnostics {
            iterations,
            gradient_norm: *grad_trace.last().unwrap(),
            loglik_trace: trace,
            warnings,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_and_detects_singular() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let x = cholesky_solve(&a, &[2.0, 1.0], 2).unwrap();
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-14);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-14);
        assert!(cholesky_solve(&[1.0, 1.0, 1.0, 1.0], &[1.0, 1.0], 2).is_none());
    }
}

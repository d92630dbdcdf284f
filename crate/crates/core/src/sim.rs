//! Synthetic competing-risks populations with known ground truth.
//!
//! Two causes with Gompertz cause-specific hazards `λ_r(t) = w_r · exp(w_s · t)`
//! share the shape `w_s`, so the all-cause hazard is again Gompertz and the
//! cause of the first event is independent of its time. Censoring is an
//! independent constant hazard `w_c`. Scale and shape parameters are
//! non-linear transforms of the covariates with group-specific coefficients.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{EventCode, Subject, SurvivalDataset};
use crate::error::{Error, Result};

/// Number of covariate-slice entries consumed by the shape and censoring transforms.
pub const SLICE_LEN: usize = 5;
/// Minimum covariate count; the transforms read indices up to 9.
pub const MIN_COVARIATES: usize = 10;
const MAX_RESAMPLES: usize = 100;

/// Gompertz hazard `λ(t) = scale · exp(shape · t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GompertzParams {
    pub scale: f64,
    pub shape: f64,
}

impl GompertzParams {
    pub fn new(scale: f64, shape: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite() && shape >= 0.0 && shape.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "Gompertz parameters must be finite and non-negative (scale {scale}, shape {shape})"
            )));
        }
        Ok(Self { scale, shape })
    }

    pub fn hazard(&self, t: f64) -> f64 {
        self.scale * (self.shape * t).exp()
    }

    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        if self.scale == 0.0 {
            0.0
        } else if self.shape == 0.0 {
            self.scale * t
        } else {
            self.scale * (self.shape * t).exp_m1() / self.shape
        }
    }

    pub fn survival(&self, t: f64) -> f64 {
        (-self.cumulative_hazard(t)).exp()
    }

    pub fn cdf(&self, t: f64) -> f64 {
        -(-self.cumulative_hazard(t)).exp_m1()
    }

    pub fn pdf(&self, t: f64) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        let h = self.cumulative_hazard(t);
        if !h.is_finite() {
            return 0.0;
        }
        (self.scale.ln() + self.shape * t - h).exp()
    }

    /// Time at which the cumulative hazard reaches `target`.
    pub fn inverse_cumulative_hazard(&self, target: f64) -> Result<f64> {
        if self.scale == 0.0 {
            return Err(Error::DegenerateHazard);
        }
        if self.shape == 0.0 {
            Ok(target / self.scale)
        } else {
            Ok((self.shape * target / self.scale).ln_1p() / self.shape)
        }
    }

    /// Inverse-transform sample: the `T` solving `H(T) = -ln u`.
    pub fn sample_with(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::InvalidInput(format!("uniform draw {u} outside (0, 1]")));
        }
        self.inverse_cumulative_hazard(-u.ln())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let u: f64 = rng.sample(Open01);
        self.sample_with(u)
    }
}

pub fn sample_gompertz(params: GompertzParams, u: f64) -> Result<f64> {
    params.sample_with(u)
}

pub fn gompertz_cdf(params: GompertzParams, t: f64) -> f64 {
    params.cdf(t)
}

pub fn gompertz_pdf(params: GompertzParams, t: f64) -> f64 {
    params.pdf(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub sigma_k: f64,
    pub sigma_phi: f64,
    pub sigma_z: f64,
    /// Center of covariates 0 and 1 for group 1; group 0 uses the negation.
    pub group_center: [f64; 2],
    pub group_prob: f64,
    pub seed: u64,
    pub replications: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 30_000,
            p: 10,
            sigma_k: 1.0,
            sigma_phi: 1.0,
            sigma_z: 1.0,
            group_center: [1.5, 1.5],
            group_prob: 0.5,
            seed: 0,
            replications: 25,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.p < MIN_COVARIATES {
            return Err(Error::Config(format!(
                "p must be at least {MIN_COVARIATES}, got {}",
                self.p
            )));
        }
        for (name, s) in [
            ("sigma_k", self.sigma_k),
            ("sigma_phi", self.sigma_phi),
            ("sigma_z", self.sigma_z),
        ] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {s}")));
            }
        }
        if !(0.0..=1.0).contains(&self.group_prob) {
            return Err(Error::Config("group_prob must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Coefficients of one group. `zeta` is shared by both groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCoefficients {
    pub kappa1: Vec<f64>,
    pub kappa2: Vec<f64>,
    pub phi: Vec<f64>,
    pub zeta: Vec<f64>,
}

fn normal_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, sd: f64) -> Result<Vec<f64>> {
    let dist = Normal::new(0.0, sd).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok((0..len).map(|_| rng.sample(dist)).collect())
}

/// Draws the coefficients of group 0 and group 1 (indexed by group label).
///
/// Draw order: `κ₁, κ₂, φ` for group 0, then group 1, then the shared `ζ`.
pub fn make_coefficients<R: Rng + ?Sized>(
    config: &SimConfig,
    rng: &mut R,
) -> Result<[GroupCoefficients; 2]> {
    let mut per_group = Vec::with_capacity(2);
    for _ in 0..2 {
        let kappa1 = normal_vec(rng, config.p, config.sigma_k)?;
        let kappa2 = normal_vec(rng, config.p, config.sigma_k)?;
        let phi = normal_vec(rng, SLICE_LEN, config.sigma_phi)?;
        per_group.push((kappa1, kappa2, phi));
    }
    let zeta = normal_vec(rng, SLICE_LEN, config.sigma_z)?;
    let mut it = per_group
        .into_iter()
        .map(|(kappa1, kappa2, phi)| GroupCoefficients {
            kappa1,
            kappa2,
            phi,
            zeta: zeta.clone(),
        });
    Ok([it.next().unwrap(), it.next().unwrap()])
}

/// Draws one subject's group label and covariate vector.
pub fn gen_subject_covariates<R: Rng + ?Sized>(config: &SimConfig, group: u8, rng: &mut R) -> Vec<f64> {
    let sign = if group == 1 { 1.0 } else { -1.0 };
    (0..config.p)
        .map(|j| {
            let z: f64 = rng.sample(StandardNormal);
            if j < 2 {
                sign * config.group_center[j] + z
            } else {
                z
            }
        })
        .collect()
}

/// Draws `config.n` group labels and covariate vectors.
pub fn gen_covariates<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> (Vec<u8>, Vec<Vec<f64>>) {
    (0..config.n)
        .map(|_| {
            let g = u8::from(rng.random_bool(config.group_prob));
            (g, gen_subject_covariates(config, g, rng))
        })
        .unzip()
}

/// Per-subject Gompertz parameters derived from the covariates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardWeights {
    pub w1: f64,
    pub w2: f64,
    pub ws: f64,
    pub wc: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Covariate transforms (0-based half-open slices `[1, 5)` and `[5, 10)`).
pub fn transforms(x: &[f64], coeffs: &GroupCoefficients) -> HazardWeights {
    let lo = 1..5;
    let hi = 5..10;
    let k1 = &coeffs.kappa1;
    let k2 = &coeffs.kappa2;
    let w1 = (dot(&k1[hi.clone()], &x[hi.clone()]).powi(2) + dot(&k1[lo.clone()], &x[lo.clone()])).abs();
    let w2 = (dot(&k2[lo.clone()], &x[lo]).powi(2) + dot(&k2[hi.clone()], &x[hi.clone()])).abs();
    let ws = dot(&coeffs.phi, &x[hi.clone()]).abs();
    let wc = dot(&coeffs.zeta, &x[hi]).powi(2);
    HazardWeights { w1, w2, ws, wc }
}

/// Time and cause of the first latent event.
pub fn gen_events<R: Rng + ?Sized>(w: &HazardWeights, rng: &mut R) -> Result<(f64, u8)> {
    let total = w.w1 + w.w2;
    if !(total > 0.0) {
        return Err(Error::DegenerateSubject);
    }
    let time = GompertzParams::new(total, w.ws)?.sample(rng)?;
    let cause = if rng.random::<f64>() < w.w1 / total { 1 } else { 2 };
    Ok((time, cause))
}

/// Censoring time from the constant hazard `wc`; `+∞` when `wc = 0`.
pub fn gen_censoring<R: Rng + ?Sized>(w: &HazardWeights, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    censoring_time(w.wc, u)
}

pub fn censoring_time(wc: f64, u: f64) -> f64 {
    if wc == 0.0 {
        f64::INFINITY
    } else {
        -u.ln() / wc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRow {
    pub id: String,
    pub group: u8,
    pub w1: f64,
    pub w2: f64,
    pub ws: f64,
    pub wc: f64,
    pub latent_time: f64,
    pub latent_cause: u8,
    pub censor_time: f64,
}

impl GroundTruthRow {
    pub fn weights(&self) -> HazardWeights {
        HazardWeights {
            w1: self.w1,
            w2: self.w2,
            ws: self.ws,
            wc: self.wc,
        }
    }

    /// Latent cause-specific time distribution `T_r` (ignoring the other cause).
    pub fn cause_params(&self, cause: u8) -> GompertzParams {
        let scale = if cause == 1 { self.w1 } else { self.w2 };
        GompertzParams {
            scale,
            shape: self.ws,
        }
    }

    pub fn all_cause_params(&self) -> GompertzParams {
        GompertzParams {
            scale: self.w1 + self.w2,
            shape: self.ws,
        }
    }

    /// True cumulative incidence `P(T' <= t, D' = r)`.
    pub fn cif(&self, cause: u8, t: f64) -> f64 {
        let total = self.w1 + self.w2;
        if total == 0.0 {
            return 0.0;
        }
        let share = if cause == 1 { self.w1 } else { self.w2 } / total;
        share * self.all_cause_params().cdf(t)
    }

    /// True marginal `P(T_r <= t)`, what a competing-as-censoring estimator targets.
    pub fn marginal(&self, cause: u8, t: f64) -> f64 {
        self.cause_params(cause).cdf(t)
    }

    /// `P(T' > t)`.
    pub fn event_free_survival(&self, t: f64) -> f64 {
        self.all_cause_params().survival(t)
    }

    pub fn observed(&self) -> (f64, EventCode) {
        if self.latent_time <= self.censor_time {
            (self.latent_time, EventCode(self.latent_cause))
        } else {
            (self.censor_time, EventCode::CENSORED)
        }
    }
}

pub fn true_cif(row: &GroundTruthRow, cause: u8, t: f64) -> f64 {
    row.cif(cause, t)
}

pub fn true_marginal(row: &GroundTruthRow, cause: u8, t: f64) -> f64 {
    row.marginal(cause, t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub rows: Vec<GroundTruthRow>,
    pub coefficients: Option<[GroupCoefficients; 2]>,
}

/// The PRNG stream for replication `index`: streams are independent of each
/// other and of the order in which replications are generated.
pub fn replication_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn generate_replication(config: &SimConfig, index: u64) -> Result<(SurvivalDataset, GroundTruth)> {
    config.validate()?;
    let mut rng = replication_rng(config.seed, index);
    let coeffs = make_coefficients(config, &mut rng)?;

    let mut subjects = Vec::with_capacity(config.n);
    let mut rows = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let group = u8::from(rng.random_bool(config.group_prob));
        let mut attempt = 0;
        let (x, w) = loop {
            let x = gen_subject_covariates(config, group, &mut rng);
            let w = transforms(&x, &coeffs[group as usize]);
            if w.w1 + w.w2 > 0.0 {
                break (x, w);
            }
            attempt += 1;
            if attempt >= MAX_RESAMPLES {
                return Err(Error::DegenerateSubject);
            }
        };
        let (latent_time, latent_cause) = gen_events(&w, &mut rng)?;
        let censor_time = gen_censoring(&w, &mut rng);
        let row = GroundTruthRow {
            id: i.to_string(),
            group,
            w1: w.w1,
            w2: w.w2,
            ws: w.ws,
            wc: w.wc,
            latent_time,
            latent_cause,
            censor_time,
        };
        let (time, event) = row.observed();
        subjects.push(Subject {
            id: row.id.clone(),
            covariates: x,
            group,
            time,
            event,
        });
        rows.push(row);
    }
    let data = SurvivalDataset::new(subjects, 2, config.p)?;
    Ok((
        data,
        GroundTruth {
            rows,
            coefficients: Some(coeffs),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gompertz_sampling_examples() {
        let exp1 = GompertzParams::new(1.0, 0.0).unwrap();
        assert!(close(sample_gompertz(exp1, (-1.0f64).exp()).unwrap(), 1.0, 1e-14));
        let g = GompertzParams::new(1.0, 1.0).unwrap();
        assert!(close(sample_gompertz(g, (-(E - 1.0)).exp()).unwrap(), 1.0, 1e-14));
        let exp2 = GompertzParams::new(2.0, 0.0).unwrap();
        assert!(close(sample_gompertz(exp2, (-1.0f64).exp()).unwrap(), 0.5, 1e-14));
        let zero = GompertzParams::new(0.0, 1.0).unwrap();
        assert!(matches!(sample_gompertz(zero, 0.5), Err(Error::DegenerateHazard)));
    }

    #[test]
    fn gompertz_cdf_examples() {
        let g = GompertzParams::new(1.3, 0.7).unwrap();
        assert_eq!(gompertz_cdf(g, 0.0), 0.0);
        let exp1 = GompertzParams::new(1.0, 0.0).unwrap();
        assert!(close(gompertz_cdf(exp1, 1.0), 1.0 - (-1.0f64).exp(), 1e-15));
        assert!(close(gompertz_cdf(exp1, 1.0), 0.6321, 1e-4));
        let g = GompertzParams::new(1.0, 1.0).unwrap();
        assert!(close(gompertz_cdf(g, 1.0), 1.0 - (-(E - 1.0)).exp(), 1e-15));
        // 1 - exp(-(e - 1)) = 0.82063...
        assert!(close(gompertz_cdf(g, 1.0), 0.8206, 1e-4));
    }

    #[test]
    fn pdf_is_derivative_of_cdf() {
        let g = GompertzParams::new(0.8, 1.4).unwrap();
        for &t in &[0.0, 0.1, 0.5, 1.3] {
            let h = 1e-6;
            let fd = (g.cdf(t + h) - g.cdf((t - h).max(0.0))) / (t + h - (t - h).max(0.0));
            assert!(close(g.pdf(t), fd, 1e-6), "t={t}");
        }
    }

    #[test]
    fn sampler_matches_cdf_ks() {
        for &(a, b) in &[(1.0, 0.0), (0.5, 2.0), (3.0, 0.3)] {
            let g = GompertzParams::new(a, b).unwrap();
            let mut rng = replication_rng(11, 0);
            let mut draws: Vec<f64> = (0..10_000).map(|_| g.sample(&mut rng).unwrap()).collect();
            draws.sort_by(f64::total_cmp);
            let n = draws.len() as f64;
            let ks = draws
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let c = g.cdf(x);
                    (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
                })
                .fold(0.0, f64::max);
            assert!(ks < 0.02, "KS distance {ks} for ({a}, {b})");
        }
    }

    #[test]
    fn zero_variance_coefficients_surface_degenerate_subjects() {
        let config = SimConfig {
            sigma_k: 0.0,
            ..SimConfig::default()
        };
        let mut rng = replication_rng(1, 0);
        let coeffs = make_coefficients(&config, &mut rng).unwrap();
        assert!(coeffs[0].kappa1.iter().all(|&k| k == 0.0));
        let x = gen_subject_covariates(&config, 1, &mut rng);
        let w = transforms(&x, &coeffs[1]);
        assert_eq!((w.w1, w.w2), (0.0, 0.0));
        assert!(matches!(gen_events(&w, &mut rng), Err(Error::DegenerateSubject)));
        assert!(generate_replication(&config, 0).is_err());
    }

    #[test]
    fn coefficient_variance_and_group_independence() {
        let config = SimConfig::default();
        let mut rng = replication_rng(5, 0);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut count = 0.0;
        for _ in 0..1_000 {
            let c = make_coefficients(&config, &mut rng).unwrap();
            assert_eq!(c[0].kappa1.len(), 10);
            assert_ne!(c[0].kappa1, c[1].kappa1);
            assert_eq!(c[0].zeta, c[1].zeta);
            for k in c.iter().flat_map(|g| g.kappa1.iter().chain(&g.kappa2)) {
                sum += k;
                sum_sq += k * k;
                count += 1.0;
            }
        }
        let mean = sum / count;
        let var = sum_sq / count - mean * mean;
        assert!(close(var, 1.0, 0.05), "variance {var}");
    }

    #[test]
    fn covariate_moments() {
        let config = SimConfig::default();
        let mut rng = replication_rng(3, 0);
        let (groups, x) = gen_covariates(&config, &mut rng);
        let n = groups.len() as f64;
        let frac = groups.iter().map(|&g| g as f64).sum::<f64>() / n;
        assert!(close(frac, 0.5, 0.02));
        let g1: Vec<f64> = groups
            .iter()
            .zip(&x)
            .filter(|(&g, _)| g == 1)
            .map(|(_, xi)| xi[0])
            .collect();
        let g1_mean = g1.iter().sum::<f64>() / g1.len() as f64;
        assert!(close(g1_mean, 1.5, 0.05), "{g1_mean}");
        let g0_mean = groups
            .iter()
            .zip(&x)
            .filter(|(&g, _)| g == 0)
            .map(|(_, xi)| xi[1])
            .sum::<f64>()
            / (n - g1.len() as f64);
        assert!(close(g0_mean, -1.5, 0.05), "{g0_mean}");
        let m5 = x.iter().map(|xi| xi[5]).sum::<f64>() / n;
        assert!(close(m5, 0.0, 0.05));
    }

    #[test]
    fn transform_examples() {
        let zero = GroupCoefficients {
            kappa1: vec![0.0; 10],
            kappa2: vec![0.0; 10],
            phi: vec![0.0; 5],
            zeta: vec![0.0; 5],
        };
        let w = transforms(&[0.0; 10], &GroupCoefficients {
            kappa1: vec![1.0; 10],
            kappa2: vec![1.0; 10],
            phi: vec![1.0; 5],
            zeta: vec![1.0; 5],
        });
        assert_eq!((w.w1, w.w2, w.ws, w.wc), (0.0, 0.0, 0.0, 0.0));

        let mut c = zero.clone();
        c.kappa1[5] = 1.0;
        let mut x = [0.0; 10];
        x[5] = 2.0;
        assert_eq!(transforms(&x, &c).w1, 4.0);

        let mut c = zero;
        c.zeta[0] = 1.0;
        let mut x = [0.0; 10];
        x[5] = -3.0;
        assert_eq!(transforms(&x, &c).wc, 9.0);
    }

    #[test]
    fn event_generation() {
        let mut rng = replication_rng(9, 0);
        let w = HazardWeights { w1: 0.7, w2: 0.0, ws: 0.4, wc: 0.0 };
        for _ in 0..1000 {
            assert_eq!(gen_events(&w, &mut rng).unwrap().1, 1);
        }
        let w = HazardWeights { w1: 1.0, w2: 1.0, ws: 0.0, wc: 0.0 };
        let n = 100_000;
        let (mut mean, mut ones) = (0.0, 0usize);
        for _ in 0..n {
            let (t, d) = gen_events(&w, &mut rng).unwrap();
            mean += t;
            ones += usize::from(d == 1);
        }
        mean /= n as f64;
        assert!(close(mean, 0.5, 0.01), "{mean}");
        assert!(close(ones as f64 / n as f64, 0.5, 0.01));
    }

    #[test]
    fn censoring_generation() {
        assert_eq!(censoring_time(0.0, 0.3), f64::INFINITY);
        assert!(close(censoring_time(1.0, (-1.0f64).exp()), 1.0, 1e-15));
        let mut rng = replication_rng(4, 0);
        let w = HazardWeights { w1: 1.0, w2: 1.0, ws: 0.0, wc: 2.0 };
        let n = 100_000;
        let mean = (0..n).map(|_| gen_censoring(&w, &mut rng)).sum::<f64>() / n as f64;
        assert!(close(mean, 0.5, 0.01), "{mean}");
    }

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
    fn true_cif_examples() {
        let r = row(0.9, 1.1, 0.5);
        assert_eq!(true_cif(&r, 1, 0.0), 0.0);
        assert_eq!(true_marginal(&r, 1, 0.0), 0.0);
        let single = row(0.9, 0.0, 0.5);
        for &t in &[0.1, 1.0, 3.0] {
            assert!(close(true_cif(&single, 1, t), true_marginal(&single, 1, t), 1e-15));
        }
        let sym = row(1.0, 1.0, 0.3);
        assert!(close(true_cif(&sym, 1, 1e3), 0.5, 1e-12));
    }

    #[test]
    fn true_cif_partition_and_bound() {
        let mut rng = replication_rng(21, 0);
        for _ in 0..200 {
            let r = row(
                rng.random::<f64>() * 3.0,
                rng.random::<f64>() * 3.0 + 1e-3,
                rng.random::<f64>() * 2.0,
            );
            for &t in &[0.01, 0.3, 1.0, 4.0] {
                let total = r.cif(1, t) + r.cif(2, t) + r.event_free_survival(t);
                assert!(close(total, 1.0, 1e-12));
                assert!(r.cif(1, t) <= r.marginal(1, t) + 1e-15);
                assert!(r.cif(2, t) <= r.marginal(2, t) + 1e-15);
            }
        }
    }

    #[test]
    fn monte_carlo_cif_frequency() {
        let w = HazardWeights { w1: 0.8, w2: 1.5, ws: 0.6, wc: 0.0 };
        let r = row(w.w1, w.w2, w.ws);
        let mut rng = replication_rng(77, 0);
        let n = 100_000;
        let t = 0.5;
        let hits = (0..n)
            .filter(|_| {
                let (time, cause) = gen_events(&w, &mut rng).unwrap();
                time < t && cause == 1
            })
            .count();
        assert!(close(hits as f64 / n as f64, r.cif(1, t), 0.01));
    }

    #[test]
    fn replication_shape_and_determinism() {
        let config = SimConfig {
            n: 2_000,
            seed: 42,
            ..SimConfig::default()
        };
        let (d1, t1) = generate_replication(&config, 3).unwrap();
        let (d2, t2) = generate_replication(&config, 3).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(t1, t2);
        assert_eq!(d1.len(), 2_000);
        assert_eq!(d1.n_risks(), 2);
        assert_eq!(d1.n_covariates(), 10);
        let (d3, _) = generate_replication(&config, 4).unwrap();
        assert_ne!(d1, d3);
        for (s, r) in d1.subjects().iter().zip(&t1.rows) {
            assert_eq!(s.id, r.id);
            let (time, event) = r.observed();
            assert_eq!((s.time, s.event), (time, event));
            assert!(r.w1 >= 0.0 && r.w2 >= 0.0 && r.ws >= 0.0 && r.wc >= 0.0);
        }
    }
}

//! Observable survival data: subjects with covariates, a binary group label,
//! the observed time and the observed event code.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed event type: `0` is censoring, `1..=R` a competing cause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventCode(pub u8);

impl EventCode {
    pub const CENSORED: EventCode = EventCode(0);

    pub fn is_censored(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub id: String,
    pub covariates: Vec<f64>,
    pub group: u8,
    pub time: f64,
    pub event: EventCode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    subjects: Vec<Subject>,
    n_risks: u8,
    n_covariates: usize,
}

impl SurvivalDataset {
    pub fn new(subjects: Vec<Subject>, n_risks: u8, n_covariates: usize) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::InvalidInput("dataset has no subjects".into()));
        }
        for (i, s) in subjects.iter().enumerate() {
            if s.covariates.len() != n_covariates {
                return Err(Error::InvalidInput(format!(
                    "subject {i} has {} covariates, expected {n_covariates}",
                    s.covariates.len()
                )));
            }
            if !(s.time >= 0.0) || !s.time.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "subject {i} has invalid time {}",
                    s.time
                )));
            }
            if s.event.0 > n_risks {
                return Err(Error::InvalidInput(format!(
                    "subject {i} has event code {} above declared risk count {n_risks}",
                    s.event.0
                )));
            }
            if s.group > 1 {
                return Err(Error::InvalidInput(format!(
                    "subject {i} has non-binary group label {}",
                    s.group
                )));
            }
        }
        Ok(Self {
            subjects,
            n_risks,
            n_covariates,
        })
    }

    /// Convenience constructor from parallel `times` / `events` slices with no covariates.
    pub fn from_times_events(times: &[f64], events: &[u8]) -> Result<Self> {
        if times.len() != events.len() {
            return Err(Error::InvalidInput("times/events length mismatch".into()));
        }
        let subjects = times
            .iter()
            .zip(events)
            .enumerate()
            .map(|(i, (&time, &event))| Subject {
                id: i.to_string(),
                covariates: Vec::new(),
                group: 0,
                time,
                event: EventCode(event),
            })
            .collect();
        let n_risks = events.iter().copied().max().unwrap_or(0);
        Self::new(subjects, n_risks, 0)
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn n_risks(&self) -> u8 {
        self.n_risks
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    pub fn times(&self) -> Vec<f64> {
        self.subjects.iter().map(|s| s.time).collect()
    }

    pub fn events(&self) -> Vec<u8> {
        self.subjects.iter().map(|s| s.event.0).collect()
    }

    pub fn groups(&self) -> Vec<u8> {
        self.subjects.iter().map(|s| s.group).collect()
    }

    /// Subjects at `indices`, in the given order. The declared risk count is kept.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let subjects = indices.iter().map(|&i| self.subjects[i].clone()).collect();
        Self::new(subjects, self.n_risks, self.n_covariates)
    }

    /// Same subjects with covariates replaced by the given columns.
    pub fn select_covariates(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&c) = columns.iter().find(|&&c| c >= self.n_covariates) {
            return Err(Error::InvalidInput(format!("covariate index {c} out of range")));
        }
        let subjects = self
            .subjects
            .iter()
            .map(|s| Subject {
                covariates: columns.iter().map(|&c| s.covariates[c]).collect(),
                ..s.clone()
            })
            .collect();
        Self::new(subjects, self.n_risks, columns.len())
    }

    /// Drops censoring: every censored subject is removed.
    pub fn uncensored(&self) -> Result<Self> {
        let subjects = self
            .subjects
            .iter()
            .filter(|s| !s.event.is_censored())
            .cloned()
            .collect();
        Self::new(subjects, self.n_risks, self.n_covariates)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub t: f64,
    pub label: String,
}

impl Horizon {
    pub fn new(t: f64, label: impl Into<String>) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::InvalidInput(format!("horizon must be non-negative, got {t}")));
        }
        Ok(Self {
            t,
            label: label.into(),
        })
    }
}

/// Lower (inverse-CDF) quantile of the uncensored event times: the smallest
/// uncensored time `t` such that the fraction of uncensored times `<= t` is at least `q`.
pub fn event_time_quantile(data: &SurvivalDataset, q: f64) -> Result<Horizon> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidInput(format!("quantile level {q} outside [0, 1]")));
    }
    let mut times: Vec<f64> = data
        .subjects()
        .iter()
        .filter(|s| !s.event.is_censored())
        .map(|s| s.time)
        .collect();
    if times.is_empty() {
        return Err(Error::NoUncensoredEvents);
    }
    times.sort_by(f64::total_cmp);
    let n = times.len();
    // Smallest k (1-based) with k / n >= q.
    let mut k = (q * n as f64).ceil() as usize;
    while k > 1 && (k - 1) as f64 / n as f64 >= q {
        k -= 1;
    }
    while k < n && (k as f64 / n as f64) < q {
        k += 1;
    }
    let t = times[k.clamp(1, n) - 1];
    Horizon::new(t, format!("q{q}"))
}

/// Deterministic development/test split. Returns `(dev, test)` index lists,
/// each in ascending order.
pub fn train_test_split(n: usize, dev_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_dev = ((n as f64) * dev_fraction).round() as usize;
    let n_dev = n_dev.min(n);
    let mut dev = idx[..n_dev].to_vec();
    let mut test = idx[n_dev..].to_vec();
    dev.sort_unstable();
    test.sort_unstable();
    (dev, test)
}

/// Binary grouping used for fairness reports: the `group` label or a
/// covariate column whose values are all 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grouping {
    Label,
    Covariate(usize),
}

impl std::str::FromStr for Grouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "group" {
            return Ok(Grouping::Label);
        }
        s.strip_prefix('x')
            .and_then(|k| k.parse().ok())
            .map(Grouping::Covariate)
            .ok_or_else(|| Error::InvalidInput(format!("grouping column `{s}` is neither `group` nor `x<k>`")))
    }
}

impl Grouping {
    pub fn assign(self, data: &SurvivalDataset) -> Result<Vec<u8>> {
        match self {
            Grouping::Label => Ok(data.groups()),
            Grouping::Covariate(k) => {
                if k >= data.n_covariates() {
                    return Err(Error::InvalidInput(format!("grouping column x{k} not present")));
                }
                data.subjects
                    .iter()
                    .map(|s| match s.covariates[k] {
                        v if v == 0.0 => Ok(0),
                        v if v == 1.0 => Ok(1),
                        v => Err(Error::InvalidInput(format!(
                            "grouping column x{k} has non-binary value {v} for subject `{}`",
                            s.id
                        ))),
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn four() -> SurvivalDataset {
        SurvivalDataset::from_times_events(&[1.0, 2.0, 3.0, 4.0], &[1, 1, 0, 2]).unwrap()
    }

    #[test]
    fn grouping_columns() {
        let subjects = (0..4)
            .map(|i| Subject {
                id: i.to_string(),
                covariates: vec![f64::from(i % 2), 0.5],
                group: (i / 2) as u8,
                time: 1.0,
                event: EventCode(1),
            })
            .collect();
        let d = SurvivalDataset::new(subjects, 1, 2).unwrap();
        assert_eq!("group".parse::<Grouping>().unwrap().assign(&d).unwrap(), vec![0, 0, 1, 1]);
        assert_eq!("x0".parse::<Grouping>().unwrap().assign(&d).unwrap(), vec![0, 1, 0, 1]);
        assert!("x1".parse::<Grouping>().unwrap().assign(&d).is_err());
        assert!("x7".parse::<Grouping>().unwrap().assign(&d).is_err());
        assert!("age".parse::<Grouping>().is_err());
    }

    #[test]
    fn quantile_maximum() {
        assert_eq!(event_time_quantile(&four(), 1.0).unwrap().t, 4.0);
    }

    #[test]
    fn quantile_median_is_lower_inverse_cdf() {
        // Uncensored times {1, 2, 4}: 1/3 of them are <= 1, 2/3 are <= 2.
        assert_eq!(event_time_quantile(&four(), 0.5).unwrap().t, 2.0);
        assert_eq!(event_time_quantile(&four(), 1.0 / 3.0).unwrap().t, 1.0);
        assert_eq!(event_time_quantile(&four(), 0.0).unwrap().t, 1.0);
    }

    #[test]
    fn quantile_all_censored() {
        let d = SurvivalDataset::from_times_events(&[5.0], &[0]).unwrap();
        assert!(matches!(
            event_time_quantile(&d, 0.5),
            Err(Error::NoUncensoredEvents)
        ));
    }

    #[test]
    fn dataset_validation() {
        assert!(SurvivalDataset::from_times_events(&[], &[]).is_err());
        assert!(SurvivalDataset::from_times_events(&[-1.0], &[1]).is_err());
        let s = Subject {
            id: "a".into(),
            covariates: vec![1.0],
            group: 0,
            time: 1.0,
            event: EventCode(3),
        };
        assert!(SurvivalDataset::new(vec![s], 2, 1).is_err());
    }

    #[test]
    fn split_is_deterministic_partition() {
        let (a, b) = train_test_split(100, 0.8, 7);
        assert_eq!(a.len(), 80);
        assert_eq!(b.len(), 20);
        let (a2, b2) = train_test_split(100, 0.8, 7);
        assert_eq!((a.clone(), b.clone()), (a2, b2));
        let mut all: Vec<usize> = a.into_iter().chain(b).collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn quantile_monotone_in_level(
            times in proptest::collection::vec(0.0f64..100.0, 1..40),
            q1 in 0.0f64..=1.0,
            q2 in 0.0f64..=1.0,
        ) {
            let events = vec![1u8; times.len()];
            let d = SurvivalDataset::from_times_events(&times, &events).unwrap();
            let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            let a = event_time_quantile(&d, lo).unwrap().t;
            let b = event_time_quantile(&d, hi).unwrap().t;
            prop_assert!(a <= b);
            // Definition check by brute force.
            let n = times.len() as f64;
            let frac = |t: f64| times.iter().filter(|&&s| s <= t).count() as f64 / n;
            prop_assert!(frac(a) >= lo);
            prop_assert!(times.iter().all(|&s| s >= a || frac(s) < lo));
        }
    }
}

//! Right-continuous piecewise-constant functions on `[0, ∞)`.
//!
//! Survival curves, cumulative incidence functions and baseline cumulative
//! hazards are all represented as a [`StepFunction`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    jump_times: Vec<f64>,
    values: Vec<f64>,
    initial_value: f64,
}

impl StepFunction {
    /// Builds a step function from `(time, value)` jumps.
    ///
    /// Jumps are sorted by time. Duplicate or negative jump times and
    /// non-finite times are rejected.
    pub fn new(initial_value: f64, jumps: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut jumps: Vec<(f64, f64)> = jumps.into_iter().collect();
        if jumps.iter().any(|&(t, _)| !t.is_finite() || t < 0.0) {
            return Err(Error::InvalidInput(
                "step function jump times must be finite and non-negative".into(),
            ));
        }
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        if jumps.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput(
                "step function jump times must be distinct".into(),
            ));
        }
        let (jump_times, values) = jumps.into_iter().unzip();
        Ok(Self {
            jump_times,
            values,
            initial_value,
        })
    }

    /// Construction from already strictly increasing times; used internally by
    /// the estimators, which produce sorted unique times by construction.
    pub(crate) fn from_sorted(initial_value: f64, jump_times: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(jump_times.len(), values.len());
        debug_assert!(jump_times.windows(2).all(|w| w[0] < w[1]));
        Self {
            jump_times,
            values,
            initial_value,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::from_sorted(value, Vec::new(), Vec::new())
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn initial_value(&self) -> f64 {
        self.initial_value
    }

    pub fn len(&self) -> usize {
        self.jump_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_times.is_empty()
    }

    /// Value attached to the largest jump time `<= t`.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&s| s <= t);
        if k == 0 {
            self.initial_value
        } else {
            self.values[k - 1]
        }
    }

    /// Left limit at `t`: value attached to the largest jump time `< t`.
    pub fn eval_left(&self, t: f64) -> f64 {
        let k = self.jump_times.partition_point(|&s| s < t);
        if k == 0 {
            self.initial_value
        } else {
            self.values[k - 1]
        }
    }

    /// Pointwise map over all values, keeping the jump times.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            jump_times: self.jump_times.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            initial_value: f(self.initial_value),
        }
    }

    pub fn last_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(self.initial_value)
    }
}

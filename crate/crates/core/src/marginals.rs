//! Rank-based empirical marginals.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Empirical CDF `F̂(x) = #{t: X_t <= x} / (T + 1)` with a piecewise-linear
/// inverse through the order statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMarginal {
    sorted_values: Vec<f64>,
}

impl EmpiricalMarginal {
    pub fn fit(x: &[f64]) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::Input(format!("empirical marginal needs at least 2 values, got {}", x.len())));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite value {} at index {i}", x[i])));
        }
        let mut sorted_values = x.to_vec();
        sorted_values.sort_by(f64::total_cmp);
        Ok(EmpiricalMarginal { sorted_values })
    }

    /// Checks the invariants of a deserialised marginal.
    pub fn validate(&self) -> Result<()> {
        if self.sorted_values.len() < 2 {
            return Err(Error::Input("empirical marginal needs at least 2 values".into()));
        }
        if self.sorted_values.iter().any(|v| !v.is_finite()) || self.sorted_values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Input("empirical marginal values must be finite and sorted".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.sorted_values.len()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted_values
    }

    /// Probability integral transform. Not clamped: a query below the sample
    /// minimum returns 0.
    pub fn pit(&self, x: f64) -> f64 {
        let count = self.sorted_values.partition_point(|&v| v <= x);
        count as f64 / (self.n() as f64 + 1.0)
    }

    /// Pseudo-observations of a whole series.
    pub fn pit_all(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.pit(v)).collect()
    }

    /// Linear interpolation through `(i / (n + 1), x_(i))`, clamped to the
    /// extreme order statistics.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.n();
        let s = &self.sorted_values;
        let mut pos = u * (n as f64 + 1.0);
        if (pos - pos.round()).abs() < 1e-9 {
            pos = pos.round();
        }
        if pos.is_nan() || pos <= 1.0 {
            return s[0];
        }
        if pos >= n as f64 {
            return s[n - 1];
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        if frac == 0.0 {
            return s[i - 1];
        }
        s[i - 1] + frac * (s[i] - s[i - 1])
    }
}

/// Fits a marginal per column and returns it with the column's pseudo-observations.
pub fn pseudo_observations(x: &[f64]) -> Result<(EmpiricalMarginal, Vec<f64>)> {
    let m = EmpiricalMarginal::fit(x)?;
    let u = m.pit_all(x);
    Ok((m, u))
}

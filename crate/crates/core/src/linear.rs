//! Linear bivariate Granger-causality test: OLS autoregressions compared by
//! the asymptotic chi-square statistic `S = T (RSS0 - RSS1) / RSS1`.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Largest lag tried by automatic selection.
pub const MAX_AUTO_LAG: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
}

/// Least squares via column-pivoted Householder QR.
///
/// `columns` holds the regressors; `names` labels them for error messages.
pub fn ols(columns: &[Vec<f64>], names: &[String], response: &[f64]) -> Result<OlsFit> {
    let n = response.len();
    let p = columns.len();
    if p == 0 {
        return Err(Error::Input("design has no columns".into()));
    }
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::Input("design columns and response differ in length".into()));
    }
    if n < p {
        return Err(Error::Input(format!("{n} rows cannot identify {p} coefficients")));
    }
    let a = DMatrix::from_fn(n, p, |i, j| columns[j][i]);
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let mut order = DMatrix::from_fn(1, p, |_, j| j as f64);
    qr.p().permute_columns(&mut order);
    let scale = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let tol = scale * f64::EPSILON * (n.max(p) as f64) * 10.0;
    for i in 0..p {
        if r[(i, i)].abs() <= tol {
            let col = order[(0, i)] as usize;
            let name = names.get(col).cloned().unwrap_or_else(|| format!("#{col}"));
            return Err(Error::Numerical(format!(
                "design is rank deficient: column {name} is collinear with the others"
            )));
        }
    }
    let mut qty = DVector::from_column_slice(response);
    qr.q_tr_mul(&mut qty);
    let top = qty.rows(0, p).into_owned();
    let mut z = r.solve_upper_triangular(&top).ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    qr.p().inv_permute_rows(&mut z);
    let fitted = &a * &z;
    let residuals: Vec<f64> = response.iter().zip(fitted.iter()).map(|(y, f)| y - f).collect();
    let rss = residuals.iter().map(|e| e * e).sum();
    Ok(OlsFit { coefficients: z.iter().copied().collect(), residuals, rss })
}

/// Lag order requested for the linear test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LagChoice {
    Fixed(usize),
    /// Minimum VAR AIC over `1..=MAX_AUTO_LAG`.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearGCResult {
    pub lag: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub rss0: f64,
    pub rss1: f64,
    /// Intercept, `x` lags 1..p, `y` lags 1..p.
    pub unrestricted_coefficients: Vec<f64>,
    /// Intercept, `x` lags 1..p.
    pub restricted_coefficients: Vec<f64>,
}

impl LinearGCResult {
    pub fn reject(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn check_series(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Input(format!("series lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Input("series contain non-finite values".into()));
    }
    Ok(())
}

/// Intercept plus lags `1..=p` of each series in `sources`, for targets
/// `start..len`.
fn lag_design(sources: &[(&str, &[f64])], p: usize, start: usize) -> (Vec<Vec<f64>>, Vec<String>) {
    let len = sources[0].1.len();
    let mut cols = vec![vec![1.0; len - start]];
    let mut names = vec!["intercept".to_string()];
    for (name, s) in sources {
        for j in 1..=p {
            cols.push((start..len).map(|t| s[t - j]).collect());
            names.push(format!("{name}[t-{j}]"));
        }
    }
    (cols, names)
}

/// Tests whether `y` Granger-causes `x` with `p` lags.
pub fn granger_linear(x: &[f64], y: &[f64], lag: LagChoice) -> Result<LinearGCResult> {
    check_series(x, y)?;
    let p = match lag {
        LagChoice::Fixed(0) => return Err(Error::Input("lag order must be positive".into())),
        LagChoice::Fixed(p) => p,
        LagChoice::Auto => select_var_lag(x, y, MAX_AUTO_LAG)?.0,
    };
    let t_len = x.len();
    if t_len <= 2 * p + 2 {
        return Err(Error::Input(format!("{t_len} observations are too few for {p} lags")));
    }
    let response = &x[p..];
    let (cu, nu) = lag_design(&[("x", x), ("y", y)], p, p);
    let (cr, nr) = lag_design(&[("x", x)], p, p);
    let unrestricted = ols(&cu, &nu, response)?;
    let restricted = ols(&cr, &nr, response)?;
    let (rss1, rss0) = (unrestricted.rss, restricted.rss);
    let statistic = if rss1 > 0.0 { (t_len as f64 * (rss0 - rss1) / rss1).max(0.0) } else { f64::INFINITY };
    Ok(LinearGCResult {
        lag: p,
        statistic,
        p_value: chi_square_sf(statistic, p),
        rss0,
        rss1,
        unrestricted_coefficients: unrestricted.coefficients,
        restricted_coefficients: restricted.coefficients,
    })
}

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
pub fn chi_square_sf(s: f64, df: usize) -> f64 {
    if s <= 0.0 {
        return 1.0;
    }
    if s.is_infinite() {
        return 0.0;
    }
    ChiSquared::new(df as f64).expect("positive degrees of freedom").sf(s)
}

/// AIC of a bivariate VAR(`p`) with intercepts fitted on targets
/// `start..T`: `ln det Σ̂ + 2 · n_params / T_eff`, `Σ̂` the ML residual covariance.
pub fn var_aic(x: &[f64], y: &[f64], p: usize, start: usize) -> Result<f64> {
    check_series(x, y)?;
    if p == 0 || start < p || start >= x.len() {
        return Err(Error::Input(format!("VAR({p}) cannot start at observation {start}")));
    }
    let (cols, names) = lag_design(&[("x", x), ("y", y)], p, start);
    let ex = ols(&cols, &names, &x[start..])?.residuals;
    let ey = ols(&cols, &names, &y[start..])?.residuals;
    let n = ex.len() as f64;
    let sxx = ex.iter().map(|e| e * e).sum::<f64>() / n;
    let syy = ey.iter().map(|e| e * e).sum::<f64>() / n;
    let sxy = ex.iter().zip(&ey).map(|(a, b)| a * b).sum::<f64>() / n;
    let det = sxx * syy - sxy * sxy;
    if det <= 0.0 {
        return Err(Error::Numerical("singular VAR residual covariance".into()));
    }
    let n_params = 2 * (2 * p + 1);
    Ok(det.ln() + 2.0 * n_params as f64 / n)
}

/// Minimum-AIC VAR lag in `1..=max_lag` on the common sample that drops the
/// first `max_lag` observations; ties go to the smaller lag. Returns the lag
/// with the AIC of every candidate.
pub fn select_var_lag(x: &[f64], y: &[f64], max_lag: usize) -> Result<(usize, Vec<f64>)> {
    check_series(x, y)?;
    let max_lag = max_lag.min(x.len().saturating_sub(3) / 5).max(1);
    let aics = (1..=max_lag).map(|p| var_aic(x, y, p, max_lag)).collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, a) in aics.iter().enumerate() {
        if *a < aics[best] {
            best = i;
        }
    }
    Ok((best + 1, aics))
}

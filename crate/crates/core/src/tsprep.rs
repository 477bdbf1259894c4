//! CSV ingestion, differencing and the Phillips-Perron unit-root check.

use crate::error::{Error, Result};
use crate::linear;
use serde::Serialize;
use std::path::Path;

/// A column picked by header name or 0-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl From<&str> for ColumnRef {
    /// Digits select by position, anything else by name.
    fn from(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub has_header: bool,
    /// Period labels; `None` numbers the rows.
    pub index_column: Option<ColumnRef>,
    /// Series to load; empty loads every column except the index.
    pub columns: Vec<ColumnRef>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions { has_header: true, index_column: Some(ColumnRef::Index(0)), columns: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesTable {
    pub names: Vec<String>,
    pub index: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    /// Rows skipped because a selected field was blank or not a number.
    pub dropped: usize,
}

impl SeriesTable {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::Input(format!("no column named {name:?}; available: {}", self.names.join(", "))))
    }
}

fn resolve(c: &ColumnRef, header: &[String]) -> Result<usize> {
    match c {
        ColumnRef::Index(i) if *i < header.len() => Ok(*i),
        ColumnRef::Index(i) => Err(Error::Input(format!("column {i} out of range ({} columns)", header.len()))),
        ColumnRef::Name(n) => header
            .iter()
            .position(|h| h == n)
            .ok_or_else(|| Error::Input(format!("no column named {n:?}; available: {}", header.join(", ")))),
    }
}

/// Reads selected numeric columns; rows with a blank or unparseable
/// selected field are dropped and counted.
pub fn load_csv(path: &Path, opts: &CsvOptions) -> Result<SeriesTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut records = Vec::new();
    for rec in reader.records() {
        records.push(rec.map_err(|e| Error::Io(format!("{}: {e}", path.display())))?);
    }
    let width = records.iter().map(|r| r.len()).max().unwrap_or(0);
    let header: Vec<String> = if opts.has_header {
        reader.headers().map_err(|e| Error::Io(e.to_string()))?.iter().map(str::to_string).collect()
    } else {
        (0..width).map(|i| format!("col{i}")).collect()
    };
    let index_col = opts.index_column.as_ref().map(|c| resolve(c, &header)).transpose()?;
    let selected: Vec<usize> = if opts.columns.is_empty() {
        (0..header.len()).filter(|&i| Some(i) != index_col).collect()
    } else {
        opts.columns.iter().map(|c| resolve(c, &header)).collect::<Result<_>>()?
    };
    if selected.is_empty() {
        return Err(Error::Input("no data columns selected".into()));
    }
    let mut table = SeriesTable {
        names: selected.iter().map(|&i| header[i].clone()).collect(),
        index: Vec::new(),
        columns: vec![Vec::new(); selected.len()],
        dropped: 0,
    };
    for (row, rec) in records.iter().enumerate() {
        let values: Option<Vec<f64>> = selected
            .iter()
            .map(|&i| rec.get(i).and_then(|f| f.parse::<f64>().ok()).filter(|v| v.is_finite()))
            .collect();
        match values {
            Some(vals) => {
                let label = match index_col {
                    Some(i) => rec.get(i).unwrap_or("").to_string(),
                    None => (row + 1).to_string(),
                };
                table.index.push(label);
                for (col, v) in table.columns.iter_mut().zip(vals) {
                    col.push(v);
                }
            }
            None => table.dropped += 1,
        }
    }
    if table.is_empty() {
        return Err(Error::Input(format!("{}: no complete numeric rows", path.display())));
    }
    if table.dropped > 0 {
        log::warn!("{}: dropped {} incomplete row(s)", path.display(), table.dropped);
    }
    Ok(table)
}

/// `s[t+1] - s[t]`.
pub fn first_difference(s: &[f64]) -> Result<Vec<f64>> {
    if s.len() < 2 {
        return Err(Error::Input(format!("differencing needs at least 2 values, got {}", s.len())));
    }
    Ok(s.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Inverse of [`first_difference`] given the first level.
pub fn cumulate(first: f64, diffs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(diffs.len() + 1);
    out.push(first);
    let mut level = first;
    for d in diffs {
        level += d;
        out.push(level);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PPResult {
    pub z_tau: f64,
    pub p_value: f64,
    pub bandwidth: usize,
}

const PP_SIZES: [f64; 6] = [25.0, 50.0, 100.0, 250.0, 500.0, 1e5];
const PP_PROBS: [f64; 8] = [0.01, 0.025, 0.05, 0.10, 0.90, 0.95, 0.975, 0.99];
/// Quantiles of `Z_tau` with intercept, one row per probability, one column per size.
#[allow(clippy::approx_constant)]
const PP_QUANTILES: [[f64; 6]; 8] = [
    [-3.75, -3.58, -3.51, -3.46, -3.44, -3.43],
    [-3.33, -3.22, -3.17, -3.14, -3.13, -3.12],
    [-3.00, -2.93, -2.89, -2.88, -2.87, -2.86],
    [-2.63, -2.60, -2.58, -2.57, -2.57, -2.57],
    [-0.37, -0.40, -0.42, -0.42, -0.43, -0.44],
    [0.00, -0.03, -0.05, -0.06, -0.07, -0.07],
    [0.34, 0.29, 0.26, 0.24, 0.24, 0.23],
    [0.72, 0.66, 0.63, 0.62, 0.61, 0.60],
];

/// Linear interpolation in increasing `xs`, constant beyond the ends.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let i = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[i - 1], xs[i]);
    ys[i - 1] + (x - x0) / (x1 - x0) * (ys[i] - ys[i - 1])
}

/// p-value of `Z_tau` for an effective sample of size `n`, clamped to [0.01, 0.99].
pub fn pp_p_value(z_tau: f64, n: usize) -> f64 {
    let crit: Vec<f64> = PP_QUANTILES.iter().map(|row| interpolate(&PP_SIZES, row, n as f64)).collect();
    interpolate(&crit, &PP_PROBS, z_tau)
}

/// Phillips-Perron `Z_tau` test with intercept and a Bartlett long-run
/// variance. `bandwidth = None` uses `⌊4 (n/100)^{1/4}⌋` with `n` the
/// regression sample size. Null hypothesis: unit root.
pub fn pp_test(s: &[f64], bandwidth: Option<usize>) -> Result<PPResult> {
    if s.len() < 20 {
        return Err(Error::Input(format!("Phillips-Perron test needs at least 20 values, got {}", s.len())));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("series contains non-finite values".into()));
    }
    if s.iter().all(|&v| v == s[0]) {
        return Err(Error::Input("series is constant".into()));
    }
    let y = &s[1..];
    let lag = &s[..s.len() - 1];
    let n = y.len();
    let names = vec!["intercept".to_string(), "lag".to_string()];
    let fit = linear::ols(&[vec![1.0; n], lag.to_vec()], &names, y)?;
    let rho = fit.coefficients[1];
    let u = &fit.residuals;
    let s2 = fit.rss / (n - 2) as f64;
    let mean_lag = lag.iter().sum::<f64>() / n as f64;
    let sxx: f64 = lag.iter().map(|v| (v - mean_lag).powi(2)).sum();
    let se = (s2 / sxx).sqrt();
    let t_rho = (rho - 1.0) / se;
    let l = bandwidth.unwrap_or_else(|| (4.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize);
    let gamma = |j: usize| u[j..].iter().zip(u).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let gamma0 = gamma(0);
    let lambda2 =
        gamma0 + 2.0 * (1..=l.min(n - 1)).map(|j| (1.0 - j as f64 / (l as f64 + 1.0)) * gamma(j)).sum::<f64>();
    if lambda2 <= 0.0 {
        return Err(Error::Numerical("non-positive long-run variance".into()));
    }
    let lambda = lambda2.sqrt();
    let z_tau = (gamma0 / lambda2).sqrt() * t_rho - (lambda2 - gamma0) / (2.0 * lambda) * (n as f64 * se / s2.sqrt());
    Ok(PPResult { z_tau, p_value: pp_p_value(z_tau, n), bandwidth: l })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;
    use rand_distr::StandardNormal;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_a_small_file() {
        let f = write_tmp("date,gdp\n2001,1.0\n2002,2.5\n2003,3.0\n");
        let t = load_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(t.names, vec!["gdp"]);
        assert_eq!(t.index, vec!["2001", "2002", "2003"]);
        assert_eq!(t.columns, vec![vec![1.0, 2.5, 3.0]]);
        assert_eq!(t.dropped, 0);
    }

    #[test]
    fn drops_unparseable_rows() {
        let f = write_tmp("d,v\na,1.0\nb,2.0\nc,x\nd,4.0\ne,\n");
        let t = load_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(t.column("v").unwrap(), &[1.0, 2.0, 4.0]);
        assert_eq!(t.dropped, 2);
    }

    #[test]
    fn headerless_selection_by_position() {
        let f = write_tmp("1,2,3\n4,5,6\n");
        let opts = CsvOptions { has_header: false, index_column: None, columns: vec![ColumnRef::Index(2), "0".into()] };
        let t = load_csv(f.path(), &opts).unwrap();
        assert_eq!(t.names, vec!["col2", "col0"]);
        assert_eq!(t.columns, vec![vec![3.0, 6.0], vec![1.0, 4.0]]);
        assert_eq!(t.index, vec!["1", "2"]);
    }

    #[test]
    fn load_errors() {
        assert!(matches!(load_csv(Path::new("/nonexistent/file.csv"), &CsvOptions::default()), Err(Error::Io(_))));
        let f = write_tmp("d,v\na,1\n");
        let opts = CsvOptions { columns: vec!["w".into()], ..Default::default() };
        let err = load_csv(f.path(), &opts).unwrap_err();
        assert!(err.to_string().contains("\"w\""));
        let f = write_tmp("d,v\na,x\n");
        assert!(matches!(load_csv(f.path(), &CsvOptions::default()), Err(Error::Input(_))));
    }

    #[test]
    fn differencing() {
        assert_eq!(first_difference(&[1.0, 3.0, 6.0]).unwrap(), vec![2.0, 3.0]);
        assert_eq!(first_difference(&[4.0; 5]).unwrap(), vec![0.0; 4]);
        assert!(first_difference(&[1.0]).is_err());
        let v = [0.5, -1.0, 2.0, 0.25];
        let levels = cumulate(10.0, &v);
        assert_eq!(first_difference(&levels).unwrap(), v);
        let s = [3.0, 1.0, 4.0, 1.0, 5.0];
        assert_eq!(cumulate(s[0], &first_difference(&s).unwrap()), s);
    }

    #[test]
    fn table_interpolation() {
        // exact table entries and clamping
        assert!((pp_p_value(-3.51, 100) - 0.01).abs() < 1e-12);
        assert!((pp_p_value(-2.89, 100) - 0.05).abs() < 1e-12);
        assert_eq!(pp_p_value(-10.0, 100), 0.01);
        assert_eq!(pp_p_value(5.0, 100), 0.99);
        // halfway between the 5% and 10% quantiles at T = 100
        assert!((pp_p_value(-2.735, 100) - 0.075).abs() < 1e-12);
    }

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = substream(seed, &[]);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn classification_rates() {
        let mut stationary = 0;
        let mut walk_kept = 0;
        let mut diff_rejected = 0;
        for seed in 0..100 {
            let e = noise(seed, 500);
            // the table clamps at 0.01, so "p < 0.01" shows up as the floor
            if pp_test(&e, None).unwrap().p_value <= 0.01 {
                stationary += 1;
            }
            let walk = cumulate(0.0, &e);
            // a unit root gives P(p > 0.10) = 0.90, so this bound is tight for any seed set
            if pp_test(&walk, None).unwrap().p_value > 0.10 {
                walk_kept += 1;
            }
            if pp_test(&first_difference(&walk).unwrap(), None).unwrap().p_value <= 0.01 {
                diff_rejected += 1;
            }
        }
        assert!(stationary >= 95, "{stationary}");
        assert!(walk_kept >= 90, "{walk_kept}");
        assert!(diff_rejected >= 95, "{diff_rejected}");
    }

    #[test]
    fn affine_invariance_and_errors() {
        let walk = cumulate(0.0, &noise(7, 200));
        let a = pp_test(&walk, None).unwrap();
        let scaled: Vec<f64> = walk.iter().map(|v| 250.0 * v - 3.0).collect();
        let b = pp_test(&scaled, None).unwrap();
        assert!((a.z_tau - b.z_tau).abs() < 1e-6);
        assert_eq!(a.bandwidth, 4);
        assert!(pp_test(&[1.0; 30], None).is_err());
        assert!(pp_test(&walk[..10], None).is_err());
    }
}

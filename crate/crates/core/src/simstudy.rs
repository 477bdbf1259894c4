//! Data-generating processes for size and power studies and the Monte Carlo
//! runner that tallies rejection rates and p-value moments.

use crate::error::{Error, Result};
use crate::gctest::{self, GCConfig, OrderChoice, Variant};
use crate::linear::{self, LagChoice};
use crate::rng::{derive_seed, substream};
use crate::stats;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::{Duration, Instant};

pub const DEFAULT_BURN_IN: usize = 200;

/// Assessment models. `S*` have no causality from `Y` to `X`, `P*` do;
/// the `K4` variants are fourth-order analogues with alternating-sign lag sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Dgp {
    S1,
    S2,
    S3,
    S4,
    S5,
    P1,
    P2,
    P3,
    P4,
    P5,
    S1K4,
    S2K4,
    S3K4,
    P1K4,
    P2K4,
    P3K4,
    P4K4,
}

impl Dgp {
    pub const ALL: [Dgp; 17] = [
        Dgp::S1,
        Dgp::S2,
        Dgp::S3,
        Dgp::S4,
        Dgp::S5,
        Dgp::P1,
        Dgp::P2,
        Dgp::P3,
        Dgp::P4,
        Dgp::P5,
        Dgp::S1K4,
        Dgp::S2K4,
        Dgp::S3K4,
        Dgp::P1K4,
        Dgp::P2K4,
        Dgp::P3K4,
        Dgp::P4K4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dgp::S1 => "S1",
            Dgp::S2 => "S2",
            Dgp::S3 => "S3",
            Dgp::S4 => "S4",
            Dgp::S5 => "S5",
            Dgp::P1 => "P1",
            Dgp::P2 => "P2",
            Dgp::P3 => "P3",
            Dgp::P4 => "P4",
            Dgp::P5 => "P5",
            Dgp::S1K4 => "S1k4",
            Dgp::S2K4 => "S2k4",
            Dgp::S3K4 => "S3k4",
            Dgp::P1K4 => "P1k4",
            Dgp::P2K4 => "P2k4",
            Dgp::P3K4 => "P3k4",
            Dgp::P4K4 => "P4k4",
        }
    }

    /// Markov order of the recursion.
    pub fn order(self) -> usize {
        if (self as usize) < 10 {
            1
        } else {
            4
        }
    }

    /// True for models without causality from `Y` to `X`.
    pub fn is_size_model(self) -> bool {
        self.name().starts_with('S')
    }

    fn id(self) -> u64 {
        self as u64
    }

    /// `(x_t, y_t)` from lags `x[t-1], x[t-2], ...` (index 0 is lag 1).
    fn step(self, x: &[f64; 4], y: &[f64; 4], eta: f64, eps: f64) -> (f64, f64) {
        let alt = |v: &[f64; 4], f: &dyn Fn(f64) -> f64| -> f64 {
            v.iter().enumerate().map(|(p, &s)| if p % 2 == 0 { f(s) } else { -f(s) }).sum()
        };
        let sum = |v: &[f64; 4], f: &dyn Fn(f64) -> f64| -> f64 { v.iter().map(|&s| f(s)).sum() };
        let id = |s: f64| s;
        let (x1, y1) = (x[0], y[0]);
        match self {
            Dgp::S1 => (0.5 * x1 + eta, 0.5 * y1 + eps),
            Dgp::S2 => (x1.abs().powf(0.8) + eta, 0.5 * y1 + eps),
            Dgp::S3 => (0.5 * x1 + eta, 0.5 * y1 + 0.5 * x1 * x1 + eps),
            Dgp::S4 => (0.5 * x1 * (-0.5 * x1 * x1).exp() + eta, 0.5 * y1 + eps),
            Dgp::S5 => (x1.sin() + eta, 0.5 * y1 + eps),
            Dgp::P1 => (0.5 * x1 + 0.5 * y1 + eta, 0.5 * y1 + eps),
            Dgp::P2 => (0.5 * x1 + 0.5 * y1 + 0.5 * (-2.0 * y1).sin() + eta, 0.5 * y1 + eps),
            Dgp::P3 => (0.5 * x1 + 0.5 * y1 * y1 + eta, 0.5 * y1 + eps),
            Dgp::P4 => (0.5 * x1 + 0.5 * y1.powi(4) + eta, 0.5 * y1.sin() + eps),
            Dgp::P5 => (0.65 * x1 + 0.2 * y1 * y1 + eta, -0.3 * y1 + eps),
            Dgp::S1K4 => (0.5 * alt(x, &id) + eta, 0.5 * alt(y, &id) + eps),
            Dgp::S2K4 => (alt(x, &|s: f64| s.abs().powf(0.8)) + eta, 0.5 * alt(y, &id) + eps),
            Dgp::S3K4 => (0.5 * alt(x, &id) + eta, 0.5 * alt(y, &id) + 0.5 * alt(x, &|s: f64| s * s) + eps),
            Dgp::P1K4 => (0.5 * alt(x, &id) + 0.5 * sum(y, &id) + eta, 0.5 * alt(y, &id) + eps),
            Dgp::P2K4 => (
                0.5 * alt(x, &id) + 0.5 * sum(y, &id) + 0.5 * sum(y, &|s: f64| (-2.0 * s).sin()) + eta,
                0.5 * alt(y, &id) + eps,
            ),
            Dgp::P3K4 => (0.5 * alt(x, &id) + 0.5 * sum(y, &|s: f64| s * s) + eta, 0.5 * alt(y, &id) + eps),
            Dgp::P4K4 => {
                (0.5 * alt(x, &id) + 0.5 * sum(y, &|s: f64| s.powi(4)) + eta, 0.5 * alt(y, &|s: f64| s.sin()) + eps)
            }
        }
    }
}

impl std::fmt::Display for Dgp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dgp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dgp::ALL.iter().copied().find(|d| d.name().eq_ignore_ascii_case(s)).ok_or_else(|| {
            let names: Vec<&str> = Dgp::ALL.iter().map(|d| d.name()).collect();
            Error::Input(format!("unknown model {s:?}; valid names: {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DgpSpec {
    pub model: Dgp,
    pub t_len: usize,
    pub burn_in: usize,
}

impl DgpSpec {
    pub fn new(model: Dgp, t_len: usize) -> Self {
        DgpSpec { model, t_len, burn_in: DEFAULT_BURN_IN }
    }
}

/// Runs the recursion from zero initial states and returns the `t_len`
/// points after the burn-in. The two innovation sequences come from
/// separate generators seeded off `rng`.
pub fn generate<R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let seed: u64 = rng.random();
    let mut eta_rng = substream(seed, &[0]);
    let mut eps_rng = substream(seed, &[1]);
    let total = spec.burn_in + spec.t_len;
    let mut xl = [0.0; 4];
    let mut yl = [0.0; 4];
    let mut x = Vec::with_capacity(spec.t_len);
    let mut y = Vec::with_capacity(spec.t_len);
    for t in 0..total {
        let eta: f64 = eta_rng.sample(StandardNormal);
        let eps: f64 = eps_rng.sample(StandardNormal);
        let (xn, yn) = spec.model.step(&xl, &yl, eta, eps);
        xl.rotate_right(1);
        yl.rotate_right(1);
        xl[0] = xn;
        yl[0] = yn;
        if t >= spec.burn_in {
            x.push(xn);
            y.push(yn);
        }
    }
    (x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    MVine,
    SplitSample,
    Linear,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::MVine, Method::SplitSample, Method::Linear];

    pub fn name(self) -> &'static str {
        match self {
            Method::MVine => "mvine",
            Method::SplitSample => "split",
            Method::Linear => "linear",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Input(format!("unknown method {s:?}; valid: mvine, split, linear")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyConfig {
    pub models: Vec<Dgp>,
    pub t_values: Vec<usize>,
    pub methods: Vec<Method>,
    /// Replicates per cell.
    pub replicates: usize,
    /// Settings for the vine tests; `k`, `seed` and `variant` are replaced
    /// per cell and replicate.
    pub gc: GCConfig,
    /// Order for both vine and linear tests; `None` uses the model's own order.
    pub order: Option<usize>,
    pub burn_in: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the ambient rayon pool.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            models: vec![Dgp::S1],
            t_values: vec![100],
            methods: vec![Method::MVine, Method::Linear],
            replicates: 100,
            gc: GCConfig { n: 100, b: 100, ..GCConfig::default() },
            order: None,
            burn_in: DEFAULT_BURN_IN,
            seed: 1,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub model: Dgp,
    pub t_len: usize,
    pub method: Method,
    pub rejection_rate: f64,
    pub mean_p: f64,
    pub sd_p: f64,
    pub n_completed: usize,
    pub n_requested: usize,
    /// Completion below 95 %.
    pub flagged: bool,
    #[serde(skip)]
    pub wall_time: Duration,
    /// Per-replicate p-values in replicate order; `None` for failures.
    pub p_values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub alpha: f64,
    pub seed: u64,
    pub cells: Vec<CellReport>,
}

impl MonteCarloReport {
    pub fn cell(&self, model: Dgp, t_len: usize, method: Method) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.model == model && c.t_len == t_len && c.method == method)
    }

    /// Aligned text table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<6} {:>5} {:<7} {:>9} {:>8} {:>8} {:>9}",
            "model", "T", "method", "rej_rate", "mean_p", "sd_p", "S"
        );
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{:<6} {:>5} {:<7} {:>9.3} {:>8.3} {:>8.3} {:>4}/{:<4}{}",
                c.model.name(),
                c.t_len,
                c.method.name(),
                c.rejection_rate,
                c.mean_p,
                c.sd_p,
                c.n_completed,
                c.n_requested,
                if c.flagged { " !" } else { "" }
            );
        }
        let _ = writeln!(out, "alpha = {}, seed = {}", self.alpha, self.seed);
        out
    }

    /// Comma-delimited rows with a header.
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("model,T,method,rejection_rate,mean_p,sd_p,S,seed\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                c.model.name(),
                c.t_len,
                c.method.name(),
                c.rejection_rate,
                c.mean_p,
                c.sd_p,
                c.n_completed,
                self.seed
            );
        }
        out
    }

    /// Completed p-values of one cell, one per line.
    pub fn p_value_dump(&self, cell: &CellReport) -> String {
        cell.p_values.iter().flatten().map(|p| format!("{p}\n")).collect()
    }
}

/// Dataset `r` of a cell; the same for every method.
pub fn replicate_data(cfg: &StudyConfig, model: Dgp, t_len: usize, r: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = substream(cfg.seed, &[0, model.id(), t_len as u64, r as u64]);
    generate(&DgpSpec { model, t_len, burn_in: cfg.burn_in }, &mut rng)
}

/// p-value of `method` on dataset `r` of a cell.
pub fn replicate_p_value(cfg: &StudyConfig, model: Dgp, t_len: usize, method: Method, r: usize) -> Result<f64> {
    let (x, y) = replicate_data(cfg, model, t_len, r);
    let k = cfg.order.unwrap_or(model.order());
    let gc_with = |variant| GCConfig {
        k: OrderChoice::Fixed(k),
        seed: derive_seed(cfg.seed, &[1, model.id(), t_len as u64, r as u64]),
        variant,
        workers: None,
        ..cfg.gc.clone()
    };
    match method {
        Method::MVine => Ok(gctest::mvine_test(&x, &y, &gc_with(Variant::FullSample))?.p_value),
        Method::SplitSample => Ok(gctest::mvine_test(&x, &y, &gc_with(Variant::SplitSample))?.p_value),
        Method::Linear => Ok(linear::granger_linear(&x, &y, LagChoice::Fixed(k))?.p_value),
    }
}

fn summarise(
    model: Dgp,
    t_len: usize,
    method: Method,
    alpha: f64,
    p_values: Vec<Option<f64>>,
    wall_time: Duration,
) -> CellReport {
    let done: Vec<f64> = p_values.iter().flatten().copied().collect();
    let n = done.len();
    let rejected = done.iter().filter(|&&p| p < alpha).count();
    CellReport {
        model,
        t_len,
        method,
        rejection_rate: if n > 0 { rejected as f64 / n as f64 } else { f64::NAN },
        mean_p: stats::mean(&done),
        sd_p: stats::std_dev(&done),
        n_completed: n,
        n_requested: p_values.len(),
        flagged: (n as f64) < 0.95 * p_values.len() as f64,
        wall_time,
        p_values,
    }
}

/// Runs every (model, T, method) cell. Replicates run in parallel and are
/// reduced in index order.
pub fn run_study(cfg: &StudyConfig) -> Result<MonteCarloReport> {
    if cfg.replicates == 0 {
        return Err(Error::Input("the number of replicates S must be at least 1".into()));
    }
    if cfg.models.is_empty() || cfg.t_values.is_empty() || cfg.methods.is_empty() {
        return Err(Error::Input("models, T values and methods must be non-empty".into()));
    }
    cfg.gc.validate()?;
    let run = || {
        let mut cells = Vec::new();
        for &model in &cfg.models {
            for &t_len in &cfg.t_values {
                for &method in &cfg.methods {
                    let start = Instant::now();
                    let p_values: Vec<Option<f64>> = (0..cfg.replicates)
                        .into_par_iter()
                        .map(|r| match replicate_p_value(cfg, model, t_len, method, r) {
                            Ok(p) => Some(p),
                            Err(e) => {
                                log::warn!("{model} T={t_len} {} replicate {r} failed: {e}", method.name());
                                None
                            }
                        })
                        .collect();
                    let elapsed = start.elapsed();
                    log::info!("{model} T={t_len} {} done in {:.1}s", method.name(), elapsed.as_secs_f64());
                    cells.push(summarise(model, t_len, method, cfg.gc.alpha, p_values, elapsed));
                }
            }
        }
        cells
    };
    let cells = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {w} workers: {e}")))?
            .install(run),
        None => run(),
    };
    Ok(MonteCarloReport { alpha: cfg.gc.alpha, seed: cfg.seed, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s1_moments() {
        let mut rng = substream(1, &[]);
        let (x, y) = generate(&DgpSpec::new(Dgp::S1, 100_000), &mut rng);
        assert!((stats::autocorrelation(&x, 1) - 0.5).abs() < 0.01);
        assert!(stats::cross_correlation(&x, &y, 1).abs() < 0.01);
    }

    #[test]
    fn p1_coefficients() {
        let mut rng = substream(2, &[]);
        let (x, y) = generate(&DgpSpec::new(Dgp::P1, 100_000), &mut rng);
        let cols = vec![vec![1.0; x.len() - 1], x[..x.len() - 1].to_vec(), y[..y.len() - 1].to_vec()];
        let names: Vec<String> = ["c", "x", "y"].iter().map(|s| s.to_string()).collect();
        let fit = linear::ols(&cols, &names, &x[1..]).unwrap();
        assert!((fit.coefficients[1] - 0.5).abs() < 0.02);
        assert!((fit.coefficients[2] - 0.5).abs() < 0.02);
    }

    #[test]
    fn generation_is_deterministic_and_finite() {
        for model in Dgp::ALL {
            let spec = DgpSpec::new(model, 300);
            let a = generate(&spec, &mut substream(3, &[]));
            let b = generate(&spec, &mut substream(3, &[]));
            assert_eq!(a, b);
            assert_eq!(a.0.len(), 300);
            assert!(a.0.iter().chain(&a.1).all(|v| v.is_finite()), "{model}");
        }
    }

    #[test]
    fn names_round_trip() {
        for model in Dgp::ALL {
            assert_eq!(model.name().parse::<Dgp>().unwrap(), model);
        }
        assert_eq!(Dgp::P4K4.order(), 4);
        assert_eq!(Dgp::P5.order(), 1);
        assert!(Dgp::S3K4.is_size_model());
        let err = "Q7".parse::<Dgp>().unwrap_err().to_string();
        assert!(err.contains("S1") && err.contains("P4k4"));
    }

    #[test]
    fn k4_recursion_uses_alternating_signs() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [0.0; 4];
        let (xn, yn) = Dgp::S1K4.step(&x, &y, 0.0, 0.0);
        assert_eq!(xn, 0.5 * (1.0 - 2.0 + 3.0 - 4.0));
        assert_eq!(yn, 0.0);
        let (xn, _) = Dgp::P1K4.step(&[0.0; 4], &x, 0.0, 0.0);
        assert_eq!(xn, 0.5 * 10.0);
    }

    #[test]
    fn zero_replicates_rejected() {
        let cfg = StudyConfig { replicates: 0, ..Default::default() };
        assert!(matches!(run_study(&cfg), Err(Error::Input(_))));
    }

    #[test]
    fn linear_study_is_reproducible() {
        let cfg = StudyConfig {
            models: vec![Dgp::S1, Dgp::P1],
            methods: vec![Method::Linear],
            replicates: 40,
            ..Default::default()
        };
        let a = run_study(&cfg).unwrap();
        let b = run_study(&StudyConfig { workers: Some(2), ..cfg.clone() }).unwrap();
        assert_eq!(a.to_delimited(), b.to_delimited());
        assert_eq!(a.to_table(), b.to_table());
        assert_eq!(a.cells.len(), 2);
        let p1 = a.cell(Dgp::P1, 100, Method::Linear).unwrap();
        assert!(p1.rejection_rate > 0.9);
        assert_eq!(a.p_value_dump(p1).lines().count(), 40);
        assert!(a.to_delimited().starts_with("model,T,method,rejection_rate,mean_p,sd_p,S,seed\n"));
    }
}

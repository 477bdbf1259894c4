//! M-vine Granger-causality-in-the-mean test.
//!
//! Part A estimates `log(Σ (x_t - E[x_t | x past])² / Σ (x_t - E[x_t | (x, y) past])²)`
//! with conditional means approximated by `N` vine draws per time point.
//! Part B simulates `B` paths with no causality from the fitted first-tree
//! copulas, refits both models on each and recomputes the statistic; the
//! p-value is the fraction of null statistics at or above the observed one.

use crate::copula::CopulaFamily;
use crate::error::{Error, Result};
use crate::mvine::{self, MVineModel};
use crate::rng::substream;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderChoice {
    Fixed(usize),
    /// AIC-best order of the bivariate model in `1..=k_max`.
    Auto {
        k_max: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Fit on the whole sample, score from `t0`.
    FullSample,
    /// Fit on the first `⌈T/2⌉` observations, score on the rest.
    SplitSample,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::FullSample => "full",
            Variant::SplitSample => "split",
        }
    }

    /// Half-open fit window for a series of length `t_len`.
    pub fn fit_window(self, t_len: usize) -> (usize, usize) {
        match self {
            Variant::FullSample => (0, t_len),
            Variant::SplitSample => (0, t_len.div_ceil(2)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GCConfig {
    pub k: OrderChoice,
    /// First scored time point, 1-based; `None` means `⌈T/2⌉`.
    pub t0: Option<usize>,
    /// Conditional draws per time point.
    pub n: usize,
    /// Bootstrap replicates.
    pub b: usize,
    pub alpha: f64,
    pub candidates: Vec<CopulaFamily>,
    pub seed: u64,
    pub variant: Variant,
    /// Worker threads for the bootstrap; `None` uses the ambient rayon pool.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for GCConfig {
    fn default() -> Self {
        GCConfig {
            k: OrderChoice::Fixed(1),
            t0: None,
            n: 200,
            b: 200,
            alpha: 0.05,
            candidates: CopulaFamily::ALL.to_vec(),
            seed: 1,
            variant: Variant::FullSample,
            workers: None,
        }
    }
}

impl GCConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.b == 0 {
            return Err(Error::Config("N and B must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.candidates.is_empty() {
            return Err(Error::Config("empty candidate family set".into()));
        }
        match self.k {
            OrderChoice::Fixed(0) | OrderChoice::Auto { k_max: 0 } => {
                Err(Error::Config("Markov order must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Resolved first scored time point (1-based) for a series of length `t_len`.
    pub fn t0_for(&self, t_len: usize) -> usize {
        self.t0.unwrap_or(t_len.div_ceil(2))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSummary {
    pub class: String,
    pub copula: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub d: usize,
    pub k: usize,
    pub loglik: Option<f64>,
    pub aic: Option<f64>,
    pub n_params: usize,
    pub fit_window: (usize, usize),
    pub classes: Vec<ClassSummary>,
}

impl ModelSummary {
    pub fn of(model: &MVineModel) -> Self {
        let classes = model
            .structure()
            .classes()
            .iter()
            .zip(model.copulas())
            .map(|(c, cop)| ClassSummary { class: c.label(), copula: cop.to_string() })
            .collect();
        ModelSummary {
            d: model.d(),
            k: model.k(),
            loglik: model.loglik(),
            aic: model.aic(),
            n_params: model.n_params(),
            fit_window: model.fit_window(),
            classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GCTestResult {
    pub statistic: f64,
    /// Completed null statistics, in replicate order.
    pub null_stats: Vec<f64>,
    pub p_value: f64,
    pub reject: bool,
    pub k_used: usize,
    pub t0: usize,
    /// First scored time point actually used (1-based).
    pub score_from: usize,
    pub b_requested: usize,
    /// Replicates that failed twice and were dropped.
    pub missing_replicates: Vec<usize>,
    pub model_x: ModelSummary,
    pub model_xy: ModelSummary,
    pub config: GCConfig,
}

impl GCTestResult {
    pub fn b_effective(&self) -> usize {
        self.null_stats.len()
    }

    /// True when some bootstrap replicates were lost.
    pub fn incomplete(&self) -> bool {
        !self.missing_replicates.is_empty()
    }
}

/// `(1/B) #{j : null_j >= statistic}`.
pub fn p_value(statistic: f64, null_stats: &[f64]) -> f64 {
    let hits = null_stats.iter().filter(|&&s| s >= statistic).count();
    hits as f64 / null_stats.len() as f64
}

/// The GC-in-the-mean estimator scored over 1-based time points `t0..=T`.
pub fn gc_statistic<R: Rng + ?Sized>(
    x: &[f64],
    y: &[f64],
    model_x: &MVineModel,
    model_xy: &MVineModel,
    t0: usize,
    n: usize,
    rng: &mut R,
) -> Result<f64> {
    let k = model_xy.k();
    if model_x.k() != k || model_x.d() != 1 || model_xy.d() != 2 {
        return Err(Error::Config("expects a univariate and a bivariate model of the same order".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Input(format!("series lengths differ: {} vs {}", x.len(), y.len())));
    }
    let t_len = x.len();
    if t0 < k + 1 {
        return Err(Error::Config(format!("T0 = {t0} must be at least k + 1 = {}", k + 1)));
    }
    if t0 > t_len {
        return Err(Error::Config(format!("T0 = {t0} exceeds the series length {t_len}")));
    }
    if n == 0 {
        return Err(Error::Config("N must be at least 1".into()));
    }
    let mut restricted = 0.0;
    let mut unrestricted = 0.0;
    for i in t0 - 1..t_len {
        let hx = &x[i - k..i];
        let hy = &y[i - k..i];
        let mean_x = mean_of(&model_x.simulate_conditional(&[hx], n, rng)?);
        let mean_xy = mean_of(&model_xy.simulate_conditional(&[hx, hy], n, rng)?);
        restricted += (x[i] - mean_x).powi(2);
        unrestricted += (x[i] - mean_xy).powi(2);
    }
    Ok((restricted / unrestricted).ln())
}

fn mean_of(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fit_pair(
    x: &[f64],
    y: &[f64],
    k: usize,
    cfg: &GCConfig,
    window: (usize, usize),
) -> Result<(MVineModel, MVineModel)> {
    let model_x = mvine::fit_window(&[x], k, &cfg.candidates, window.0, window.1)?;
    let model_xy = mvine::fit_window(&[x, y], k, &cfg.candidates, window.0, window.1)?;
    Ok((model_x, model_xy))
}

fn score_from(cfg: &GCConfig, t_len: usize) -> usize {
    let (_, fit_end) = cfg.variant.fit_window(t_len);
    match cfg.variant {
        Variant::FullSample => cfg.t0_for(t_len),
        Variant::SplitSample => cfg.t0_for(t_len).max(fit_end + 1),
    }
}

fn replicate(model_xy: &MVineModel, t_len: usize, k: usize, cfg: &GCConfig, j: usize, attempt: u64) -> Result<f64> {
    let mut rng = substream(cfg.seed, &[1, j as u64, attempt]);
    let (x0, y0) = model_xy.simulate_null_path(t_len, &mut rng)?;
    let (mx, mxy) = fit_pair(&x0, &y0, k, cfg, cfg.variant.fit_window(t_len))?;
    gc_statistic(&x0, &y0, &mx, &mxy, score_from(cfg, t_len), cfg.n, &mut rng)
}

/// Null statistics from `cfg.b` paths simulated under `model_xy`'s first
/// tree; each path is refitted with order `k`. A replicate that fails is
/// retried once on a fresh sub-stream and otherwise reported as `None`.
pub fn null_distribution(model_xy: &MVineModel, t_len: usize, k: usize, cfg: &GCConfig) -> Result<Vec<Option<f64>>> {
    cfg.validate()?;
    model_xy.first_tree_copulas()?;
    let run = || {
        (0..cfg.b)
            .into_par_iter()
            .map(|j| match replicate(model_xy, t_len, k, cfg, j, 0) {
                Ok(s) => Some(s),
                Err(e) => {
                    log::warn!("bootstrap replicate {j} failed ({e}); retrying");
                    replicate(model_xy, t_len, k, cfg, j, 1)
                        .map_err(|e| log::warn!("bootstrap replicate {j} dropped: {e}"))
                        .ok()
                }
            })
            .collect::<Vec<_>>()
    };
    match cfg.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {w} workers: {e}")))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}

fn check_inputs(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Input(format!("series lengths differ: {} vs {}", x.len(), y.len())));
    }
    for (name, s) in [("x", x), ("y", y)] {
        if let Some(i) = s.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("{name} has a non-finite value at index {i}")));
        }
        if s.iter().all(|&v| v == s[0]) {
            return Err(Error::Input(format!("{name} is constant")));
        }
    }
    Ok(())
}

/// Tests whether `y` Granger-causes `x` in the mean.
pub fn mvine_test(x: &[f64], y: &[f64], cfg: &GCConfig) -> Result<GCTestResult> {
    cfg.validate()?;
    check_inputs(x, y)?;
    let t_len = x.len();
    let window = cfg.variant.fit_window(t_len);
    let span = window.1 - window.0;
    let (k, model_xy) = match cfg.k {
        OrderChoice::Fixed(k) => {
            if t_len < 20 * k {
                return Err(Error::Input(format!("order {k} needs at least {} observations, got {t_len}", 20 * k)));
            }
            (k, mvine::fit_window(&[x, y], k, &cfg.candidates, window.0, window.1)?)
        }
        OrderChoice::Auto { k_max } => {
            // largest order the fit window supports
            let cap = k_max.min(t_len / 20).min((span / 10).saturating_sub(1));
            if cap == 0 {
                return Err(Error::Input(format!("{t_len} observations are too few for any Markov order")));
            }
            let cols: Vec<&[f64]> = vec![&x[window.0..window.1], &y[window.0..window.1]];
            // windows start at 0, so the recorded fit window is unchanged
            let (k, mut models) = mvine::select_order(&cols, cap, &cfg.candidates)?;
            (k, models.swap_remove(k - 1))
        }
    };
    let model_x = mvine::fit_window(&[x], k, &cfg.candidates, window.0, window.1)?;
    let t0 = cfg.t0_for(t_len);
    let from = score_from(cfg, t_len);
    let mut rng = substream(cfg.seed, &[0]);
    let statistic = gc_statistic(x, y, &model_x, &model_xy, from, cfg.n, &mut rng)?;
    let null = null_distribution(&model_xy, t_len, k, cfg)?;
    let missing_replicates: Vec<usize> = null.iter().enumerate().filter(|(_, s)| s.is_none()).map(|(j, _)| j).collect();
    let null_stats: Vec<f64> = null.into_iter().flatten().collect();
    if null_stats.is_empty() {
        return Err(Error::Numerical("every bootstrap replicate failed".into()));
    }
    if !missing_replicates.is_empty() {
        log::warn!("{} of {} bootstrap replicates missing", missing_replicates.len(), cfg.b);
    }
    let p = p_value(statistic, &null_stats);
    Ok(GCTestResult {
        statistic,
        null_stats,
        p_value: p,
        reject: p < cfg.alpha,
        k_used: k,
        t0,
        score_from: from,
        b_requested: cfg.b,
        missing_replicates,
        model_x: ModelSummary::of(&model_x),
        model_xy: ModelSummary::of(&model_xy),
        config: cfg.clone(),
    })
}

//! M-vine copula models for stationary k-Markov series of dimension 1 or 2.
//!
//! Column 0 of the data is the spine series `X` (the one being predicted);
//! column 1, when present, is `Y`.

mod structure;

pub use structure::{EdgeClass, EdgeKind, MVineStructure, Node, Row};

use crate::copula::{select_family, CopulaFamily, PairCopula, PairSample};
use crate::error::{Error, Result};
use crate::marginals::EmpiricalMarginal;
use rand::Rng;
use serde::{Deserialize, Serialize};
use structure::kind_at;

/// Version tag written into serialised models.
pub const MODEL_FORMAT_VERSION: u32 = 1;
const MODEL_FORMAT_NAME: &str = "vinegc-mvine";

/// A fitted (or hand-assembled) translation-invariant M-vine.
#[derive(Debug, Clone, PartialEq)]
pub struct MVineModel {
    structure: MVineStructure,
    marginals: Vec<EmpiricalMarginal>,
    copulas: Vec<PairCopula>,
    converged: Vec<bool>,
    loglik: Option<f64>,
    fit_window: (usize, usize),
}

static INDEPENDENCE: std::sync::LazyLock<PairCopula> = std::sync::LazyLock::new(PairCopula::independence);

impl MVineModel {
    /// Assembles a model from known parts; `copulas` follows
    /// [`MVineStructure::classes`].
    pub fn from_parts(d: usize, k: usize, marginals: Vec<EmpiricalMarginal>, copulas: Vec<PairCopula>) -> Result<Self> {
        let structure = MVineStructure::new(d, k)?;
        if marginals.len() != d {
            return Err(Error::Input(format!("expected {d} marginal(s), got {}", marginals.len())));
        }
        if copulas.len() != structure.classes().len() {
            return Err(Error::Input(format!(
                "expected {} class copulas for d={d}, k={k}, got {}",
                structure.classes().len(),
                copulas.len()
            )));
        }
        for c in &copulas {
            c.validate()?;
        }
        let n = marginals[0].n();
        let converged = vec![true; copulas.len()];
        Ok(MVineModel { structure, marginals, copulas, converged, loglik: None, fit_window: (0, n) })
    }

    pub fn structure(&self) -> &MVineStructure {
        &self.structure
    }

    pub fn d(&self) -> usize {
        self.structure.d()
    }

    pub fn k(&self) -> usize {
        self.structure.k()
    }

    pub fn marginals(&self) -> &[EmpiricalMarginal] {
        &self.marginals
    }

    /// Class copulas, aligned with `structure().classes()`.
    pub fn copulas(&self) -> &[PairCopula] {
        &self.copulas
    }

    /// Per-class optimiser convergence flags.
    pub fn converged(&self) -> &[bool] {
        &self.converged
    }

    /// Log-likelihood on the fitting sample; `None` for assembled models.
    pub fn loglik(&self) -> Option<f64> {
        self.loglik
    }

    pub fn n_params(&self) -> usize {
        self.copulas.iter().map(|c| c.n_params()).sum()
    }

    /// AIC on the fitting sample.
    pub fn aic(&self) -> Option<f64> {
        self.loglik.map(|ll| -2.0 * ll + 2.0 * self.n_params() as f64)
    }

    /// Half-open range of observation indices used for fitting.
    pub fn fit_window(&self) -> (usize, usize) {
        self.fit_window
    }

    fn copula_for(&self, kind: EdgeKind, m: usize) -> &PairCopula {
        match self.structure.class_index(kind, m) {
            Some(i) => &self.copulas[i],
            None => &INDEPENDENCE,
        }
    }

    /// Tree-1 (serial, cross) copulas: `c_{X_t,X_{t+1}}` and `c_{X_t,Y_t}`.
    pub fn first_tree_copulas(&self) -> Result<(&PairCopula, &PairCopula)> {
        if self.d() != 2 {
            return Err(Error::Capability("first-tree cross copula needs a bivariate model".into()));
        }
        Ok((self.copula_for(EdgeKind::Serial, 1), self.copula_for(EdgeKind::Cross, 1)))
    }

    fn pit_columns(&self, data: &[&[f64]]) -> Vec<Vec<f64>> {
        data.iter().zip(&self.marginals).map(|(col, m)| m.pit_all(col)).collect()
    }

    /// h-values of every window at level `m`, for use as left and right
    /// child of the next level. `offset` is the time-order index of the first
    /// first-tree edge in `a`/`b`.
    fn child_values(&self, offset: usize, m: usize, a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.d();
        let mut left = Vec::with_capacity(a.len());
        let mut right = Vec::with_capacity(a.len());
        for i in 0..a.len() {
            let kind = kind_at(d, offset + i);
            let c = self.copula_for(kind, m);
            // as a left child the window contributes its first argument,
            // except a cross edge whose private node is Y (its second)
            let l = if m == 1 && kind == EdgeKind::Cross { c.h1(a[i], b[i]) } else { c.h2(a[i], b[i]) };
            left.push(l);
            right.push(c.h1(a[i], b[i]));
        }
        (left, right)
    }

    /// Log-likelihood and AIC of `data` (columns in model order) under the
    /// model, using the model's marginals for the probability transform.
    pub fn loglik_aic(&self, data: &[&[f64]]) -> Result<(f64, f64)> {
        check_columns(data, self.d())?;
        let u = self.pit_columns(data);
        let (mut a, mut b) = first_tree_pairs(self.d(), &u);
        let mut ll = 0.0;
        let top = self.structure.max_level();
        for m in 1..=top {
            for i in 0..a.len() {
                if let Some(ci) = self.structure.class_index(self.structure.kind_at(i), m) {
                    let c = &self.copulas[ci];
                    if !c.is_independence() {
                        ll += c.ln_pdf(a[i], b[i]);
                    }
                }
            }
            if m == top || a.len() < 2 {
                break;
            }
            let (l, r) = self.child_values(0, m, &a, &b);
            a = l[..l.len() - 1].to_vec();
            b = r[1..].to_vec();
        }
        Ok((ll, -2.0 * ll + 2.0 * self.n_params() as f64))
    }

    /// Copulas and conditioning values of the inverse-Rosenblatt chain for
    /// the second node of the first-tree edge that follows `a`/`b`.
    ///
    /// `a`/`b` hold the first-tree pairs of the edges preceding it, the first
    /// at time-order index `offset`; `first_node` is the pseudo-observation
    /// of the new edge's known node.
    fn cascade_for_next(&self, offset: usize, a: &[f64], b: &[f64], first_node: f64) -> Vec<(&PairCopula, f64)> {
        let d = self.d();
        let e = a.len();
        let mut steps = Vec::new();
        let mut la = a.to_vec();
        let mut lb = b.to_vec();
        for m in 1..=e + 1 {
            let j = e + 1 - m;
            let kind = kind_at(d, offset + j);
            if self.structure.class_index(kind, m).is_none() {
                break;
            }
            let cond = if m == 1 {
                first_node
            } else {
                // left h-value of window (j, m - 1) at level m - 1
                let (l, r) = self.child_values(offset, m - 1, &la, &lb);
                let cond = l[j];
                la = l[..l.len() - 1].to_vec();
                lb = r[1..].to_vec();
                cond
            };
            steps.push((self.copula_for(kind, m), cond));
        }
        steps
    }

    /// `n` draws of `X_t` (data units) given the last `k` observations of
    /// every column in `history`.
    pub fn simulate_conditional<R: Rng + ?Sized>(&self, history: &[&[f64]], n: usize, rng: &mut R) -> Result<Vec<f64>> {
        let mut ws = self.conditional_uniforms(history, n, rng)?;
        let mx = &self.marginals[0];
        for w in ws.iter_mut() {
            *w = mx.quantile(*w);
        }
        Ok(ws)
    }

    /// As [`simulate_conditional`](Self::simulate_conditional) but on the
    /// copula scale.
    pub fn conditional_uniforms<R: Rng + ?Sized>(&self, history: &[&[f64]], n: usize, rng: &mut R) -> Result<Vec<f64>> {
        let k = self.k();
        check_columns(history, self.d())?;
        if history[0].len() < k {
            return Err(Error::Input(format!("history needs {k} observations, got {}", history[0].len())));
        }
        let recent: Vec<&[f64]> = history.iter().map(|c| &c[c.len() - k..]).collect();
        if recent.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::Input("history contains non-finite values".into()));
        }
        let u = self.pit_columns(&recent);
        let (a, b) = first_tree_pairs(self.d(), &u);
        let steps = self.cascade_for_next(0, &a, &b, u[0][k - 1]);
        let mut ws: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        for (c, cond) in steps.iter().rev() {
            c.hinv1_batch(*cond, &mut ws)?;
        }
        Ok(ws)
    }

    /// Null-hypothesis path: `X` is a first-order Markov chain driven by the
    /// serial copula, and each `Y_t` is drawn from the cross copula given `X_t`
    /// only. Returned in data units.
    pub fn simulate_null_path<R: Rng + ?Sized>(&self, t_len: usize, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
        let (serial, cross) = self.first_tree_copulas()?;
        let mut x = Vec::with_capacity(t_len);
        let mut y = Vec::with_capacity(t_len);
        let mut u = crate::copula::clamp_unit(rng.random::<f64>());
        for t in 0..t_len {
            if t > 0 {
                u = serial.hinv1(rng.random::<f64>(), u)?;
            }
            let v = cross.hinv1(rng.random::<f64>(), u)?;
            x.push(self.marginals[0].quantile(u));
            y.push(self.marginals[1].quantile(v));
        }
        Ok((x, y))
    }

    /// Draws a path of length `t_len` from the full vine on the copula scale
    /// (uniform marginals), one column per row.
    pub fn simulate_copula_path<R: Rng + ?Sized>(&self, t_len: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let d = self.d();
        let mut u: Vec<Vec<f64>> = vec![Vec::with_capacity(t_len); d];
        let reach = self.structure.max_level() - 1;
        let draw_next = |u: &[Vec<f64>], g: usize, first_node: f64, rng: &mut R| -> Result<f64> {
            let s = g.saturating_sub(reach);
            let (a, b): (Vec<f64>, Vec<f64>) = (s..g).map(|i| edge_pair(d, u, i)).unzip();
            let steps = self.cascade_for_next(s, &a, &b, first_node);
            let mut w = [rng.random::<f64>()];
            for (c, cond) in steps.iter().rev() {
                c.hinv1_batch(*cond, &mut w)?;
            }
            Ok(w[0])
        };
        for t in 0..t_len {
            if t == 0 {
                u[0].push(crate::copula::clamp_unit(rng.random::<f64>()));
            } else {
                // serial edge S_{t-1} carries the new X_t
                let g = if d == 2 { 2 * t - 1 } else { t - 1 };
                let first = u[0][t - 1];
                let x = draw_next(&u, g, first, rng)?;
                u[0].push(x);
            }
            if d == 2 {
                let first = u[0][t];
                let y = draw_next(&u, 2 * t, first, rng)?;
                u[1].push(y);
            }
        }
        Ok(u)
    }

    pub fn to_json(&self) -> Result<String> {
        let classes = self
            .structure
            .classes()
            .iter()
            .zip(&self.copulas)
            .zip(&self.converged)
            .map(|((c, cop), &ok)| ClassRecord {
                class: c.label(),
                tree_level: c.tree_level,
                start: c.start,
                copula: cop.clone(),
                converged: ok,
            })
            .collect();
        let file = ModelFile {
            format: MODEL_FORMAT_NAME.into(),
            version: MODEL_FORMAT_VERSION,
            d: self.d(),
            k: self.k(),
            fit_window: [self.fit_window.0, self.fit_window.1],
            loglik: self.loglik,
            n_params: self.n_params(),
            classes,
            marginals: self.marginals.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(s).map_err(|e| Error::Input(format!("malformed model file: {e}")))?;
        if file.format != MODEL_FORMAT_NAME {
            return Err(Error::Input(format!("not a model file (format tag '{}')", file.format)));
        }
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::Input(format!(
                "unsupported model format version {} (this build reads {MODEL_FORMAT_VERSION})",
                file.version
            )));
        }
        for m in &file.marginals {
            m.validate()?;
        }
        let structure = MVineStructure::new(file.d, file.k)?;
        for (rec, class) in file.classes.iter().zip(structure.classes()) {
            if rec.class != class.label() || rec.tree_level != class.tree_level || rec.start != class.start {
                return Err(Error::Input(format!("class '{}' does not match expected '{}'", rec.class, class.label())));
            }
        }
        let copulas = file.classes.iter().map(|r| r.copula.clone()).collect();
        let mut model = MVineModel::from_parts(file.d, file.k, file.marginals, copulas)?;
        model.converged = file.classes.iter().map(|r| r.converged).collect();
        model.loglik = file.loglik;
        model.fit_window = (file.fit_window[0], file.fit_window[1]);
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    d: usize,
    k: usize,
    fit_window: [usize; 2],
    loglik: Option<f64>,
    n_params: usize,
    classes: Vec<ClassRecord>,
    marginals: Vec<EmpiricalMarginal>,
}

#[derive(Serialize, Deserialize)]
struct ClassRecord {
    class: String,
    tree_level: usize,
    start: EdgeKind,
    copula: PairCopula,
    converged: bool,
}

fn check_columns(data: &[&[f64]], d: usize) -> Result<()> {
    if data.len() != d {
        return Err(Error::Input(format!("expected {d} column(s), got {}", data.len())));
    }
    if data.iter().any(|c| c.len() != data[0].len()) {
        return Err(Error::Input("columns differ in length".into()));
    }
    Ok(())
}

/// First-tree pair of edge `i` in time order.
#[inline]
fn edge_pair(d: usize, u: &[Vec<f64>], i: usize) -> (f64, f64) {
    if d == 1 {
        return (u[0][i], u[0][i + 1]);
    }
    let t = i / 2;
    if i.is_multiple_of(2) {
        (u[0][t], u[1][t])
    } else {
        (u[0][t], u[0][t + 1])
    }
}

fn first_tree_pairs(d: usize, u: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = u[0].len();
    let ne = if d == 1 { n.saturating_sub(1) } else { (2 * n).saturating_sub(1) };
    (0..ne).map(|i| edge_pair(d, u, i)).unzip()
}

/// Fits an M-vine of order `k` to the full sample.
pub fn fit(data: &[&[f64]], k: usize, candidates: &[CopulaFamily]) -> Result<MVineModel> {
    let n = data.first().map_or(0, |c| c.len());
    fit_window(data, k, candidates, 0, n)
}

/// Fits on observations `start..end` only.
pub fn fit_window(
    data: &[&[f64]],
    k: usize,
    candidates: &[CopulaFamily],
    start: usize,
    end: usize,
) -> Result<MVineModel> {
    let d = data.len();
    let structure = MVineStructure::new(d, k)?;
    check_columns(data, d)?;
    if start >= end || end > data[0].len() {
        return Err(Error::Input(format!("fit window {start}..{end} outside 0..{}", data[0].len())));
    }
    let t_len = end - start;
    if t_len < 10 * (k + 1) {
        return Err(Error::Input(format!("order {k} needs at least {} observations, got {t_len}", 10 * (k + 1))));
    }
    let cols: Vec<&[f64]> = data.iter().map(|c| &c[start..end]).collect();
    let marginals = cols.iter().map(|c| EmpiricalMarginal::fit(c)).collect::<Result<Vec<_>>>()?;
    let u: Vec<Vec<f64>> = cols.iter().zip(&marginals).map(|(c, m)| m.pit_all(c)).collect();
    let mut model = MVineModel {
        copulas: vec![PairCopula::independence(); structure.classes().len()],
        converged: vec![true; structure.classes().len()],
        structure,
        marginals,
        loglik: None,
        fit_window: (start, end),
    };
    let (mut a, mut b) = first_tree_pairs(d, &u);
    let mut ll = 0.0;
    let top = model.structure.max_level();
    for m in 1..=top {
        for kind in [EdgeKind::Cross, EdgeKind::Serial] {
            let Some(ci) = model.structure.class_index(kind, m) else { continue };
            let idx: Vec<usize> = (0..a.len()).filter(|&i| kind_at(d, i) == kind).collect();
            let sample = PairSample { u: idx.iter().map(|&i| a[i]).collect(), v: idx.iter().map(|&i| b[i]).collect() };
            let fit = select_family(&sample, candidates).map_err(|e| {
                let label = model.structure.classes()[ci].label();
                match e {
                    Error::Input(msg) => Error::Input(format!("class {label}: {msg}")),
                    other => other,
                }
            })?;
            if !fit.converged {
                log::warn!("class {} kept its tau-inversion estimate", model.structure.classes()[ci].label());
            }
            ll += fit.loglik;
            model.copulas[ci] = fit.copula;
            model.converged[ci] = fit.converged;
        }
        if m < top {
            let (l, r) = model.child_values(0, m, &a, &b);
            a = l[..l.len() - 1].to_vec();
            b = r[1..].to_vec();
        }
    }
    model.loglik = Some(ll);
    Ok(model)
}

/// Fits orders `1..=k_max` and returns the AIC-best order (ties to the
/// smaller order) with all fitted models.
pub fn select_order(data: &[&[f64]], k_max: usize, candidates: &[CopulaFamily]) -> Result<(usize, Vec<MVineModel>)> {
    if k_max < 1 {
        return Err(Error::Input("maximum Markov order must be at least 1".into()));
    }
    let models = (1..=k_max).map(|k| fit(data, k, candidates)).collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, m) in models.iter().enumerate() {
        if m.aic() < models[best].aic() {
            best = i;
        }
    }
    Ok((best + 1, models))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::Rotation;
    use crate::rng::substream;

    fn uniform_marginal(n: usize) -> EmpiricalMarginal {
        let grid: Vec<f64> = (1..=n).map(|i| i as f64 / (n as f64 + 1.0)).collect();
        EmpiricalMarginal::fit(&grid).unwrap()
    }

    fn five_class_model() -> MVineModel {
        use CopulaFamily::*;
        let cops = vec![
            PairCopula::new(Gaussian, vec![0.5], Rotation::R0).unwrap(),
            PairCopula::new(Clayton, vec![2.0], Rotation::R0).unwrap(),
            PairCopula::new(Frank, vec![3.0], Rotation::R0).unwrap(),
            PairCopula::new(Gumbel, vec![1.5], Rotation::R0).unwrap(),
            PairCopula::new(Gaussian, vec![-0.3], Rotation::R0).unwrap(),
        ];
        MVineModel::from_parts(2, 1, vec![uniform_marginal(999), uniform_marginal(999)], cops).unwrap()
    }

    #[test]
    fn independence_model_has_zero_loglik() {
        let m = MVineModel::from_parts(
            2,
            1,
            vec![uniform_marginal(9), uniform_marginal(9)],
            vec![PairCopula::independence(); 5],
        )
        .unwrap();
        let x = [0.1, 0.5, 0.3, 0.9];
        let (ll, aic) = m.loglik_aic(&[&x, &x]).unwrap();
        assert_eq!((ll, aic), (0.0, 0.0));
        let mut cops = vec![PairCopula::independence(); 5];
        cops[0] = PairCopula::gaussian(0.0).unwrap();
        let g = MVineModel::from_parts(2, 1, m.marginals().to_vec(), cops).unwrap();
        let (ll2, aic2) = g.loglik_aic(&[&x, &x]).unwrap();
        assert!(ll2.abs() < 1e-12);
        assert!((aic2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fit_loglik_matches_evaluation() {
        let model = five_class_model();
        let mut rng = substream(4, &[]);
        let u = model.simulate_copula_path(300, &mut rng).unwrap();
        let data: Vec<&[f64]> = u.iter().map(|c| c.as_slice()).collect();
        let fitted = fit(&data, 1, &CopulaFamily::ALL).unwrap();
        let (ll, aic) = fitted.loglik_aic(&data).unwrap();
        assert!((ll - fitted.loglik().unwrap()).abs() < 1e-9, "{ll} vs {:?}", fitted.loglik());
        assert!((aic - fitted.aic().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn too_short_sample_is_rejected() {
        let x: Vec<f64> = (0..9).map(|i| i as f64).collect();
        assert!(matches!(fit(&[&x, &x], 1, &CopulaFamily::ALL), Err(Error::Input(_))));
        assert!(matches!(fit(&[&x], 0, &CopulaFamily::ALL), Err(Error::Input(_))));
    }

    #[test]
    fn first_tree_accessor() {
        let m = five_class_model();
        let (s, c) = m.first_tree_copulas().unwrap();
        assert_eq!(s, &m.copulas()[1]);
        assert_eq!(c, &m.copulas()[0]);
        let d1 = MVineModel::from_parts(1, 1, vec![uniform_marginal(9)], vec![PairCopula::independence()]).unwrap();
        assert!(matches!(d1.first_tree_copulas(), Err(Error::Capability(_))));
    }

    #[test]
    fn json_round_trip() {
        let m = five_class_model();
        let s = m.to_json().unwrap();
        let back = MVineModel::from_json(&s).unwrap();
        assert_eq!(back, m);
        let bumped = s.replace("\"version\": 1", "\"version\": 99");
        assert!(MVineModel::from_json(&bumped).is_err());
    }

    #[test]
    fn conditional_draws_at_the_median() {
        let m = MVineModel::from_parts(1, 1, vec![uniform_marginal(999)], vec![PairCopula::gaussian(0.5).unwrap()])
            .unwrap();
        let mut rng = substream(8, &[]);
        let draws = m.conditional_uniforms(&[&[0.5]], 20_000, &mut rng).unwrap();
        let mean = crate::stats::mean(&draws);
        assert!((mean - 0.5).abs() < 4.0 * (1.0 / 12.0f64 / 20_000.0).sqrt());
    }

    #[test]
    fn null_path_is_deterministic_and_serially_dependent() {
        let mut cops = vec![PairCopula::independence(); 5];
        cops[1] = PairCopula::gaussian(0.5).unwrap();
        let m = MVineModel::from_parts(2, 1, vec![uniform_marginal(99), uniform_marginal(99)], cops).unwrap();
        let (x, y) = m.simulate_null_path(5000, &mut substream(3, &[1])).unwrap();
        let (x2, y2) = m.simulate_null_path(5000, &mut substream(3, &[1])).unwrap();
        assert_eq!((&x, &y), (&x2, &y2));
        let tau = crate::stats::kendall_tau(&x[..4999], &x[1..]);
        assert!((tau - 1.0 / 3.0).abs() < 0.04, "{tau}");
    }
}

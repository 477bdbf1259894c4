use super::family::{self, clamp_unit, CopulaFamily};
use super::{PairCopula, PairSample, Rotation};
use crate::error::{Error, Result};
use crate::optim::brent_min;
use crate::special::{norm_quantile, t_quantile};

/// Outcome of a single-pair maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFit {
    pub copula: PairCopula,
    pub loglik: f64,
    /// False when the optimiser failed and the tau-inversion estimate was kept.
    pub converged: bool,
}

impl PairFit {
    pub fn aic(&self) -> f64 {
        -2.0 * self.loglik + 2.0 * self.copula.n_params() as f64
    }
}

const MIN_OBS: usize = 10;

/// Maximum-likelihood fit of the unrotated `family`.
pub fn fit_pair_mle(family: CopulaFamily, obs: &PairSample) -> Result<PairFit> {
    fit_pair_mle_rotated(family, Rotation::R0, obs)
}

pub fn fit_pair_mle_rotated(family: CopulaFamily, rotation: Rotation, obs: &PairSample) -> Result<PairFit> {
    check_obs(obs)?;
    let tau = family::empirical_tau(&obs.u, &obs.v);
    fit_with_tau(family, rotation, obs, tau)
}

fn check_obs(obs: &PairSample) -> Result<()> {
    if obs.len() < MIN_OBS {
        return Err(Error::Input(format!("pair-copula fit needs at least {MIN_OBS} observations, got {}", obs.len())));
    }
    if obs.u.iter().chain(&obs.v).any(|x| !x.is_finite()) {
        return Err(Error::Input("pair-copula fit received non-finite observations".into()));
    }
    Ok(())
}

fn fit_with_tau(family: CopulaFamily, rotation: Rotation, obs: &PairSample, tau: f64) -> Result<PairFit> {
    if rotation != Rotation::R0 && !family.is_rotatable() {
        return Err(Error::Domain(format!("{family} does not admit a {} degree rotation", rotation.degrees())));
    }
    if family == CopulaFamily::Independence {
        return Ok(PairFit { copula: PairCopula::independence(), loglik: 0.0, converged: true });
    }
    let (a, b): (Vec<f64>, Vec<f64>) = obs
        .u
        .iter()
        .zip(&obs.v)
        .map(|(&u, &v)| {
            let (x, y) = rotation.to_base(clamp_unit(u), clamp_unit(v));
            (clamp_unit(x), clamp_unit(y))
        })
        .unzip();
    let base_tau = match rotation {
        Rotation::R0 | Rotation::R180 => tau,
        Rotation::R90 | Rotation::R270 => -tau,
    };
    let start = family::warm_start(family, base_tau);
    let (theta, converged) = match family {
        CopulaFamily::Gaussian => fit_gaussian(&a, &b, start[0]),
        CopulaFamily::StudentT => fit_student(&a, &b, start[0]),
        _ => fit_one_param(family, &a, &b, start[0]),
    };
    let theta = if converged {
        theta
    } else {
        log::warn!("{family} fit did not converge, keeping tau-inversion estimate {start:?}");
        start
    };
    let theta = nudge_into_domain(family, theta);
    let copula = PairCopula::new(family, theta, rotation)?;
    let loglik = copula.loglik(obs);
    if !loglik.is_finite() {
        return Err(Error::Numerical(format!("non-finite log-likelihood for {copula}")));
    }
    Ok(PairFit { copula, loglik, converged })
}

fn nudge_into_domain(family: CopulaFamily, mut theta: Vec<f64>) -> Vec<f64> {
    if family == CopulaFamily::Frank && theta[0].abs() < 1e-6 {
        theta[0] = 1e-6f64.copysign(theta[0]);
    }
    for (t, &(lo, hi)) in theta.iter_mut().zip(family.search_bounds()) {
        *t = t.clamp(lo, hi);
    }
    theta
}

fn fit_gaussian(a: &[f64], b: &[f64], start: f64) -> (Vec<f64>, bool) {
    let (mut sq, mut cross) = (0.0, 0.0);
    for (&u, &v) in a.iter().zip(b) {
        let (x, y) = (norm_quantile(u), norm_quantile(v));
        sq += x * x + y * y;
        cross += x * y;
    }
    let n = a.len() as f64;
    let nll = |rho: f64| {
        let r2 = 1.0 - rho * rho;
        0.5 * n * r2.ln() + (rho * rho * sq - 2.0 * rho * cross) / (2.0 * r2)
    };
    let (lo, hi) = CopulaFamily::Gaussian.search_bounds()[0];
    let m = brent_min(nll, lo, hi, start, 1e-10, 200);
    (vec![m.x], m.converged)
}

/// Profile likelihood: inner search over ρ for fixed ν, outer over ν.
fn fit_student(a: &[f64], b: &[f64], rho_start: f64) -> (Vec<f64>, bool) {
    let bounds = CopulaFamily::StudentT.search_bounds();
    let (rlo, rhi) = bounds[0];
    let (nlo, nhi) = bounds[1];
    let n = a.len() as f64;
    let mut x = vec![0.0; a.len()];
    let mut y = vec![0.0; a.len()];
    let mut inner_ok = true;
    let mut best = (f64::INFINITY, rho_start, nhi);
    let mut profile = |psi: f64| -> f64 {
        let nu = 1.0 / psi;
        for i in 0..a.len() {
            x[i] = t_quantile(a[i], nu);
            y[i] = t_quantile(b[i], nu);
        }
        let marg: f64 = x.iter().chain(&y).map(|z| (z * z / nu).ln_1p()).sum::<f64>() * 0.5 * (nu + 1.0);
        let konst = n * family::t_ln_norm_const(nu) + marg;
        let nll = |rho: f64| {
            let r2 = 1.0 - rho * rho;
            let mut s = 0.0;
            for i in 0..x.len() {
                let q = (x[i] * x[i] + y[i] * y[i] - 2.0 * rho * x[i] * y[i]) / (nu * r2);
                s += q.ln_1p();
            }
            0.5 * n * r2.ln() + 0.5 * (nu + 2.0) * s - konst
        };
        let m = brent_min(nll, rlo, rhi, rho_start, 1e-8, 200);
        inner_ok &= m.converged;
        if m.value < best.0 {
            best = (m.value, m.x, nu);
        }
        m.value
    };
    // The profile is searched over ψ = 1/ν: a coarse grid locates the basin,
    // then Brent refines inside the neighbouring grid cells.
    let grid = [1.0 / nhi, 1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / nlo];
    let values: Vec<f64> = grid.iter().map(|&psi| profile(psi)).collect();
    let i = (0..grid.len()).min_by(|&p, &q| values[p].total_cmp(&values[q])).unwrap_or(0);
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    brent_min(&mut profile, lo, hi, grid[i], 1e-2, 12);
    (vec![best.1, best.2], inner_ok)
}

fn fit_one_param(family: CopulaFamily, a: &[f64], b: &[f64], start: f64) -> (Vec<f64>, bool) {
    let (lo, hi) = family.search_bounds()[0];
    let nll = |t: f64| -> f64 {
        let th = [t];
        let mut s = 0.0;
        for (&u, &v) in a.iter().zip(b) {
            s += family::ln_pdf(family, &th, u, v);
        }
        if s.is_finite() {
            -s
        } else {
            f64::INFINITY
        }
    };
    let m = brent_min(nll, lo, hi, start, 1e-8, 200);
    (vec![m.x], m.converged)
}

/// AIC-minimising choice among `candidates`. Rotatable families are tried in
/// the two rotations whose dependence sign matches the sample's Kendall tau.
pub fn select_family(obs: &PairSample, candidates: &[CopulaFamily]) -> Result<PairFit> {
    if candidates.is_empty() {
        return Err(Error::Config("family selection needs at least one candidate".into()));
    }
    check_obs(obs)?;
    let mut fams = candidates.to_vec();
    fams.sort();
    fams.dedup();
    let tau = family::empirical_tau(&obs.u, &obs.v);
    let mut best: Option<PairFit> = None;
    let mut last_err = None;
    for f in fams {
        let rotations: Vec<Rotation> =
            if f.is_rotatable() { Rotation::matching_sign(tau).to_vec() } else { vec![Rotation::R0] };
        for r in rotations {
            match fit_with_tau(f, r, obs, tau) {
                Ok(fit) => {
                    if best.as_ref().is_none_or(|b| fit.aic() < b.aic()) {
                        best = Some(fit);
                    }
                }
                Err(e) => {
                    log::debug!("{f}/{} fit failed: {e}", r.degrees());
                    last_err = Some(e);
                }
            }
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::Numerical("no candidate family could be fitted".into())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use std::f64::consts::PI;

    /// Asymptotic standard error of the Gaussian-copula correlation estimate.
    fn gaussian_rho_se(rho: f64, n: usize) -> f64 {
        (1.0 - rho * rho) / (n as f64).sqrt()
    }

    fn draw(c: &PairCopula, n: usize, seed: u64) -> PairSample {
        let mut rng = substream(seed, &[]);
        PairSample::from_pairs(&c.sample(n, &mut rng).unwrap())
    }

    #[test]
    fn independence_fit_is_trivial() {
        let obs = draw(&PairCopula::gaussian(0.4).unwrap(), 50, 1);
        let fit = fit_pair_mle(CopulaFamily::Independence, &obs).unwrap();
        assert!(fit.copula.is_independence());
        assert_eq!(fit.loglik, 0.0);
    }

    #[test]
    fn too_few_observations() {
        let obs = draw(&PairCopula::independence(), 9, 1);
        assert!(matches!(fit_pair_mle(CopulaFamily::Gaussian, &obs), Err(Error::Input(_))));
    }

    #[test]
    fn gaussian_recovery() {
        let obs = draw(&PairCopula::gaussian(0.6).unwrap(), 2000, 7);
        let fit = fit_pair_mle(CopulaFamily::Gaussian, &obs).unwrap();
        let rho = fit.copula.theta()[0];
        assert!(fit.converged);
        assert!((rho - 0.6).abs() < 3.0 * gaussian_rho_se(0.6, 2000), "{rho}");
    }

    #[test]
    fn clayton_recovery() {
        let c = PairCopula::new(CopulaFamily::Clayton, vec![2.0], Rotation::R0).unwrap();
        let fit = fit_pair_mle(CopulaFamily::Clayton, &draw(&c, 2000, 11)).unwrap();
        let th = fit.copula.theta()[0];
        assert!((1.6..=2.4).contains(&th), "{th}");
    }

    #[test]
    fn student_recovery() {
        let c = PairCopula::new(CopulaFamily::StudentT, vec![0.5, 4.0], Rotation::R0).unwrap();
        let fit = fit_pair_mle(CopulaFamily::StudentT, &draw(&c, 2000, 5)).unwrap();
        let th = fit.copula.theta();
        assert!((th[0] - 0.5).abs() < 0.06, "{th:?}");
        assert!(th[1] > 2.5 && th[1] < 8.0, "{th:?}");
    }

    #[test]
    fn rotated_gumbel_recovery() {
        let c = PairCopula::new(CopulaFamily::Gumbel, vec![2.0], Rotation::R90).unwrap();
        let obs = draw(&c, 1000, 3);
        let fit = select_family(&obs, &CopulaFamily::ALL).unwrap();
        assert_eq!(fit.copula.tau().signum(), -1.0);
        assert!((fit.copula.tau() + 0.5).abs() < 0.06, "{}", fit.copula);
    }

    #[test]
    fn selection_picks_independence_for_independent_data() {
        let mut hits = 0;
        for seed in 0..9 {
            let obs = draw(&PairCopula::independence(), 2000, 100 + seed);
            let fit = select_family(&obs, &CopulaFamily::ALL).unwrap();
            assert!(fit.copula.tau().abs() < 0.05, "{}", fit.copula);
            hits += fit.copula.is_independence() as usize;
        }
        assert!(hits >= 5, "independence chosen {hits}/9 times");
    }

    #[test]
    fn selection_for_gaussian_data_is_elliptical() {
        let obs = draw(&PairCopula::gaussian(0.8).unwrap(), 2000, 17);
        let fit = select_family(&obs, &CopulaFamily::ALL).unwrap();
        assert!(matches!(fit.copula.family(), CopulaFamily::Gaussian | CopulaFamily::StudentT), "{}", fit.copula);
        let tau = 2.0 / PI * 0.8f64.asin();
        assert!((fit.copula.tau() - tau).abs() < 0.05);
    }

    #[test]
    fn single_candidate_is_forced() {
        let obs = draw(&PairCopula::gaussian(0.8).unwrap(), 100, 17);
        let fit = select_family(&obs, &[CopulaFamily::Independence]).unwrap();
        assert!(fit.copula.is_independence());
        assert!(select_family(&obs, &[]).is_err());
    }

    #[test]
    fn sampling_matches_tau_and_is_deterministic() {
        let ind = draw(&PairCopula::independence(), 10_000, 2);
        assert!(crate::stats::kendall_tau(&ind.u, &ind.v).abs() < 0.03);
        let g = draw(&PairCopula::gaussian(0.5).unwrap(), 10_000, 2);
        assert!((crate::stats::kendall_tau(&g.u, &g.v) - 1.0 / 3.0).abs() < 0.03);
        assert_eq!(g, draw(&PairCopula::gaussian(0.5).unwrap(), 10_000, 2));
    }
}

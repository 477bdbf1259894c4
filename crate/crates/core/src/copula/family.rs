//! Unrotated bivariate copula families.
//!
//! All functions here take arguments already clamped to `[EPS, 1 - EPS]` and
//! work on the base (0°) orientation. Every family in the set is exchangeable,
//! so `∂C/∂v (u, v) = ∂C/∂u (v, u)`.

use crate::error::{Error, Result};
use crate::special::{bvn_cdf, debye1, integrate, norm_cdf, norm_quantile, t_cdf, t_quantile};
use crate::stats;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Boundary clamp for every unit-interval argument.
pub const EPS: f64 = 1e-10;

#[inline]
pub fn clamp_unit(x: f64) -> f64 {
    if x.is_nan() {
        return 0.5;
    }
    x.clamp(EPS, 1.0 - EPS)
}

/// Parametric pair-copula families, in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CopulaFamily {
    Independence,
    Gaussian,
    StudentT,
    Clayton,
    Gumbel,
    Frank,
    Joe,
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 7] = [
        CopulaFamily::Independence,
        CopulaFamily::Gaussian,
        CopulaFamily::StudentT,
        CopulaFamily::Clayton,
        CopulaFamily::Gumbel,
        CopulaFamily::Frank,
        CopulaFamily::Joe,
    ];

    pub fn n_params(self) -> usize {
        match self {
            CopulaFamily::Independence => 0,
            CopulaFamily::StudentT => 2,
            _ => 1,
        }
    }

    /// Families whose 90/180/270 degree rotations are distinct models.
    pub fn is_rotatable(self) -> bool {
        matches!(self, CopulaFamily::Clayton | CopulaFamily::Gumbel | CopulaFamily::Joe)
    }

    /// Closed admissible box per parameter. Open ends are checked separately
    /// in [`CopulaFamily::validate`].
    pub fn bounds(self) -> &'static [(f64, f64)] {
        match self {
            CopulaFamily::Independence => &[],
            CopulaFamily::Gaussian => &[(-1.0, 1.0)],
            CopulaFamily::StudentT => &[(-1.0, 1.0), (2.0, 50.0)],
            CopulaFamily::Clayton => &[(0.0, 28.0)],
            CopulaFamily::Gumbel => &[(1.0, 17.0)],
            CopulaFamily::Frank => &[(-35.0, 35.0)],
            CopulaFamily::Joe => &[(1.0, 30.0)],
        }
    }

    /// Box used by the optimiser, strictly inside the admissible domain.
    pub(crate) fn search_bounds(self) -> &'static [(f64, f64)] {
        match self {
            CopulaFamily::Independence => &[],
            CopulaFamily::Gaussian => &[(-0.999, 0.999)],
            CopulaFamily::StudentT => &[(-0.999, 0.999), (2.05, 50.0)],
            CopulaFamily::Clayton => &[(1e-4, 28.0)],
            CopulaFamily::Gumbel => &[(1.0, 17.0)],
            CopulaFamily::Frank => &[(-35.0, 35.0)],
            CopulaFamily::Joe => &[(1.0 + 1e-6, 30.0)],
        }
    }

    pub fn validate(self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::Domain(format!("{self} expects {} parameter(s), got {}", self.n_params(), theta.len())));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain(format!("{self}: non-finite parameter {theta:?}")));
        }
        let ok = match self {
            CopulaFamily::Independence => true,
            CopulaFamily::Gaussian => theta[0].abs() < 1.0,
            CopulaFamily::StudentT => theta[0].abs() < 1.0 && theta[1] > 2.0 && theta[1] <= 50.0,
            CopulaFamily::Clayton => theta[0] > 0.0 && theta[0] <= 28.0,
            CopulaFamily::Gumbel => (1.0..=17.0).contains(&theta[0]),
            CopulaFamily::Frank => theta[0] != 0.0 && theta[0].abs() <= 35.0,
            CopulaFamily::Joe => theta[0] > 1.0 && theta[0] <= 30.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("{self}: parameter {theta:?} outside admissible domain")))
        }
    }

    /// Kendall's tau of the unrotated family at `theta`.
    pub(crate) fn tau(self, theta: &[f64]) -> f64 {
        match self {
            CopulaFamily::Independence => 0.0,
            CopulaFamily::Gaussian | CopulaFamily::StudentT => 2.0 / PI * theta[0].asin(),
            CopulaFamily::Clayton => theta[0] / (theta[0] + 2.0),
            CopulaFamily::Gumbel => 1.0 - 1.0 / theta[0],
            CopulaFamily::Frank => frank_tau(theta[0]),
            CopulaFamily::Joe => joe_tau(theta[0]),
        }
    }

    /// Inverse of the Kendall's tau link for one-parameter families.
    pub fn param_from_tau(self, tau: f64) -> Result<Vec<f64>> {
        if !(-1.0..=1.0).contains(&tau) || tau.is_nan() {
            return Err(Error::Domain(format!("tau {tau} outside [-1, 1]")));
        }
        let out_of_range = || Error::Domain(format!("{self} cannot attain tau = {tau}"));
        match self {
            CopulaFamily::Independence => Ok(vec![]),
            CopulaFamily::StudentT => {
                Err(Error::Capability("StudentT degrees of freedom are not identified by Kendall's tau".into()))
            }
            CopulaFamily::Gaussian => {
                if tau.abs() >= 1.0 {
                    return Err(out_of_range());
                }
                Ok(vec![(PI * tau / 2.0).sin()])
            }
            CopulaFamily::Clayton => {
                if tau <= 0.0 || tau >= 1.0 {
                    return Err(out_of_range());
                }
                Ok(vec![2.0 * tau / (1.0 - tau)])
            }
            CopulaFamily::Gumbel => {
                if !(0.0..1.0).contains(&tau) {
                    return Err(out_of_range());
                }
                Ok(vec![1.0 / (1.0 - tau)])
            }
            CopulaFamily::Frank => {
                if tau == 0.0 || tau.abs() >= 1.0 {
                    return Err(out_of_range());
                }
                let (lo, hi) = if tau > 0.0 { (1e-12, 35.0) } else { (-35.0, -1e-12) };
                if (frank_tau(hi) - tau) * (frank_tau(lo) - tau) > 0.0 {
                    return Err(out_of_range());
                }
                find_root(|t| frank_tau(t) - tau, lo, hi, 1e-14).map(|t| vec![t])
            }
            CopulaFamily::Joe => {
                if tau <= 0.0 || tau >= 1.0 || tau > joe_tau(30.0) {
                    return Err(out_of_range());
                }
                find_root(|t| joe_tau(t) - tau, 1.0, 30.0, 1e-14).map(|t| vec![t])
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CopulaFamily::Independence => "independence",
            CopulaFamily::Gaussian => "gaussian",
            CopulaFamily::StudentT => "student-t",
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::Gumbel => "gumbel",
            CopulaFamily::Frank => "frank",
            CopulaFamily::Joe => "joe",
        }
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CopulaFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        CopulaFamily::ALL
            .into_iter()
            .find(|f| {
                f.name() == key
                    || (key == "t" && *f == CopulaFamily::StudentT)
                    || (key == "indep" && *f == CopulaFamily::Independence)
            })
            .ok_or_else(|| {
                Error::Input(format!(
                    "unknown copula family '{s}' (expected one of: {})",
                    CopulaFamily::ALL.map(|f| f.name()).join(", ")
                ))
            })
    }
}

fn frank_tau(theta: f64) -> f64 {
    if theta.abs() < 1e-6 {
        return theta / 9.0;
    }
    1.0 - 4.0 / theta * (1.0 - debye1(theta))
}

fn joe_tau(theta: f64) -> f64 {
    if theta <= 1.0 {
        return 0.0;
    }
    // τ = 1 - 4 Σ 1 / (k (θk + 2) (θ(k-1) + 2)), tail ~ 1 / (2 θ² K²)
    const K: usize = 4000;
    let mut s = 0.0;
    for k in (1..=K).rev() {
        let k = k as f64;
        s += 1.0 / (k * (theta * k + 2.0) * (theta * (k - 1.0) + 2.0));
    }
    let kk = K as f64 + 0.5;
    s += 1.0 / (2.0 * theta * theta * kk * kk);
    1.0 - 4.0 * s
}

/// Brent-Dekker root finding on a sign-changing bracket.
pub(crate) fn find_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(Error::Numerical(format!("root not bracketed on [{lo}, {hi}]")));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Err(Error::Numerical("root finding did not converge in 200 iterations".into()))
}

#[inline]
fn t_log_const(nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 2.0)) + ln_gamma(0.5 * nu) - 2.0 * ln_gamma(0.5 * (nu + 1.0))
}

/// Log-density of the unrotated family.
pub(crate) fn ln_pdf(family: CopulaFamily, th: &[f64], u: f64, v: f64) -> f64 {
    match family {
        CopulaFamily::Independence => 0.0,
        CopulaFamily::Gaussian => {
            let (x, y) = (norm_quantile(u), norm_quantile(v));
            gaussian_ln_pdf_scores(th[0], x, y)
        }
        CopulaFamily::StudentT => {
            let (rho, nu) = (th[0], th[1]);
            let (x, y) = (t_quantile(u, nu), t_quantile(v, nu));
            t_log_const(nu) + t_ln_pdf_kernel(rho, nu, x, y)
        }
        CopulaFamily::Clayton => {
            let t = th[0];
            let (lu, lv) = (u.ln(), v.ln());
            let a = (-t * lu).exp_m1() + (-t * lv).exp_m1() + 1.0;
            (1.0 + t).ln() - (1.0 + t) * (lu + lv) - (2.0 + 1.0 / t) * a.ln()
        }
        CopulaFamily::Gumbel => {
            let t = th[0];
            let (x, y) = (-u.ln(), -v.ln());
            let (lx, ly) = (x.ln(), y.ln());
            let la = log_sum_exp(t * lx, t * ly);
            let a = (la / t).exp();
            -a + x + y + (t - 1.0) * (lx + ly) + (2.0 / t - 2.0) * la + ((t - 1.0) / a).ln_1p()
        }
        CopulaFamily::Frank => {
            let t = th[0];
            if t.abs() < 1e-10 {
                return 0.0;
            }
            let (em_u, em_v, em_1) = ((-t * u).exp_m1(), (-t * v).exp_m1(), (-t).exp_m1());
            (t * -em_1).ln() - t * (u + v) - 2.0 * (em_1 + em_u * em_v).abs().ln()
        }
        CopulaFamily::Joe => {
            let t = th[0];
            let (ub, vb) = (1.0 - u, 1.0 - v);
            let (lub, lvb) = (ub.ln(), vb.ln());
            let (a, b) = ((t * lub).exp(), (t * lvb).exp());
            let s = a + b - a * b;
            (1.0 / t - 2.0) * s.ln() + (t - 1.0) * (lub + lvb) + (t - 1.0 + s).ln()
        }
    }
}

#[inline]
pub(crate) fn gaussian_ln_pdf_scores(rho: f64, x: f64, y: f64) -> f64 {
    let r2 = 1.0 - rho * rho;
    -0.5 * r2.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2)
}

#[inline]
pub(crate) fn t_ln_pdf_kernel(rho: f64, nu: f64, x: f64, y: f64) -> f64 {
    let r2 = 1.0 - rho * rho;
    -0.5 * r2.ln() - 0.5 * (nu + 2.0) * ((x * x + y * y - 2.0 * rho * x * y) / (nu * r2)).ln_1p()
        + 0.5 * (nu + 1.0) * ((x * x / nu).ln_1p() + (y * y / nu).ln_1p())
}

pub(crate) fn t_ln_norm_const(nu: f64) -> f64 {
    t_log_const(nu)
}

#[inline]
fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `∂C/∂u (u, v)`: conditional CDF of the second argument given the first.
pub(crate) fn h1(family: CopulaFamily, th: &[f64], u: f64, v: f64) -> f64 {
    match family {
        CopulaFamily::Independence => v,
        CopulaFamily::Gaussian => {
            let rho = th[0];
            let (x, y) = (norm_quantile(u), norm_quantile(v));
            norm_cdf((y - rho * x) / (1.0 - rho * rho).sqrt())
        }
        CopulaFamily::StudentT => {
            let (rho, nu) = (th[0], th[1]);
            let (x, y) = (t_quantile(u, nu), t_quantile(v, nu));
            let scale = ((nu + x * x) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
            t_cdf((y - rho * x) / scale, nu + 1.0)
        }
        CopulaFamily::Clayton => {
            let t = th[0];
            let b = (-t * v.ln()).exp_m1();
            let z = (t * u.ln()).exp() * b;
            (-(1.0 + 1.0 / t) * z.ln_1p()).exp()
        }
        CopulaFamily::Gumbel => {
            let t = th[0];
            let (x, y) = (-u.ln(), -v.ln());
            let la = log_sum_exp(t * x.ln(), t * y.ln());
            let a = (la / t).exp();
            (-a + x + (t - 1.0) * (x.ln() - a.ln())).exp()
        }
        CopulaFamily::Frank => {
            let t = th[0];
            if t.abs() < 1e-10 {
                return v;
            }
            let (em_u, em_v, em_1) = ((-t * u).exp_m1(), (-t * v).exp_m1(), (-t).exp_m1());
            (em_u + 1.0) * em_v / (em_1 + em_u * em_v)
        }
        CopulaFamily::Joe => {
            let t = th[0];
            let (ub, vb) = (1.0 - u, 1.0 - v);
            let (a, b) = ((t * ub.ln()).exp(), (t * vb.ln()).exp());
            let s = a + b - a * b;
            ((t - 1.0) * ub.ln() + (1.0 / t - 1.0) * s.ln()).exp() * (1.0 - b)
        }
    }
}

/// Inverse of `v ↦ h1(u, v)` at level `w`.
pub(crate) fn h1_inv(family: CopulaFamily, th: &[f64], w: f64, u: f64) -> Result<f64> {
    match family {
        CopulaFamily::Independence => Ok(w),
        CopulaFamily::Gaussian => {
            let rho = th[0];
            Ok(norm_cdf(norm_quantile(w) * (1.0 - rho * rho).sqrt() + rho * norm_quantile(u)))
        }
        CopulaFamily::StudentT => {
            let (rho, nu) = (th[0], th[1]);
            let x = t_quantile(u, nu);
            let scale = ((nu + x * x) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
            Ok(t_cdf(t_quantile(w, nu + 1.0) * scale + rho * x, nu))
        }
        CopulaFamily::Clayton => {
            let t = th[0];
            let b = (-t / (1.0 + t) * w.ln()).exp_m1() * (-t * u.ln()).exp();
            Ok((-b.ln_1p() / t).exp())
        }
        CopulaFamily::Frank => {
            let t = th[0];
            if t.abs() < 1e-10 {
                return Ok(w);
            }
            let (em_u, em_1) = ((-t * u).exp_m1(), (-t).exp_m1());
            let em_v = w * em_1 / (1.0 + em_u * (1.0 - w));
            Ok(-em_v.ln_1p() / t)
        }
        CopulaFamily::Gumbel | CopulaFamily::Joe => {
            // levels beyond the h-values at the clamp map to the clamp
            if w <= h1(family, th, u, EPS) {
                return Ok(EPS);
            }
            if w >= h1(family, th, u, 1.0 - EPS) {
                return Ok(1.0 - EPS);
            }
            find_root(|v| h1(family, th, u, v) - w, EPS, 1.0 - EPS, 1e-16)
        }
    }
}

/// Copula CDF of the unrotated family.
pub(crate) fn cdf(family: CopulaFamily, th: &[f64], u: f64, v: f64) -> f64 {
    match family {
        CopulaFamily::Independence => u * v,
        CopulaFamily::Gaussian => bvn_cdf(norm_quantile(u), norm_quantile(v), th[0]),
        CopulaFamily::StudentT => {
            // C(u, v) = ∫_0^u ∂C/∂s (s, v) ds
            integrate(|s| if s <= 0.0 { 0.0 } else { h1(family, th, s.max(1e-300), v) }, 0.0, u, 1e-15)
        }
        CopulaFamily::Clayton => {
            let t = th[0];
            let a = (-t * u.ln()).exp_m1() + (-t * v.ln()).exp_m1() + 1.0;
            (-a.ln() / t).exp()
        }
        CopulaFamily::Gumbel => {
            let t = th[0];
            let (x, y) = (-u.ln(), -v.ln());
            let la = log_sum_exp(t * x.ln(), t * y.ln());
            (-(la / t).exp()).exp()
        }
        CopulaFamily::Frank => {
            let t = th[0];
            if t.abs() < 1e-10 {
                return u * v;
            }
            let (em_u, em_v, em_1) = ((-t * u).exp_m1(), (-t * v).exp_m1(), (-t).exp_m1());
            -(em_u * em_v / em_1).ln_1p() / t
        }
        CopulaFamily::Joe => {
            let t = th[0];
            let (ub, vb) = (1.0 - u, 1.0 - v);
            let (a, b) = ((t * ub.ln()).exp(), (t * vb.ln()).exp());
            1.0 - ((a + b - a * b).ln() / t).exp()
        }
    }
}

/// Warm-start value from an empirical tau for the unrotated family, clamped
/// into the search box (used when tau has the "wrong" sign for the family).
pub(crate) fn warm_start(family: CopulaFamily, tau: f64) -> Vec<f64> {
    let b = family.search_bounds();
    let t = tau.clamp(-0.95, 0.95);
    match family {
        CopulaFamily::Independence => vec![],
        CopulaFamily::StudentT => vec![(PI * t / 2.0).sin().clamp(b[0].0, b[0].1), 8.0],
        CopulaFamily::Frank => {
            let t = if t.abs() < 1e-3 { 1e-3f64.copysign(t) } else { t };
            family.param_from_tau(t).unwrap_or(vec![1.0f64.copysign(t)])
        }
        _ => {
            let t = t.max(1e-3);
            family.param_from_tau(t).map(|p| vec![p[0].clamp(b[0].0, b[0].1)]).unwrap_or(vec![b[0].0])
        }
    }
}

pub(crate) fn empirical_tau(u: &[f64], v: &[f64]) -> f64 {
    stats::kendall_tau(u, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frank_tau_small_theta_limit() {
        assert!((frank_tau(1e-3) - 1e-3 / 9.0).abs() < 1e-8);
        assert!((frank_tau(5.0) + frank_tau(-5.0)).abs() < 1e-13);
        // Frank θ = 5.74 gives τ ≈ 0.5
        assert!((frank_tau(5.736_283) - 0.5).abs() < 1e-4);
    }

    #[test]
    fn joe_tau_limits() {
        assert!(joe_tau(1.0).abs() < 1e-12);
        assert!(joe_tau(1.0 + 1e-9).abs() < 1e-6);
        // θ = 2: τ = 2 - π²/6
        assert!((joe_tau(2.0) - (2.0 - PI * PI / 6.0)).abs() < 1e-10);
    }

    #[test]
    fn root_finder_solves_cubic() {
        let r = find_root(|x| x * x * x - 2.0, 0.0, 2.0, 1e-15).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
        assert!(find_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }

    #[test]
    fn family_names_round_trip() {
        for f in CopulaFamily::ALL {
            assert_eq!(f.name().parse::<CopulaFamily>().unwrap(), f);
        }
        assert!("bb1".parse::<CopulaFamily>().is_err());
    }
}

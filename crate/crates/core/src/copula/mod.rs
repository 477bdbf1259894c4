//! Bivariate parametric copulas: density, distribution, h-functions and their
//! inverses, Kendall's tau links, sampling, and single-pair estimation.

mod family;
mod fit;

pub use family::{clamp_unit, CopulaFamily, EPS};
pub use fit::{fit_pair_mle, fit_pair_mle_rotated, select_family, PairFit};

use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_quantile, t_cdf, t_quantile};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Rotation of an asymmetric copula, counter-clockwise in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(into = "u16", try_from = "u16")]
pub enum Rotation {
    #[default]
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn degrees(self) -> u16 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }

    /// Maps a point of the rotated copula to the unrotated coordinates.
    #[inline]
    pub(crate) fn to_base(self, u: f64, v: f64) -> (f64, f64) {
        match self {
            Rotation::R0 => (u, v),
            Rotation::R90 => (1.0 - u, v),
            Rotation::R180 => (1.0 - u, 1.0 - v),
            Rotation::R270 => (u, 1.0 - v),
        }
    }

    /// Rotations that keep the sign of Kendall's tau equal to `sign(tau)`.
    pub(crate) fn matching_sign(tau: f64) -> [Rotation; 2] {
        if tau >= 0.0 {
            [Rotation::R0, Rotation::R180]
        } else {
            [Rotation::R90, Rotation::R270]
        }
    }
}

impl From<Rotation> for u16 {
    fn from(r: Rotation) -> u16 {
        r.degrees()
    }
}

impl TryFrom<u16> for Rotation {
    type Error = String;
    fn try_from(d: u16) -> std::result::Result<Self, String> {
        match d {
            0 => Ok(Rotation::R0),
            90 => Ok(Rotation::R90),
            180 => Ok(Rotation::R180),
            270 => Ok(Rotation::R270),
            _ => Err(format!("rotation must be 0, 90, 180 or 270 degrees, got {d}")),
        }
    }
}

/// Which argument an h-function conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Conditioning {
    /// `∂C/∂u`: distribution of the second argument given the first.
    First,
    /// `∂C/∂v`: distribution of the first argument given the second.
    Second,
}

/// A point of the open unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitPair {
    pub u: f64,
    pub v: f64,
}

impl UnitPair {
    /// Builds a pair, clamping both coordinates into `[EPS, 1 - EPS]`.
    pub fn new(u: f64, v: f64) -> Self {
        UnitPair { u: clamp_unit(u), v: clamp_unit(v) }
    }
}

/// Column-oriented sample of unit pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairSample {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl PairSample {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::Input(format!("pair sample columns differ in length: {} vs {}", u.len(), v.len())));
        }
        Ok(PairSample { u, v })
    }

    pub fn from_pairs(pairs: &[UnitPair]) -> Self {
        PairSample { u: pairs.iter().map(|p| p.u).collect(), v: pairs.iter().map(|p| p.v).collect() }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = UnitPair> + '_ {
        self.u.iter().zip(&self.v).map(|(&u, &v)| UnitPair::new(u, v))
    }
}

/// A fully specified pair copula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCopula {
    family: CopulaFamily,
    theta: Vec<f64>,
    #[serde(default)]
    rotation: Rotation,
}

impl PairCopula {
    pub fn new(family: CopulaFamily, theta: Vec<f64>, rotation: Rotation) -> Result<Self> {
        family.validate(&theta)?;
        if rotation != Rotation::R0 && !family.is_rotatable() {
            return Err(Error::Domain(format!("{family} does not admit a {} degree rotation", rotation.degrees())));
        }
        Ok(PairCopula { family, theta, rotation })
    }

    pub fn independence() -> Self {
        PairCopula { family: CopulaFamily::Independence, theta: vec![], rotation: Rotation::R0 }
    }

    pub fn gaussian(rho: f64) -> Result<Self> {
        Self::new(CopulaFamily::Gaussian, vec![rho], Rotation::R0)
    }

    /// Re-checks the invariants, e.g. after deserialisation.
    pub fn validate(&self) -> Result<()> {
        PairCopula::new(self.family, self.theta.clone(), self.rotation).map(|_| ())
    }

    pub fn family(&self) -> CopulaFamily {
        self.family
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn rotation(&self) -> Rotation {
        self.rotation
    }

    pub fn n_params(&self) -> usize {
        self.family.n_params()
    }

    pub fn is_independence(&self) -> bool {
        self.family == CopulaFamily::Independence
    }

    pub fn pdf(&self, p: UnitPair) -> f64 {
        self.ln_pdf(p.u, p.v).exp()
    }

    /// Log-density at `(u, v)`; arguments are clamped.
    pub fn ln_pdf(&self, u: f64, v: f64) -> f64 {
        let (a, b) = self.rotation.to_base(clamp_unit(u), clamp_unit(v));
        family::ln_pdf(self.family, &self.theta, clamp_unit(a), clamp_unit(b))
    }

    pub fn cdf(&self, p: UnitPair) -> f64 {
        let (u, v) = (clamp_unit(p.u), clamp_unit(p.v));
        let base = |a: f64, b: f64| family::cdf(self.family, &self.theta, clamp_unit(a), clamp_unit(b));
        let c = match self.rotation {
            Rotation::R0 => base(u, v),
            Rotation::R90 => v - base(1.0 - u, v),
            Rotation::R180 => u + v - 1.0 + base(1.0 - u, 1.0 - v),
            Rotation::R270 => u - base(u, 1.0 - v),
        };
        c.clamp(0.0, 1.0)
    }

    pub fn hfunc(&self, p: UnitPair, which: Conditioning) -> f64 {
        match which {
            Conditioning::First => self.h1(p.u, p.v),
            Conditioning::Second => self.h2(p.u, p.v),
        }
    }

    /// `∂C/∂u (u, v)`.
    pub fn h1(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        let h = |a: f64, b: f64| family::h1(self.family, &self.theta, clamp_unit(a), clamp_unit(b));
        clamp_unit(match self.rotation {
            Rotation::R0 => h(u, v),
            Rotation::R90 => h(1.0 - u, v),
            Rotation::R180 => 1.0 - h(1.0 - u, 1.0 - v),
            Rotation::R270 => 1.0 - h(u, 1.0 - v),
        })
    }

    /// `∂C/∂v (u, v)`.
    pub fn h2(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        let h = |a: f64, b: f64| family::h1(self.family, &self.theta, clamp_unit(a), clamp_unit(b));
        clamp_unit(match self.rotation {
            Rotation::R0 => h(v, u),
            Rotation::R90 => 1.0 - h(v, 1.0 - u),
            Rotation::R180 => 1.0 - h(1.0 - v, 1.0 - u),
            Rotation::R270 => h(1.0 - v, u),
        })
    }

    /// Inverts the h-function in its free argument: returns `x` with
    /// `hfunc((cond, x), First) = w` or `hfunc((x, cond), Second) = w`.
    pub fn hinv(&self, w: f64, cond: f64, which: Conditioning) -> Result<f64> {
        let (w, c) = (clamp_unit(w), clamp_unit(cond));
        let inv = |w: f64, c: f64| family::h1_inv(self.family, &self.theta, clamp_unit(w), clamp_unit(c));
        let x = match (which, self.rotation) {
            (_, Rotation::R0) => inv(w, c)?,
            (_, Rotation::R180) => 1.0 - inv(1.0 - w, 1.0 - c)?,
            (Conditioning::First, Rotation::R90) => inv(w, 1.0 - c)?,
            (Conditioning::Second, Rotation::R90) => 1.0 - inv(1.0 - w, c)?,
            (Conditioning::First, Rotation::R270) => 1.0 - inv(1.0 - w, c)?,
            (Conditioning::Second, Rotation::R270) => inv(w, 1.0 - c)?,
        };
        if !x.is_finite() {
            return Err(Error::Numerical(format!("non-finite h-inverse for {self} at w={w}, cond={c}")));
        }
        Ok(clamp_unit(x))
    }

    pub fn hinv1(&self, w: f64, u: f64) -> Result<f64> {
        self.hinv(w, u, Conditioning::First)
    }

    /// In-place `hinv1` of many levels against one conditioning value; the
    /// conditioning transform is computed once for the elliptical families.
    pub fn hinv1_batch(&self, cond: f64, ws: &mut [f64]) -> Result<()> {
        let c = clamp_unit(cond);
        match self.family {
            CopulaFamily::Independence => {
                for w in ws.iter_mut() {
                    *w = clamp_unit(*w);
                }
            }
            CopulaFamily::Gaussian => {
                let rho = self.theta[0];
                let (s, m) = ((1.0 - rho * rho).sqrt(), rho * norm_quantile(c));
                for w in ws.iter_mut() {
                    *w = clamp_unit(norm_cdf(norm_quantile(clamp_unit(*w)) * s + m));
                }
            }
            CopulaFamily::StudentT => {
                let (rho, nu) = (self.theta[0], self.theta[1]);
                let x = t_quantile(c, nu);
                let s = ((nu + x * x) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
                for w in ws.iter_mut() {
                    *w = clamp_unit(t_cdf(t_quantile(clamp_unit(*w), nu + 1.0) * s + rho * x, nu));
                }
            }
            _ => {
                for w in ws.iter_mut() {
                    *w = self.hinv1(*w, c)?;
                }
            }
        }
        Ok(())
    }

    /// Kendall's tau.
    pub fn tau(&self) -> f64 {
        let t = self.family.tau(&self.theta);
        match self.rotation {
            Rotation::R0 | Rotation::R180 => t,
            Rotation::R90 | Rotation::R270 => -t,
        }
    }

    /// Sum of log-densities over a sample.
    pub fn loglik(&self, obs: &PairSample) -> f64 {
        if self.is_independence() {
            return 0.0;
        }
        obs.u.iter().zip(&obs.v).map(|(&u, &v)| self.ln_pdf(u, v)).sum()
    }

    /// Draws `n` i.i.d. pairs by conditional inversion.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<UnitPair>> {
        (0..n)
            .map(|_| {
                let u = clamp_unit(rng.random::<f64>());
                let w = rng.random::<f64>();
                Ok(UnitPair { u, v: self.hinv1(w, u)? })
            })
            .collect()
    }
}

impl fmt::Display for PairCopula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family)?;
        if self.rotation != Rotation::R0 {
            write!(f, "{}", self.rotation.degrees())?;
        }
        if !self.theta.is_empty() {
            let parts: Vec<String> = self.theta.iter().map(|t| format!("{t:.4}")).collect();
            write!(f, "({})", parts.join(", "))?;
        }
        Ok(())
    }
}

/// Kendall's tau link inverse for one-parameter families.
pub fn tau_to_param(family: CopulaFamily, tau: f64) -> Result<Vec<f64>> {
    family.param_from_tau(tau)
}

/// Free-function form of [`PairCopula::sample`].
pub fn sample_pair<R: Rng + ?Sized>(c: &PairCopula, n: usize, rng: &mut R) -> Result<Vec<UnitPair>> {
    c.sample(n, rng)
}

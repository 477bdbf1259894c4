//! Scalar special functions used by the copula calculus.
//!
//! Gamma, beta and inverse error functions come from `statrs`, the
//! complementary error function from `libm`; this module adds the
//! distribution-level wrappers (normal and Student t CDF/quantile), the
//! bivariate normal orthant probability, the Debye function and a small
//! adaptive quadrature routine.
#![allow(clippy::excessive_precision)]

use libm::erfc;
use statrs::function::beta::{beta_reg, inv_beta_reg};
use statrs::function::erf::erfc_inv;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

const FRAC_1_2PI: f64 = 1.0 / (2.0 * PI);
const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal quantile.
#[inline]
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Student t CDF with `nu` degrees of freedom (real `nu > 0`).
pub fn t_cdf(x: f64, nu: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let x2 = x * x;
    if x2 < nu {
        // central region: P(|T| < |x|) = I_{x²/(ν+x²)}(1/2, ν/2)
        let central = beta_reg(0.5, 0.5 * nu, x2 / (nu + x2));
        if x >= 0.0 {
            0.5 + 0.5 * central
        } else {
            0.5 - 0.5 * central
        }
    } else {
        let tail = 0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + x2));
        if x >= 0.0 {
            1.0 - tail
        } else {
            tail
        }
    }
}

/// Log-density of the Student t distribution.
#[inline]
pub fn t_ln_pdf(x: f64, nu: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln() - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
}

/// Student t quantile with `nu` degrees of freedom.
///
/// Hill's (1970) approximation, polished by Halley steps on the CDF; falls
/// back to inverting the incomplete beta function if the polish stalls.
pub fn t_quantile(p: f64, nu: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    let (q, sign) = if p < 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
    let mut x = hill_t(2.0 * q, nu);
    // work on the lower tail, where the CDF has full relative precision
    if x.is_finite() {
        x = -x;
        for _ in 0..4 {
            let f = t_cdf(x, nu) - q;
            let d = t_ln_pdf(x, nu).exp();
            if d <= 0.0 || !d.is_finite() {
                break;
            }
            let r = f / d;
            // f'/f of the t density is -(ν+1)x/(ν+x²)
            let dlog = -(nu + 1.0) * x / (nu + x * x);
            let step = r / (1.0 - 0.5 * r * dlog).max(0.5);
            x -= step;
            if step.abs() <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
                return -x * sign;
            }
        }
        if ((t_cdf(x, nu) - q) / q).abs() < 1e-13 {
            return -x * sign;
        }
    }
    t_quantile_beta(q, nu) * sign
}

/// Upper quantile for two-tailed probability `p2` (Hill, ACM algorithm 396).
fn hill_t(p2: f64, n: f64) -> f64 {
    if (n - 1.0).abs() < 1e-12 {
        let a = p2 * PI / 2.0;
        return a.cos() / a.sin();
    }
    if (n - 2.0).abs() < 1e-12 {
        return (2.0 / (p2 * (2.0 - p2)) - 2.0).sqrt();
    }
    let a = 1.0 / (n - 0.5);
    let b = 48.0 / (a * a);
    let mut c = ((20700.0 * a / b - 98.0) * a - 16.0) * a + 96.36;
    let d = ((94.5 / (b + c) - 3.0) / b + 1.0) * (a * PI / 2.0).sqrt() * n;
    let x = d * p2;
    let mut y = x.powf(2.0 / n);
    if y > 0.05 + a {
        let x = norm_quantile(0.5 * p2);
        y = x * x;
        if n < 5.0 {
            c += 0.3 * (n - 4.5) * (x + 0.6);
        }
        c += (((0.05 * d * x - 5.0) * x - 7.0) * x - 2.0) * x + b;
        y = (((((0.4 * y + 6.3) * y + 36.0) * y + 94.5) / c - y - 3.0) / b + 1.0) * x;
        y = (a * y * y).exp_m1();
    } else {
        y = ((1.0 / (((n + 6.0) / (n * y) - 0.089 * d - 0.822) * (n + 2.0) * 3.0) + 0.5 / (n + 4.0)) * y - 1.0)
            * (n + 1.0)
            / (n + 2.0)
            + 1.0 / y;
    }
    (n * y).sqrt()
}

fn t_quantile_beta(q: f64, nu: f64) -> f64 {
    let mut x = if q > 0.25 {
        // near the median invert the central form to avoid cancellation
        let z = inv_beta_reg(0.5, 0.5 * nu, 1.0 - 2.0 * q);
        (nu * z / (1.0 - z)).sqrt()
    } else {
        let y = inv_beta_reg(0.5 * nu, 0.5, 2.0 * q);
        (nu * (1.0 - y) / y).sqrt()
    };
    x = -x;
    if !x.is_finite() {
        return x;
    }
    for _ in 0..3 {
        let f = t_cdf(x, nu) - q;
        let d = t_ln_pdf(x, nu).exp();
        if d <= 0.0 || !d.is_finite() {
            break;
        }
        let step = f / d;
        x -= step;
        if step.abs() <= 1e-14 * (1.0 + x.abs()) {
            break;
        }
    }
    -x
}

/// Lower orthant probability `P(X <= h, Y <= k)` of a standard bivariate
/// normal with correlation `r`.
///
/// Drezner-Wesolowsky integration as modified by Genz for double precision
/// and for `|r|` close to one.
pub fn bvn_cdf(h: f64, k: f64, r: f64) -> f64 {
    bvnu(-h, -k, r)
}

const GL6: [(f64, f64); 3] = [
    (0.1713244923791705e+00, -0.9324695142031522e+00),
    (0.3607615730481384e+00, -0.6612093864662647e+00),
    (0.4679139345726904e+00, -0.2386191860831970e+00),
];
const GL12: [(f64, f64); 6] = [
    (0.4717533638651177e-01, -0.9815606342467191e+00),
    (0.1069393259953183e+00, -0.9041172563704750e+00),
    (0.1600783285433464e+00, -0.7699026741943050e+00),
    (0.2031674267230659e+00, -0.5873179542866171e+00),
    (0.2334925365383547e+00, -0.3678314989981802e+00),
    (0.2491470458134029e+00, -0.1252334085114692e+00),
];
const GL20: [(f64, f64); 10] = [
    (0.1761400713915212e-01, -0.9931285991850949e+00),
    (0.4060142980038694e-01, -0.9639719272779138e+00),
    (0.6267204833410906e-01, -0.9122344282513259e+00),
    (0.8327674157670475e-01, -0.8391169718222188e+00),
    (0.1019301198172404e+00, -0.7463319064601508e+00),
    (0.1181945319615184e+00, -0.6360536807265150e+00),
    (0.1316886384491766e+00, -0.5108670019508271e+00),
    (0.1420961093183821e+00, -0.3737060887154196e+00),
    (0.1491729864726037e+00, -0.2277858511416451e+00),
    (0.1527533871307259e+00, -0.7652652113349733e-01),
];

// upper orthant P(X > dh, Y > dk)
fn bvnu(dh: f64, dk: f64, r: f64) -> f64 {
    let quad: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };
    let h = dh;
    let mut k = dk;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        if r.abs() > 0.0 {
            let hs = (h * h + k * k) / 2.0;
            let asr = r.asin();
            for &(w, x) in quad {
                for is in [-1.0, 1.0] {
                    let sn = (asr * (is * x + 1.0) / 2.0).sin();
                    bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
                }
            }
            bvn *= asr / (4.0 * PI);
        }
        bvn += norm_cdf(-h) * norm_cdf(-k);
        return bvn;
    }
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = a_s.sqrt();
        let b_s = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        let asr = -(b_s / a_s + hk) / 2.0;
        if asr > -100.0 {
            bvn = a * asr.exp() * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        }
        if hk > -100.0 {
            let b = b_s.sqrt();
            bvn -= (-hk / 2.0).exp() * SQRT_2PI * norm_cdf(-b / a) * b * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
        }
        a /= 2.0;
        for &(w, x) in quad {
            for is in [-1.0, 1.0] {
                let xs0 = a * (is * x + 1.0);
                let xs = xs0 * xs0;
                let rs = (1.0 - xs).sqrt();
                let asr = -(b_s / xs + hk) / 2.0;
                if asr > -100.0 {
                    bvn += a
                        * w
                        * asr.exp()
                        * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs - (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn = -bvn * FRAC_1_2PI;
    }
    if r > 0.0 {
        bvn += norm_cdf(-h.max(k));
    } else {
        bvn = -bvn;
        if h < k {
            if h < 0.0 {
                bvn += norm_cdf(k) - norm_cdf(h);
            } else {
                bvn += norm_cdf(-h) - norm_cdf(-k);
            }
        }
    }
    bvn.max(0.0)
}

/// First-order Debye function `D1(x) = (1/x) ∫_0^x t/(e^t - 1) dt`.
pub fn debye1(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x < 0.0 {
        return debye1(-x) - x / 2.0;
    }
    let f = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
    integrate(f, 0.0, x, 1e-14) / x
}

const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * GK_WK[7];
    let mut gauss = fc * GK_WG[3];
    for j in 0..7 {
        let dx = h * GK_X[j];
        let s = f(c - dx) + f(c + dx);
        kron += GK_WK[j] * s;
        if j % 2 == 1 {
            gauss += GK_WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, whole: (f64, f64), depth: u32) -> f64 {
        let (val, err) = whole;
        if err <= tol.max(1e-15 * val.abs()) || depth >= 40 {
            return val;
        }
        let m = 0.5 * (a + b);
        let left = gk15(f, a, m);
        let right = gk15(f, m, b);
        rec(f, a, m, tol / 2.0, left, depth + 1) + rec(f, m, b, tol / 2.0, right, depth + 1)
    }
    if a == b {
        return 0.0;
    }
    let whole = gk15(&f, a, b);
    rec(&f, a, b, tol, whole, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_quantile_inverts_cdf() {
        for &p in &[1e-10, 1e-4, 0.025, 0.3, 0.5, 0.8, 0.975, 1.0 - 1e-9] {
            let x = norm_quantile(p);
            assert!((norm_cdf(x) - p).abs() < 1e-14 + 1e-12 * p, "p={p}");
        }
        assert!((norm_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
    }

    #[test]
    fn t_quantile_inverts_cdf() {
        for &nu in &[2.0001, 3.0, 4.5, 10.0, 49.0] {
            for &p in &[1e-10, 1e-5, 0.01, 0.3, 0.49, 0.5, 0.51, 0.75, 0.99, 1.0 - 1e-8] {
                let x = t_quantile(p, nu);
                let back = t_cdf(x, nu);
                assert!(
                    (back - p).abs() < 1e-12 * (1.0 + 1.0 / p.min(1.0 - p)) * p.min(1.0 - p) + 1e-15,
                    "nu={nu} p={p} x={x} back={back}"
                );
            }
        }
        // t_3 97.5% point
        assert!((t_quantile(0.975, 3.0) - 3.182_446_305_284_263).abs() < 1e-10);
    }

    #[test]
    fn t_cdf_matches_cauchy_at_one_dof() {
        for &x in &[-20.0f64, -1.0, -0.1, 0.0, 0.3, 2.0, 50.0] {
            let expect = 0.5 + x.atan() / PI;
            assert!((t_cdf(x, 1.0) - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn bvn_reduces_to_product_at_zero_correlation() {
        for &(h, k) in &[(-1.0, 0.5), (0.0, 0.0), (2.0, -0.3)] {
            let p = bvn_cdf(h, k, 0.0);
            assert!((p - norm_cdf(h) * norm_cdf(k)).abs() < 1e-15);
        }
        // P(X<=0, Y<=0) = 1/4 + asin(r)/(2π)
        for &r in &[-0.95f64, -0.5, 0.2, 0.6, 0.93, 0.99] {
            let expect = 0.25 + r.asin() / (2.0 * PI);
            assert!((bvn_cdf(0.0, 0.0, r) - expect).abs() < 1e-13, "r={r}");
        }
    }

    #[test]
    fn bvn_matches_quadrature_of_conditional() {
        // P(X<=h, Y<=k) = ∫_{-∞}^{h} φ(x) Φ((k - r x)/sqrt(1-r²)) dx
        for &r in &[-0.97f64, -0.4, 0.5, 0.95] {
            for &(h, k) in &[(-0.7, 0.4), (1.2, 1.5), (0.3, -2.0)] {
                let s = (1.0 - r * r).sqrt();
                let oracle = integrate(|x| norm_pdf(x) * norm_cdf((k - r * x) / s), -12.0, h, 1e-15);
                assert!((bvn_cdf(h, k, r) - oracle).abs() < 1e-12, "r={r} h={h} k={k}");
            }
        }
    }

    #[test]
    fn debye_known_values() {
        assert!((debye1(1e-12) - 1.0).abs() < 1e-9);
        // D1(1) = 0.777504634112248...
        assert!((debye1(1.0) - 0.777_504_634_112_248_3).abs() < 1e-12);
        assert!((debye1(-1.0) - (0.777_504_634_112_248_3 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn adaptive_quadrature_polynomials_and_exp() {
        assert!((integrate(|x| x * x, 0.0, 3.0, 1e-13) - 9.0).abs() < 1e-12);
        assert!((integrate(|x: f64| x.exp(), 0.0, 1.0, 1e-14) - (1f64.exp() - 1.0)).abs() < 1e-13);
    }
}

//! Small descriptive statistics helpers.

/// Kendall's tau-b of paired samples (O(n²), handles ties).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut ties_x, mut ties_y) = (0i64, 0i64);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            }
            if dx == 0.0 {
                ties_x += 1;
            } else if dy == 0.0 {
                ties_y += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n1 = (concordant + discordant + ties_x) as f64;
    let n2 = (concordant + discordant + ties_y) as f64;
    if n1 == 0.0 || n2 == 0.0 {
        return 0.0;
    }
    (concordant - discordant) as f64 / (n1 * n2).sqrt()
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (denominator `n - 1`).
pub fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Lag-`lag` sample autocorrelation.
pub fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    cross_correlation(x, x, lag)
}

/// Correlation between `a[t]` and `b[t - lag]`.
pub fn cross_correlation(a: &[f64], b: &[f64], lag: usize) -> f64 {
    let n = a.len().min(b.len());
    let ma = mean(&a[..n]);
    let mb = mean(&b[..n]);
    let num: f64 = (lag..n).map(|t| (a[t] - ma) * (b[t - lag] - mb)).sum();
    let va: f64 = a[..n].iter().map(|v| (v - ma).powi(2)).sum();
    let vb: f64 = b[..n].iter().map(|v| (v - mb).powi(2)).sum();
    num / (va * vb).sqrt()
}

/// One-sample Kolmogorov-Smirnov test of `sample` against U(0,1).
///
/// Returns `(D, p_value)`; the p-value uses the Kolmogorov limit law with
/// Stephens' finite-sample correction.
pub fn ks_uniform(sample: &[f64]) -> (f64, f64) {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let v = v.clamp(0.0, 1.0);
            ((i as f64 + 1.0) / n - v).max(v - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let en = n.sqrt();
    (d, kolmogorov_sf((en + 0.12 + 0.11 / en) * d))
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..200 {
        let j = j as f64;
        let term = 2.0 * (-2.0 * j * j * lambda * lambda).exp();
        sum += if j as i64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_of_monotone_and_reversed() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 4.0, 6.0, 8.0, 10.0];
        assert_eq!(kendall_tau(&x, &y), 1.0);
        let r: Vec<f64> = y.iter().rev().copied().collect();
        assert_eq!(kendall_tau(&x, &r), -1.0);
    }

    #[test]
    fn tau_small_example() {
        // pairs: (1,1) (2,3) (3,2): concordant 2, discordant 1
        let t = kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]);
        assert!((t - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_critical_value() {
        // 1% asymptotic critical value is 1.6276
        assert!((kolmogorov_sf(1.627_61) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(1.358_1) - 0.05).abs() < 1e-4);
    }

    #[test]
    fn ks_accepts_grid_rejects_skew() {
        let grid: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!(ks_uniform(&grid).1 > 0.99);
        let skew: Vec<f64> = grid.iter().map(|u| u * u).collect();
        assert!(ks_uniform(&skew).1 < 0.01);
    }

    #[test]
    fn sd_of_known_sample() {
        assert!((std_dev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]) - 2.138_089_935_299_395).abs() < 1e-12);
    }
}

//! Small statistical helpers shared by the estimators, the bootstrap
//! procedures and the study harness.

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with the `n - 1` divisor (two-pass).
pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

/// `ceil(n * p)` as a 1-based rank, guarded against representation noise
/// in `p` (e.g. `1000 * 0.1`), clamped to `[1, n]`.
pub fn ceil_rank(n: usize, p: f64) -> usize {
    let x = n as f64 * p;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * x.abs().max(1.0) { r } else { x.ceil() };
    (k as usize).clamp(1, n.max(1))
}

/// The `k`-th smallest value (1-based) by partial selection. Reorders `xs`.
pub fn kth_smallest(xs: &mut [f64], k: usize) -> f64 {
    assert!(k >= 1 && k <= xs.len(), "rank {k} out of range 1..={}", xs.len());
    let (_, v, _) = xs.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
    *v
}

/// Empirical quantile as the `ceil(N q)`-th order statistic.
pub fn lcl_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("quantile of an empty list".into()));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("quantile level {q} not in (0, 1)")));
    }
    let mut v = values.to_vec();
    let k = ceil_rank(v.len(), q);
    Ok(kth_smallest(&mut v, k))
}

/// Number of raw values outside `[0, 1]`.
pub fn falling_outside_count(raw: &[f64]) -> usize {
    raw.iter().filter(|v| !(0.0..=1.0).contains(*v)).count()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = mean(&lx);
    let my = mean(&ly);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let sq = effective_n.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

/// Two-sample Kolmogorov–Smirnov test (asymptotic p-value).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    KsResult {
        statistic: d,
        p_value: ks_p_value(d, na * nb / (na + nb)),
    }
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut s = sample.to_vec();
    s.sort_by(|x, y| x.total_cmp(y));
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max(((i + 1) as f64 / n - f).abs()).max((f - i as f64 / n).abs());
    }
    KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_rank_handles_float_noise() {
        assert_eq!(ceil_rank(1000, 0.1), 100);
        assert_eq!(ceil_rank(10, 0.1), 1);
        assert_eq!(ceil_rank(10, 0.9), 9);
        assert_eq!(ceil_rank(200, 0.1), 20);
        assert_eq!(ceil_rank(7, 0.3), 3);
        assert_eq!(ceil_rank(5, 0.0), 1);
    }

    #[test]
    fn quantile_of_tenths() {
        let v: Vec<f64> = (1..=10).rev().map(|i| i as f64 / 10.0).collect();
        assert_eq!(lcl_quantile(&v, 0.9).unwrap(), 0.9);
        assert!(lcl_quantile(&[], 0.9).is_err());
    }

    #[test]
    fn falling_outside() {
        assert_eq!(falling_outside_count(&[0.0, 0.5, 1.0]), 0);
        assert_eq!(falling_outside_count(&[-0.1, 1.2, 0.3]), 2);
    }

    #[test]
    fn kolmogorov_known_values() {
        // P(K > 1.358) is the classical 5% point.
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.628) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn ks_identical_samples() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &a);
        assert_eq!(r.statistic, 0.0);
        assert!(r.p_value > 0.99);
        let b: Vec<f64> = a.iter().map(|x| x + 1000.0).collect();
        assert_eq!(ks_two_sample(&a, &b).statistic, 1.0);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [10.0, 100.0, 1000.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.8)).collect();
        assert!((loglog_slope(&x, &y) - 0.8).abs() < 1e-12);
    }
}

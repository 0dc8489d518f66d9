//! Small descriptive and distributional helpers shared by the analysis,
//! backtest and test code.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with divisor `n - 1`.
pub fn variance(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64
}

pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Inverse empirical CDF (`inf{x : F_n(x) >= p}`) of an already sorted sample.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if p <= 0.0 {
        return sorted[0];
    }
    let k = (p * n as f64).ceil() as usize;
    sorted[k.clamp(1, n) - 1]
}

pub fn quantile(x: &[f64], p: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, p)
}

pub fn norm_ppf(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

pub fn norm_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Upper tail `P(χ²_df > x)`.
pub fn chi2_sf(x: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::InvalidInput("chi-square needs df >= 1".into()));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    let d = ChiSquared::new(df as f64).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(d.sf(x))
}

/// Asymptotic Kolmogorov distribution tail `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // small-x form converges faster
        let c = (2.0 * std::f64::consts::PI).sqrt() / x;
        let mut s = 0.0;
        for k in 1..=50 {
            let kk = (2 * k - 1) as f64;
            s += (-kk * kk * std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x)).exp();
        }
        return (1.0 - c * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
/// Returns the statistic `D_n` and its p-value; the Stephens correction
/// `(√n + 0.12 + 0.11/√n) D` is applied before the asymptotic tail.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let n = sample.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    let sq = nf.sqrt();
    (d, kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empirical_quantile_is_left_continuous_inverse() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.25), 1.0);
        assert_eq!(quantile_sorted(&s, 0.26), 2.0);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
    }

    #[test]
    fn kolmogorov_tail_reference_values() {
        // P(K > 1.3581) ≈ 0.05, P(K > 1.6276) ≈ 0.01
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-3);
        assert!((kolmogorov_sf(0.5) - 0.9639).abs() < 1e-3);
    }

    #[test]
    fn ks_uniform_grid_is_accepted() {
        let x: Vec<f64> = (0..200).map(|i| (i as f64 + 0.5) / 200.0).collect();
        let (d, p) = ks_test(&x, |v| v.clamp(0.0, 1.0));
        assert!(d < 0.01);
        assert!(p > 0.99);
    }

    #[test]
    fn normal_third_quantile() {
        assert!((norm_ppf(1.0 / 3.0) + 0.430_727_3).abs() < 1e-7);
    }

    #[test]
    fn chi2_tail() {
        assert!((chi2_sf(5.991_464_5, 2).unwrap() - 0.05).abs() < 1e-7);
        assert_eq!(chi2_sf(0.0, 4).unwrap(), 1.0);
    }
}

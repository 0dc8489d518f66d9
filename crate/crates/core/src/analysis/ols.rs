//! Ordinary least squares with the overall F test.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    /// Intercept first.
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub r2: f64,
    pub f_stat: f64,
    pub f_pvalue: f64,
    pub n: usize,
    pub sigma2: f64,
}

impl OlsFit {
    pub fn t_stat(&self, i: usize) -> f64 {
        self.coef[i] / self.se[i]
    }
}

/// Regresses `y` on `[1, x]`. `x` is `n × p`; the F test is for all slopes.
pub fn ols(y: &[f64], x: &DMatrix<f64>) -> Result<OlsFit> {
    let (coef, resid, xtx_inv) = ols_raw(y, x)?;
    let n = y.len();
    let p = x.ncols() + 1;
    let ybar = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let sse: f64 = resid.iter().map(|v| v * v).sum();
    let dof = (n - p) as f64;
    let sigma2 = sse / dof;
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    let (f_stat, f_pvalue) = if p > 1 {
        let num = (sst - sse).max(0.0) / (p - 1) as f64;
        if sigma2 <= 0.0 {
            (f64::INFINITY, 0.0)
        } else {
            let f = num / sigma2;
            let d = FisherSnedecor::new((p - 1) as f64, dof)
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            (f, d.sf(f))
        }
    } else {
        (f64::NAN, f64::NAN)
    };
    let se = (0..p).map(|i| (sigma2 * xtx_inv[(i, i)]).max(0.0).sqrt()).collect();
    Ok(OlsFit {
        coef: coef.iter().copied().collect(),
        se,
        r2,
        f_stat,
        f_pvalue,
        n,
        sigma2,
    })
}

/// Coefficients, residuals and `(X′X)⁻¹` with an intercept column prepended.
pub(crate) fn ols_raw(
    y: &[f64],
    x: &DMatrix<f64>,
) -> Result<(DVector<f64>, DVector<f64>, DMatrix<f64>)> {
    let n = y.len();
    if x.nrows() != n {
        return Err(Error::Dimension(format!("y has {n} rows, X has {}", x.nrows())));
    }
    let p = x.ncols() + 1;
    if n <= p {
        return Err(Error::InvalidInput(format!("OLS needs more than {p} observations")));
    }
    let mut xd = DMatrix::from_element(n, p, 1.0);
    xd.columns_mut(1, p - 1).copy_from(x);
    let yv = DVector::from_column_slice(y);
    let xtx = xd.transpose() * &xd;
    let chol = nalgebra::Cholesky::new(xtx.clone())
        .ok_or_else(|| Error::Singular("regressors are collinear".into()))?;
    let diag_min = (0..p).map(|i| chol.l_dirty()[(i, i)]).fold(f64::INFINITY, f64::min);
    let diag_max = (0..p).map(|i| chol.l_dirty()[(i, i)]).fold(0.0, f64::max);
    if diag_min <= 1e-10 * diag_max {
        return Err(Error::Singular("regressors are collinear".into()));
    }
    let coef = chol.solve(&(xd.transpose() * &yv));
    let resid = &yv - &xd * &coef;
    Ok((coef, resid, chol.inverse()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = DMatrix::from_fn(10, 1, |i, _| i as f64);
        let y: Vec<f64> = (0..10).map(|i| 3.0 + 2.0 * i as f64).collect();
        let f = ols(&y, &x).unwrap();
        assert!((f.coef[0] - 3.0).abs() < 1e-12);
        assert!((f.coef[1] - 2.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert_eq!(f.f_pvalue, 0.0);
    }

    #[test]
    fn f_test_matches_t_squared_for_one_slope() {
        let x = DMatrix::from_fn(30, 1, |i, _| ((i * 7) % 11) as f64);
        let y: Vec<f64> = (0..30).map(|i| ((i * 5) % 13) as f64 * 0.3 + 0.1 * x[(i, 0)]).collect();
        let f = ols(&y, &x).unwrap();
        assert!((f.f_stat - f.t_stat(1).powi(2)).abs() < 1e-9 * f.f_stat.max(1.0));
    }

    #[test]
    fn collinear_is_rejected() {
        let x = DMatrix::from_fn(10, 2, |i, j| if j == 0 { i as f64 } else { 2.0 * i as f64 });
        assert!(ols(&[0.0; 10], &x).is_err());
    }
}

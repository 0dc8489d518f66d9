//! Element-wise regressions of return correlations on sentiment correlations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ols::{ols, OlsFit};
use crate::error::{Error, Result};
use crate::linalg::{cov_to_corr, diff_rows, sample_cov};
use crate::serde_mat;

/// Strictly-upper-triangular entries in row-major order.
pub fn vechl(m: &DMatrix<f64>) -> Vec<f64> {
    let k = m.nrows();
    let mut v = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            v.push(m[(i, j)]);
        }
    }
    v
}

/// Symmetric matrix with unit diagonal whose `vechl` is `v`.
pub fn unvechl(v: &[f64], k: usize) -> Result<DMatrix<f64>> {
    if v.len() != k * k.saturating_sub(1) / 2 {
        return Err(Error::Dimension(format!("{} entries do not fill a {k}×{k} matrix", v.len())));
    }
    let mut m = DMatrix::identity(k, k);
    let mut it = v.iter();
    for i in 0..k {
        for j in i + 1..k {
            let x = *it.next().expect("length checked");
            m[(i, j)] = x;
            m[(j, i)] = x;
        }
    }
    Ok(m)
}

/// `vechl` mask of pairs sharing a (known) sector.
pub fn same_sector_mask(sectors: &[Option<String>]) -> Vec<bool> {
    let k = sectors.len();
    let mut v = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            v.push(matches!((&sectors[i], &sectors[j]), (Some(a), Some(b)) if a == b));
        }
    }
    v
}

/// OLS of `vechl(target)` on `[1, vechl(model)]`, optionally on a subset of pairs.
pub fn pair_regression(target: &DMatrix<f64>, model: &DMatrix<f64>, mask: Option<&[bool]>) -> Result<OlsFit> {
    if target.shape() != model.shape() || !target.is_square() {
        return Err(Error::Dimension("correlation matrices differ in size".into()));
    }
    let y = vechl(target);
    let x = vechl(model);
    let keep: Vec<usize> = match mask {
        Some(m) if m.len() != y.len() => {
            return Err(Error::Dimension("pair mask does not match the matrix size".into()))
        }
        Some(m) => (0..y.len()).filter(|&i| m[i]).collect(),
        None => (0..y.len()).collect(),
    };
    let ys: Vec<f64> = keep.iter().map(|&i| y[i]).collect();
    let xs = DMatrix::from_fn(keep.len(), 1, |r, _| x[keep[r]]);
    ols(&ys, &xs)
}

/// Covariance of the residuals `z^i_t` of `r^i_t = α^i + β^i R_t + z^i_t`.
pub fn one_factor_residual_cov(returns: &DMatrix<f64>, market: &[f64]) -> Result<DMatrix<f64>> {
    let (t, k) = returns.shape();
    if market.len() != t {
        return Err(Error::Dimension(format!("{t} return rows but {} factor values", market.len())));
    }
    let x = DMatrix::from_column_slice(t, 1, market);
    let mut z = DMatrix::zeros(t, k);
    for i in 0..k {
        let y: Vec<f64> = returns.column(i).iter().copied().collect();
        let (_, resid, _) = super::ols::ols_raw(&y, &x)?;
        z.set_column(i, &resid);
    }
    Ok(sample_cov(&z))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrRegression {
    /// `short`, `MLNSL` or `Obs`.
    pub model: String,
    /// `ret` or `ret_resid`.
    pub target: String,
    pub same_sector: bool,
    pub n_pairs: usize,
    pub alpha: f64,
    pub beta: f64,
    pub r2: f64,
    pub f_stat: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationStudy {
    #[serde(with = "serde_mat")]
    pub c_ret: DMatrix<f64>,
    #[serde(with = "serde_mat")]
    pub c_short: DMatrix<f64>,
    #[serde(with = "serde_mat")]
    pub c_mlnsl: DMatrix<f64>,
    #[serde(with = "serde_mat")]
    pub c_obs: DMatrix<f64>,
    #[serde(with = "serde_mat")]
    pub c_ret_resid: DMatrix<f64>,
    pub regressions: Vec<CorrRegression>,
}

pub struct CorrelationInputs<'a> {
    /// `T × K` demeaned log-returns.
    pub returns: &'a DMatrix<f64>,
    pub return_assets: &'a [String],
    /// Fitted `Q_short` of the MLSS model.
    pub q_short: &'a DMatrix<f64>,
    /// Fitted state covariance of the MLNSL model.
    pub q_mlnsl: &'a DMatrix<f64>,
    /// Observed sentiment levels, `T' × K`.
    pub sentiment: &'a DMatrix<f64>,
    pub sentiment_assets: &'a [String],
    /// Market factor returns `R_t`.
    pub market: &'a [f64],
    pub sectors: &'a [Option<String>],
}

pub fn correlation_regression(inp: &CorrelationInputs) -> Result<CorrelationStudy> {
    if inp.return_assets != inp.sentiment_assets {
        return Err(Error::InvalidInput("return and sentiment asset orderings differ".into()));
    }
    let k = inp.return_assets.len();
    let sizes = [
        inp.returns.ncols(),
        inp.q_short.nrows(),
        inp.q_mlnsl.nrows(),
        inp.sentiment.ncols(),
        inp.sectors.len(),
    ];
    if sizes.iter().any(|&s| s != k) {
        return Err(Error::Dimension(format!("inputs do not all have K = {k} assets: {sizes:?}")));
    }
    let c_ret = cov_to_corr(&sample_cov(inp.returns))?;
    let c_short = cov_to_corr(inp.q_short)?;
    let c_mlnsl = cov_to_corr(inp.q_mlnsl)?;
    let c_obs = cov_to_corr(&sample_cov(&diff_rows(inp.sentiment)))?;
    let c_ret_resid = cov_to_corr(&one_factor_residual_cov(inp.returns, inp.market)?)?;
    let mask = same_sector_mask(inp.sectors);
    let mut regressions = Vec::new();
    for (target_name, target) in [("ret", &c_ret), ("ret_resid", &c_ret_resid)] {
        for (model_name, model) in [("short", &c_short), ("MLNSL", &c_mlnsl), ("Obs", &c_obs)] {
            for same in [false, true] {
                let fit = pair_regression(target, model, same.then_some(mask.as_slice()))?;
                regressions.push(CorrRegression {
                    model: model_name.into(),
                    target: target_name.into(),
                    same_sector: same,
                    n_pairs: fit.n,
                    alpha: fit.coef[0],
                    beta: fit.coef[1],
                    r2: fit.r2,
                    f_stat: fit.f_stat,
                    p_value: fit.f_pvalue,
                });
            }
        }
    }
    Ok(CorrelationStudy { c_ret, c_short, c_mlnsl, c_obs, c_ret_resid, regressions })
}

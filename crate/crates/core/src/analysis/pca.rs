//! Principal-component market factor from asset returns.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cov_to_corr, sample_cov};
use crate::serde_mat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketFactor {
    /// `q_mrk × K`, orthonormal rows.
    #[serde(with = "serde_mat")]
    pub loadings: DMatrix<f64>,
    /// All eigenvalues of the return correlation matrix, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// `T × q_mrk`, `R_t = Λ^mrk r_t`.
    #[serde(with = "serde_mat")]
    pub factor_returns: DMatrix<f64>,
    pub q_mrk: usize,
}

impl MarketFactor {
    /// `M_t = Λ^mrk p_t` for a `T × K` price (or log-price) matrix.
    pub fn factor_level(&self, prices: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if prices.ncols() != self.loadings.ncols() {
            return Err(Error::Dimension("price matrix does not match loadings".into()));
        }
        Ok(prices * self.loadings.transpose())
    }

    pub fn explained_share(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        self.eigenvalues.iter().map(|v| v / total).collect()
    }
}

/// Eigendecomposition of the unconditional correlation matrix of `returns`
/// (`T × K`). Each loading vector is signed so that its entries sum to a
/// non-negative number.
pub fn pca_market(returns: &DMatrix<f64>, q_mrk: usize) -> Result<MarketFactor> {
    let (t, k) = returns.shape();
    if t <= k {
        return Err(Error::InvalidInput(format!("PCA needs T > K, got T = {t}, K = {k}")));
    }
    if q_mrk == 0 || q_mrk > k {
        return Err(Error::InvalidInput(format!("q_mrk = {q_mrk} out of range for K = {k}")));
    }
    if returns.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("returns contain non-finite values".into()));
    }
    let corr = cov_to_corr(&sample_cov(returns))?;
    let eig = SymmetricEigen::new(corr);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if eigenvalues[k - 1] < 1e-12 * eigenvalues[0] {
        return Err(Error::Singular("return correlation matrix is rank deficient".into()));
    }
    let mut loadings = DMatrix::zeros(q_mrk, k);
    for (r, &i) in order.iter().take(q_mrk).enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        if v.sum() < 0.0 {
            v = -v;
        }
        loadings.set_row(r, &v.transpose());
    }
    let factor_returns = returns * loadings.transpose();
    Ok(MarketFactor {
        loadings,
        eigenvalues,
        factor_returns,
        q_mrk,
    })
}

//! Small dense linear-algebra helpers shared by the filters and estimators.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Diagonal jitter levels tried, relative to the mean diagonal, before a
/// symmetric matrix is declared not positive definite.
pub const JITTER_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn symmetrize_mut(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Cholesky factorization with jitter escalation along [`JITTER_LADDER`].
///
/// Returns the factor and the absolute jitter that was added (0.0 when none).
pub fn cholesky_jitter(m: &DMatrix<f64>, what: &str) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{what} contains non-finite entries")));
    }
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok((c, 0.0));
    }
    let n = m.nrows();
    let scale = {
        let s = (0..n).map(|i| m[(i, i)].abs()).sum::<f64>() / n.max(1) as f64;
        if s > 0.0 {
            s
        } else {
            1.0
        }
    };
    for rel in JITTER_LADDER {
        let jitter = rel * scale;
        let mut shifted = m.clone();
        for i in 0..n {
            shifted[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(shifted) {
            return Ok((c, jitter));
        }
    }
    Err(Error::NotPsd(format!(
        "{what} failed Cholesky after jitter up to {:e}",
        JITTER_LADDER[JITTER_LADDER.len() - 1] * scale
    )))
}

/// Plain Cholesky, no jitter.
pub fn cholesky_strict(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{what} contains non-finite entries")));
    }
    Cholesky::new(m.clone()).ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))
}

pub fn log_det_cholesky(c: &Cholesky<f64, Dyn>) -> f64 {
    let l = c.l_dirty();
    (0..l.nrows()).map(|i| 2.0 * l[(i, i)].ln()).sum()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

/// Symmetric matrix with eigenvalues floored at `floor`.
pub fn clip_eigenvalues(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return m.clone();
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    if eig.eigenvalues.min() >= floor {
        return symmetrize(m);
    }
    let d = eig.eigenvalues.map(|v| v.max(floor));
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&d) * v.transpose()))
}

/// Symmetric square root `B` with `B Bᵀ = m` for a PSD matrix (negative
/// eigenvalues beyond `-tol` are rejected, smaller ones are zeroed).
pub fn psd_sqrt(m: &DMatrix<f64>, tol: f64, what: &str) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let scale = eig.eigenvalues.amax().max(1.0);
    if eig.eigenvalues.min() < -tol * scale {
        return Err(Error::NotPsd(format!(
            "{what} has eigenvalue {:e}",
            eig.eigenvalues.min()
        )));
    }
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose())
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

pub fn outer(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    a * b.transpose()
}

/// Correlation matrix implied by a covariance matrix.
pub fn cov_to_corr(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    let sd: Vec<f64> = (0..n).map(|i| cov[(i, i)].sqrt()).collect();
    if sd.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidInput(
            "covariance has a non-positive diagonal entry".into(),
        ));
    }
    let mut c = DMatrix::from_fn(n, n, |i, j| cov[(i, j)] / (sd[i] * sd[j]));
    for i in 0..n {
        c[(i, i)] = 1.0;
    }
    symmetrize_mut(&mut c);
    Ok(c)
}

/// Sample covariance (divisor `n - 1`) of the columns of `x`.
pub fn sample_cov(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let means = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &means;
    }
    let denom = (n.max(2) - 1) as f64;
    symmetrize(&(centered.transpose() * &centered / denom))
}

/// First differences of the rows of `x` (one fewer row).
pub fn diff_rows(x: &DMatrix<f64>) -> DMatrix<f64> {
    let t = x.nrows();
    if t < 2 {
        return DMatrix::zeros(0, x.ncols());
    }
    DMatrix::from_fn(t - 1, x.ncols(), |i, j| x[(i + 1, j)] - x[(i, j)])
}

pub fn max_abs_asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jitter_rescues_borderline_psd() {
        // rank-one, PSD but singular
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let m = &v * v.transpose();
        let (_, jitter) = cholesky_jitter(&m, "rank one").unwrap();
        assert!(jitter > 0.0);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(cholesky_jitter(&m, "m"), Err(Error::NotPsd(_))));
    }

    #[test]
    fn clip_raises_small_eigenvalues() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let c = clip_eigenvalues(&m, 1e-6);
        assert!(min_eigenvalue(&c) >= 1e-6 - 1e-12);
    }

    #[test]
    fn corr_has_unit_diagonal() {
        let cov = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 9.0]);
        let c = cov_to_corr(&cov).unwrap();
        assert_eq!(c[(0, 0)], 1.0);
        assert!((c[(0, 1)] - 1.0 / 6.0).abs() < 1e-15);
    }
}

//! Equality restrictions on the augmented system and the constrained M-step.
//!
//! Restrictions on Φ̃ and Λ̃ are imposed by GLS projection: for
//! `vec(Φ̃)` with weight `W = A⁻¹ ⊗ Q̃` and selector `M`,
//!
//! ```text
//! vec(Φ̃_r) = vec(Φ̃) + W M′ (M W M′)⁻¹ (k − M vec(Φ̃))
//! ```
//!
//! and the same for `vec(Λ̃)` with `W = E₁⁻¹ ⊗ R`. `vec` is column-major.
//! Restrictions on Q̃ and R are pinned entrywise.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::SufficientStats;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_strict, clip_eigenvalues, symmetrize};
use crate::statespace::StateSpaceSpec;

/// Eigenvalue floor applied to updated Q̃ and R.
pub const PSD_FLOOR: f64 = 1e-10;

/// A pinned matrix entry `(row, col, value)`.
pub type Pin = (usize, usize, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub n_factors: usize,
    pub n_series: usize,
    pub phi_pins: Vec<Pin>,
    pub lambda_pins: Vec<Pin>,
    /// Pins on Q̃; symmetric pairs are listed once with `row <= col`.
    pub q_pins: Vec<Pin>,
    pub r_diagonal: bool,
}

impl ConstraintSet {
    pub fn none(n_factors: usize, n_series: usize) -> Self {
        Self {
            n_factors,
            n_series,
            phi_pins: vec![],
            lambda_pins: vec![],
            q_pins: vec![],
            r_diagonal: false,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.phi_pins.is_empty()
            && self.lambda_pins.is_empty()
            && self.q_pins.is_empty()
            && !self.r_diagonal
    }

    /// The identified MLSS restriction set: `Φ̃ = diag(I_q, Φ)` with `Φ`
    /// diagonal, `Λ̃ = [Λ | I_K]` with `Λ` lower-triangular, block-diagonal
    /// `Q̃` with `Q_long = I_q`, and diagonal `R`.
    pub fn mlss(n_factors: usize, n_series: usize) -> Result<Self> {
        let (q, k) = (n_factors, n_series);
        if k == 0 {
            return Err(Error::InvalidInput("K must be positive".into()));
        }
        if q > k {
            return Err(Error::InvalidInput(format!("q = {q} exceeds K = {k}")));
        }
        let n = q + k;
        let mut phi_pins = vec![];
        for j in 0..n {
            for i in 0..n {
                if i != j {
                    phi_pins.push((i, j, 0.0));
                } else if i < q {
                    phi_pins.push((i, i, 1.0));
                }
            }
        }
        let mut lambda_pins = vec![];
        for j in 0..n {
            for i in 0..k {
                if j < q {
                    if j > i {
                        lambda_pins.push((i, j, 0.0));
                    }
                } else {
                    lambda_pins.push((i, j, if i == j - q { 1.0 } else { 0.0 }));
                }
            }
        }
        let mut q_pins = vec![];
        for i in 0..n {
            for j in i..n {
                if j < q {
                    q_pins.push((i, j, if i == j { 1.0 } else { 0.0 }));
                } else if i < q {
                    q_pins.push((i, j, 0.0));
                }
            }
        }
        Ok(Self {
            n_factors: q,
            n_series: k,
            phi_pins,
            lambda_pins,
            q_pins,
            r_diagonal: true,
        })
    }

    /// Multivariate random walk plus noise: `Λ̃ = Φ̃ = I_K`, optionally
    /// diagonal level covariance, diagonal `R`.
    pub fn local_level(n_series: usize, diagonal_q: bool) -> Result<Self> {
        let mut c = Self::mlss(0, n_series)?;
        c.phi_pins = (0..n_series)
            .flat_map(|j| (0..n_series).map(move |i| (i, j, if i == j { 1.0 } else { 0.0 })))
            .collect();
        if diagonal_q {
            c = c.with_diagonal_q();
        }
        Ok(c)
    }

    /// Additionally pins every short-term autoregressive coefficient.
    pub fn with_phi_fixed(mut self, value: f64) -> Self {
        let q = self.n_factors;
        self.phi_pins.retain(|&(i, j, _)| !(i == j && i >= q));
        for i in q..q + self.n_series {
            self.phi_pins.push((i, i, value));
        }
        self
    }

    /// Additionally pins all off-diagonal entries of the short-term block of Q̃.
    pub fn with_diagonal_q(mut self) -> Self {
        let q = self.n_factors;
        let n = q + self.n_series;
        for i in q..n {
            for j in (i + 1)..n {
                if !self.q_pins.iter().any(|p| p.0 == i && p.1 == j) {
                    self.q_pins.push((i, j, 0.0));
                }
            }
        }
        self
    }

    fn state_dim(&self) -> usize {
        self.n_factors + self.n_series
    }

    /// Selector matrix over column-major `vec(Φ̃)`.
    pub fn m_mat(&self) -> DMatrix<f64> {
        selector(&self.phi_pins, self.state_dim(), self.state_dim())
    }

    pub fn k_phi(&self) -> Vec<f64> {
        self.phi_pins.iter().map(|p| p.2).collect()
    }

    /// Selector matrix over column-major `vec(Λ̃)`.
    pub fn g_mat(&self) -> DMatrix<f64> {
        selector(&self.lambda_pins, self.n_series, self.state_dim())
    }

    pub fn k_lambda(&self) -> Vec<f64> {
        self.lambda_pins.iter().map(|p| p.2).collect()
    }

    pub fn phi_pinned(&self, i: usize, j: usize) -> bool {
        self.phi_pins.iter().any(|p| p.0 == i && p.1 == j)
    }

    pub fn lambda_pinned(&self, i: usize, j: usize) -> bool {
        self.lambda_pins.iter().any(|p| p.0 == i && p.1 == j)
    }

    pub fn q_pinned(&self, i: usize, j: usize) -> bool {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.q_pins.iter().any(|p| p.0 == a && p.1 == b)
    }

    /// Largest violation of any restriction by `spec`.
    pub fn max_violation(&self, spec: &StateSpaceSpec) -> f64 {
        let mut worst: f64 = 0.0;
        for &(i, j, v) in &self.phi_pins {
            worst = worst.max((spec.phi_tilde[(i, j)] - v).abs());
        }
        for &(i, j, v) in &self.lambda_pins {
            worst = worst.max((spec.lambda_tilde[(i, j)] - v).abs());
        }
        for &(i, j, v) in &self.q_pins {
            worst = worst
                .max((spec.q_tilde[(i, j)] - v).abs())
                .max((spec.q_tilde[(j, i)] - v).abs());
        }
        if self.r_diagonal {
            for i in 0..spec.n_series {
                for j in 0..spec.n_series {
                    if i != j {
                        worst = worst.max(spec.r[(i, j)].abs());
                    }
                }
            }
        }
        worst
    }

    fn check_dims(&self, spec: &StateSpaceSpec) -> Result<()> {
        if spec.n_factors != self.n_factors || spec.n_series != self.n_series {
            return Err(Error::Dimension(format!(
                "constraints for (q={}, K={}) applied to spec with (q={}, K={})",
                self.n_factors, self.n_series, spec.n_factors, spec.n_series
            )));
        }
        Ok(())
    }
}

fn selector(pins: &[Pin], rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(pins.len(), rows * cols);
    for (r, &(i, j, _)) in pins.iter().enumerate() {
        m[(r, j * rows + i)] = 1.0;
    }
    m
}

/// Literal GLS projection of a `rows × cols` coefficient matrix onto the
/// pinned set with weight `W = left ⊗ right` (`left` is `cols × cols`,
/// `right` is `rows × rows`). Selector rows are elementary, so `W M′` and
/// `M W M′` are read straight out of the Kronecker product.
pub fn gls_project(
    coef: &DMatrix<f64>,
    left: &DMatrix<f64>,
    right: &DMatrix<f64>,
    pins: &[Pin],
) -> Result<DMatrix<f64>> {
    let rows = coef.nrows();
    let cols = coef.ncols();
    if pins.is_empty() {
        return Ok(coef.clone());
    }
    let w = |a: usize, b: usize| -> f64 {
        // vec index a = j*rows + i
        let (ia, ja) = (a % rows, a / rows);
        let (ib, jb) = (b % rows, b / rows);
        left[(ja, jb)] * right[(ia, ib)]
    };
    let sel: Vec<usize> = pins.iter().map(|&(i, j, _)| j * rows + i).collect();
    let f = sel.len();
    let mwm = DMatrix::from_fn(f, f, |r, c| w(sel[r], sel[c]));
    let resid = nalgebra::DVector::from_fn(f, |r, _| pins[r].2 - coef[(pins[r].0, pins[r].1)]);
    let chol = cholesky_strict(&symmetrize(&mwm), "restriction weight M W M'")
        .map_err(|_| Error::Constraint("restriction weight matrix is rank deficient".into()))?;
    let lam = chol.solve(&resid);
    let mut out = coef.clone();
    for j in 0..cols {
        for i in 0..rows {
            let a = j * rows + i;
            let mut adj = 0.0;
            for (r, &b) in sel.iter().enumerate() {
                adj += w(a, b) * lam[r];
            }
            out[(i, j)] += adj;
        }
    }
    for &(i, j, v) in pins {
        out[(i, j)] = v;
    }
    Ok(out)
}

/// Same projection computed through the free entries only: with precision
/// `Ω = left⁻¹ ⊗ right⁻¹`, `v_F = v̂_F + Ω_FF⁻¹ Ω_FP (v̂_P − k)`. Cheaper
/// than [`gls_project`] when most entries are pinned.
pub fn free_block_project(
    coef: &DMatrix<f64>,
    left: &DMatrix<f64>,
    right: &DMatrix<f64>,
    pins: &[Pin],
) -> Result<DMatrix<f64>> {
    let rows = coef.nrows();
    let cols = coef.ncols();
    if pins.is_empty() {
        return Ok(coef.clone());
    }
    let left_inv = cholesky_strict(&symmetrize(left), "projection weight")?.inverse();
    let right_inv = cholesky_strict(&symmetrize(right), "projection weight")?.inverse();
    let omega = |a: usize, b: usize| -> f64 {
        let (ia, ja) = (a % rows, a / rows);
        let (ib, jb) = (b % rows, b / rows);
        left_inv[(ja, jb)] * right_inv[(ia, ib)]
    };
    let mut pinned = vec![false; rows * cols];
    for &(i, j, _) in pins {
        pinned[j * rows + i] = true;
    }
    let free: Vec<usize> = (0..rows * cols).filter(|&a| !pinned[a]).collect();
    let mut out = coef.clone();
    for &(i, j, v) in pins {
        out[(i, j)] = v;
    }
    if free.is_empty() {
        return Ok(out);
    }
    let pin_idx: Vec<usize> = pins.iter().map(|&(i, j, _)| j * rows + i).collect();
    let dev = nalgebra::DVector::from_fn(pins.len(), |r, _| coef[(pins[r].0, pins[r].1)] - pins[r].2);
    let off = DMatrix::from_fn(free.len(), pins.len(), |r, c| omega(free[r], pin_idx[c]));
    let ff = DMatrix::from_fn(free.len(), free.len(), |r, c| omega(free[r], free[c]));
    let chol = cholesky_strict(&ff, "free-block precision")
        .map_err(|_| Error::Constraint("free-block precision is singular".into()))?;
    let shift = chol.solve(&(off * dev));
    for (r, &a) in free.iter().enumerate() {
        out[(a % rows, a / rows)] += shift[r];
    }
    Ok(out)
}

fn project(
    coef: &DMatrix<f64>,
    left: &DMatrix<f64>,
    right: &DMatrix<f64>,
    pins: &[Pin],
) -> Result<DMatrix<f64>> {
    let total = coef.nrows() * coef.ncols();
    if 2 * pins.len() > total {
        if let Ok(m) = free_block_project(coef, left, right, pins) {
            return Ok(m);
        }
    }
    gls_project(coef, left, right, pins)
}

/// `(C − BΦ̃′ − Φ̃B′ + Φ̃AΦ̃′)/T`, symmetrized.
pub fn q_update(stats: &SufficientStats, phi: &DMatrix<f64>) -> DMatrix<f64> {
    let bp = &stats.b_mat * phi.transpose();
    let m = &stats.c_mat - &bp - bp.transpose() + phi * &stats.a_mat * phi.transpose();
    symmetrize(&(m / stats.n_obs as f64))
}

/// `(E₃ − Λ̃E₂′ − E₂Λ̃′ + Λ̃E₁Λ̃′)/T`, symmetrized.
pub fn r_update(stats: &SufficientStats, lambda: &DMatrix<f64>) -> DMatrix<f64> {
    let le = lambda * stats.e2.transpose();
    let m = &stats.e3 - &le - le.transpose() + lambda * &stats.e1 * lambda.transpose();
    symmetrize(&(m / stats.n_obs as f64))
}

pub(crate) fn repair_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    clip_eigenvalues(m, PSD_FLOOR)
}

fn pin_covariances(q: &mut DMatrix<f64>, r: &mut DMatrix<f64>, cons: &ConstraintSet) {
    for &(i, j, v) in &cons.q_pins {
        q[(i, j)] = v;
        q[(j, i)] = v;
    }
    if cons.r_diagonal {
        for i in 0..r.nrows() {
            for j in 0..r.ncols() {
                if i != j {
                    r[(i, j)] = 0.0;
                }
            }
            r[(i, i)] = r[(i, i)].max(PSD_FLOOR);
        }
    }
}

/// Constrained update using the candidate's own Q̃ and R as projection
/// weights.
pub fn apply_constraints(
    candidate: &StateSpaceSpec,
    stats: &SufficientStats,
    cons: &ConstraintSet,
) -> Result<StateSpaceSpec> {
    apply_constraints_weighted(candidate, stats, cons, &candidate.q_tilde, &candidate.r)
}

/// Constrained update with explicit projection weights.
///
/// Φ̃ and Λ̃ are projected onto their restrictions, then Q̃ and R are
/// recomputed from the projected coefficients, repaired to PSD and pinned.
/// With the previous iterate's Q̃ and R as weights every step is an exact
/// conditional maximization of the expected complete-data log-likelihood.
pub fn apply_constraints_weighted(
    candidate: &StateSpaceSpec,
    stats: &SufficientStats,
    cons: &ConstraintSet,
    q_weight: &DMatrix<f64>,
    r_weight: &DMatrix<f64>,
) -> Result<StateSpaceSpec> {
    cons.check_dims(candidate)?;
    if cons.is_empty() {
        return Ok(candidate.clone());
    }
    let a_inv = cholesky_strict(&stats.a_mat, "A")?.inverse();
    let e1_inv = cholesky_strict(&stats.e1, "E1")?.inverse();

    let phi = project(&candidate.phi_tilde, &a_inv, q_weight, &cons.phi_pins)?;
    let lambda = project(&candidate.lambda_tilde, &e1_inv, r_weight, &cons.lambda_pins)?;

    let mut q = if cons.phi_pins.is_empty() {
        candidate.q_tilde.clone()
    } else {
        repair_psd(&q_update(stats, &phi))
    };
    let mut r = if cons.lambda_pins.is_empty() {
        candidate.r.clone()
    } else {
        repair_psd(&r_update(stats, &lambda))
    };
    pin_covariances(&mut q, &mut r, cons);

    let mut out = candidate.clone();
    out.phi_tilde = phi;
    out.lambda_tilde = lambda;
    out.q_tilde = q;
    out.r = r;
    Ok(out)
}

//! Augmented linear-Gaussian state-space form of the long/short sentiment
//! model, with the Kalman filter, the fixed-interval smoother (including
//! lag-one cross covariances) and the exact Gaussian log-likelihood.
//!
//! State `x_t = [F_t; Ψ_t]` has `q` random-walk factors followed by `K`
//! short-term components:
//!
//! ```text
//! S_t = Λ̃ x_t + ε_t,      ε_t ~ N(0, R)
//! x_t = Φ̃ x_{t-1} + w_t,  w_t ~ N(0, Q̃)
//! x_0 ~ N(a, Σ)
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, cholesky_jitter, cholesky_strict, log_det_cholesky, symmetrize_mut};

/// Initial state covariance scale used in place of an exact diffuse prior.
pub const DIFFUSE_SCALE: f64 = 1e7;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpaceSpec {
    /// `K × (q+K)` observation matrix `[Λ | I_K]`.
    #[serde(with = "crate::serde_mat")]
    pub lambda_tilde: DMatrix<f64>,
    /// `(q+K) × (q+K)` transition matrix `diag(I_q, Φ)`.
    #[serde(with = "crate::serde_mat")]
    pub phi_tilde: DMatrix<f64>,
    /// `(q+K) × (q+K)` state innovation covariance `diag(Q_long, Q_short)`.
    #[serde(with = "crate::serde_mat")]
    pub q_tilde: DMatrix<f64>,
    /// `K × K` diagonal observation noise covariance.
    #[serde(with = "crate::serde_mat")]
    pub r: DMatrix<f64>,
    /// Initial state mean.
    #[serde(with = "crate::serde_mat::vector")]
    pub a: DVector<f64>,
    /// Initial state covariance.
    #[serde(with = "crate::serde_mat")]
    pub sigma0: DMatrix<f64>,
    pub n_factors: usize,
    pub n_series: usize,
}

impl StateSpaceSpec {
    /// Validates dimensions and finiteness only; structural restrictions are
    /// reported by [`StateSpaceSpec::invariant_violations`].
    pub fn new(
        lambda_tilde: DMatrix<f64>,
        phi_tilde: DMatrix<f64>,
        q_tilde: DMatrix<f64>,
        r: DMatrix<f64>,
        a: DVector<f64>,
        sigma0: DMatrix<f64>,
        n_factors: usize,
    ) -> Result<Self> {
        let k = lambda_tilde.nrows();
        let n = n_factors + k;
        let check = |name: &str, m: &DMatrix<f64>, rows: usize, cols: usize| -> Result<()> {
            if m.nrows() != rows || m.ncols() != cols {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {rows}x{cols}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{name} has non-finite entries")));
            }
            Ok(())
        };
        if k == 0 {
            return Err(Error::Dimension("at least one observed series is required".into()));
        }
        check("lambda_tilde", &lambda_tilde, k, n)?;
        check("phi_tilde", &phi_tilde, n, n)?;
        check("q_tilde", &q_tilde, n, n)?;
        check("r", &r, k, k)?;
        check("sigma0", &sigma0, n, n)?;
        if a.len() != n {
            return Err(Error::Dimension(format!("a has length {}, expected {n}", a.len())));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("a has non-finite entries".into()));
        }
        Ok(Self {
            lambda_tilde,
            phi_tilde,
            q_tilde,
            r,
            a,
            sigma0,
            n_factors,
            n_series: k,
        })
    }

    /// MLSS system from its blocks: `lambda` is `K × q`, `phi_diag` and
    /// `r_diag` have length `K`, `q_short` is `K × K`. `Q_long = I_q`,
    /// `a = 0` and `Σ = DIFFUSE_SCALE · I`.
    pub fn mlss(
        lambda: &DMatrix<f64>,
        phi_diag: &[f64],
        q_short: &DMatrix<f64>,
        r_diag: &[f64],
    ) -> Result<Self> {
        let k = lambda.nrows();
        let q = lambda.ncols();
        if phi_diag.len() != k || r_diag.len() != k || q_short.shape() != (k, k) {
            return Err(Error::Dimension("MLSS blocks disagree on K".into()));
        }
        let n = q + k;
        let mut lt = DMatrix::zeros(k, n);
        lt.view_mut((0, 0), (k, q)).copy_from(lambda);
        lt.view_mut((0, q), (k, k)).fill_with_identity();
        let mut phi = DMatrix::identity(n, n);
        for (i, &p) in phi_diag.iter().enumerate() {
            phi[(q + i, q + i)] = p;
        }
        let mut qt = DMatrix::identity(n, n);
        qt.view_mut((q, q), (k, k)).copy_from(q_short);
        let r = DMatrix::from_diagonal(&DVector::from_column_slice(r_diag));
        Self::new(
            lt,
            phi,
            qt,
            r,
            DVector::zeros(n),
            DMatrix::identity(n, n) * DIFFUSE_SCALE,
            q,
        )
    }

    /// (M)LNSL random walk plus noise: `q = 0`, `Λ̃ = Φ̃ = I_K`.
    pub fn local_level(q_level: &DMatrix<f64>, r_diag: &[f64]) -> Result<Self> {
        let k = r_diag.len();
        if q_level.shape() != (k, k) {
            return Err(Error::Dimension("level covariance must be K x K".into()));
        }
        Self::new(
            DMatrix::identity(k, k),
            DMatrix::identity(k, k),
            q_level.clone(),
            DMatrix::from_diagonal(&DVector::from_column_slice(r_diag)),
            DVector::zeros(k),
            DMatrix::identity(k, k) * DIFFUSE_SCALE,
            0,
        )
    }

    pub fn state_dim(&self) -> usize {
        self.n_factors + self.n_series
    }

    /// Factor loading block `Λ` (`K × q`).
    pub fn lambda(&self) -> DMatrix<f64> {
        self.lambda_tilde
            .view((0, 0), (self.n_series, self.n_factors))
            .into_owned()
    }

    /// Short-term autoregressive block `Φ` (`K × K`).
    pub fn phi(&self) -> DMatrix<f64> {
        let q = self.n_factors;
        self.phi_tilde
            .view((q, q), (self.n_series, self.n_series))
            .into_owned()
    }

    pub fn phi_diag(&self) -> Vec<f64> {
        let q = self.n_factors;
        (0..self.n_series).map(|i| self.phi_tilde[(q + i, q + i)]).collect()
    }

    pub fn q_long(&self) -> DMatrix<f64> {
        self.q_tilde
            .view((0, 0), (self.n_factors, self.n_factors))
            .into_owned()
    }

    pub fn q_short(&self) -> DMatrix<f64> {
        let q = self.n_factors;
        self.q_tilde
            .view((q, q), (self.n_series, self.n_series))
            .into_owned()
    }

    pub fn r_diag(&self) -> Vec<f64> {
        (0..self.n_series).map(|i| self.r[(i, i)]).collect()
    }

    /// Structural violations of the augmented MLSS form, larger than `tol`.
    /// Empty when the system satisfies every restriction.
    pub fn invariant_violations(&self, tol: f64) -> Vec<String> {
        let q = self.n_factors;
        let k = self.n_series;
        let n = q + k;
        let mut out = Vec::new();
        for (name, m) in [("q_tilde", &self.q_tilde), ("r", &self.r), ("sigma0", &self.sigma0)] {
            if linalg::max_abs_asymmetry(m) > tol {
                out.push(format!("{name} not symmetric"));
            }
            let scale = m.amax().max(1.0);
            if linalg::min_eigenvalue(m) < -1e-10 * scale {
                out.push(format!("{name} not PSD"));
            }
        }
        for i in 0..k {
            for j in 0..k {
                if i != j && self.r[(i, j)].abs() > tol {
                    out.push(format!("r[{i},{j}] off-diagonal"));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let expected_zero = i != j;
                let v = self.phi_tilde[(i, j)];
                if i < q && j < q && i == j {
                    if (v - 1.0).abs() > tol {
                        out.push(format!("phi_tilde[{i},{i}] must be 1"));
                    }
                } else if expected_zero && v.abs() > tol {
                    out.push(format!("phi_tilde[{i},{j}] must be 0"));
                }
            }
        }
        for i in 0..k {
            for j in 0..k {
                let v = self.lambda_tilde[(i, q + j)];
                let target = if i == j { 1.0 } else { 0.0 };
                if (v - target).abs() > tol {
                    out.push(format!("lambda_tilde identity block [{i},{j}]"));
                }
            }
            for j in (i + 1)..q {
                if self.lambda_tilde[(i, j)].abs() > tol {
                    out.push(format!("lambda[{i},{j}] above diagonal"));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let v = self.q_tilde[(i, j)];
                if i < q && j < q {
                    let target = if i == j { 1.0 } else { 0.0 };
                    if (v - target).abs() > tol {
                        out.push(format!("q_long[{i},{j}] must equal identity"));
                    }
                } else if (i < q) != (j < q) && v.abs() > tol {
                    out.push(format!("q_tilde[{i},{j}] off-block"));
                }
            }
        }
        out
    }

    fn check_panel(&self, panel: &DMatrix<f64>) -> Result<()> {
        if panel.ncols() != self.n_series {
            return Err(Error::Dimension(format!(
                "panel has {} columns, spec has K = {}",
                panel.ncols(),
                self.n_series
            )));
        }
        if let Some((idx, _)) = panel.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let t = idx % panel.nrows();
            let k = idx / panel.nrows();
            return Err(Error::NonFinite(format!("observation ({t}, {k}) is not finite")));
        }
        for i in 0..self.n_series {
            if !(self.r[(i, i)] > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "observation noise variance r[{i},{i}] must be > 0"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FilterOutput {
    /// `F̃_{0|0} = a`.
    pub init_mean: DVector<f64>,
    /// `P_{0|0} = Σ`.
    pub init_cov: DMatrix<f64>,
    /// `pred_mean[t-1] = F̃_{t|t-1}` for `t = 1..T`; same indexing below.
    pub pred_mean: Vec<DVector<f64>>,
    pub pred_cov: Vec<DMatrix<f64>>,
    pub filt_mean: Vec<DVector<f64>>,
    pub filt_cov: Vec<DMatrix<f64>>,
    pub gain: Vec<DMatrix<f64>>,
    /// Prediction-error log-density of each observation.
    pub step_loglik: Vec<f64>,
    pub loglik: f64,
}

impl FilterOutput {
    pub fn len(&self) -> usize {
        self.filt_mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filt_mean.is_empty()
    }

    /// `P_{t|t}` with `t = 0` mapped to the prior.
    fn filt_cov_at(&self, t: usize) -> &DMatrix<f64> {
        if t == 0 {
            &self.init_cov
        } else {
            &self.filt_cov[t - 1]
        }
    }

    fn filt_mean_at(&self, t: usize) -> &DVector<f64> {
        if t == 0 {
            &self.init_mean
        } else {
            &self.filt_mean[t - 1]
        }
    }
}

#[derive(Debug, Clone)]
pub struct SmootherOutput {
    /// `F̃_{0|T}`.
    pub init_mean: DVector<f64>,
    /// `P_{0|T}`.
    pub init_cov: DMatrix<f64>,
    /// `smooth_mean[t-1] = F̃_{t|T}` for `t = 1..T`.
    pub smooth_mean: Vec<DVector<f64>>,
    pub smooth_cov: Vec<DMatrix<f64>>,
    /// `lag_cov[t-1] = P_{t,t-1|T}` for `t = 1..T`.
    pub lag_cov: Vec<DMatrix<f64>>,
    /// `smoother_gain[t-1] = J_{t-1}` for `t = 1..T`.
    pub smoother_gain: Vec<DMatrix<f64>>,
}

/// Kalman filter over a complete `T × K` panel.
pub fn kalman_filter(spec: &StateSpaceSpec, panel: &DMatrix<f64>) -> Result<FilterOutput> {
    spec.check_panel(panel)?;
    let t_len = panel.nrows();
    let n = spec.state_dim();
    let k = spec.n_series;
    let h = &spec.lambda_tilde;
    let ht = h.transpose();
    let phi = &spec.phi_tilde;
    let phit = phi.transpose();
    let eye = DMatrix::<f64>::identity(n, n);

    let mut out = FilterOutput {
        init_mean: spec.a.clone(),
        init_cov: spec.sigma0.clone(),
        pred_mean: Vec::with_capacity(t_len),
        pred_cov: Vec::with_capacity(t_len),
        filt_mean: Vec::with_capacity(t_len),
        filt_cov: Vec::with_capacity(t_len),
        gain: Vec::with_capacity(t_len),
        step_loglik: Vec::with_capacity(t_len),
        loglik: 0.0,
    };

    let mut mean = spec.a.clone();
    let mut cov = spec.sigma0.clone();
    for t in 0..t_len {
        let m_pred = phi * &mean;
        let mut p_pred = phi * &cov * &phit + &spec.q_tilde;
        symmetrize_mut(&mut p_pred);

        let y = panel.row(t).transpose();
        let innov = &y - h * &m_pred;
        let ph = &p_pred * &ht;
        let mut f = h * &ph + &spec.r;
        symmetrize_mut(&mut f);
        let (chol, _) = cholesky_jitter(&f, &format!("innovation covariance at t={}", t + 1))?;

        let quad = innov.dot(&chol.solve(&innov));
        let step = -0.5 * (k as f64 * LN_2PI + log_det_cholesky(&chol) + quad);
        if !step.is_finite() {
            return Err(Error::NonFinite(format!("log-likelihood at t={}", t + 1)));
        }

        let gain = chol.solve(&ph.transpose()).transpose();
        let m_filt = &m_pred + &gain * &innov;
        let ikh = &eye - &gain * h;
        let mut p_filt = &ikh * &p_pred * ikh.transpose() + &gain * &spec.r * gain.transpose();
        symmetrize_mut(&mut p_filt);

        out.loglik += step;
        out.step_loglik.push(step);
        out.pred_mean.push(m_pred);
        out.pred_cov.push(p_pred);
        out.gain.push(gain);
        mean = m_filt.clone();
        cov = p_filt.clone();
        out.filt_mean.push(m_filt);
        out.filt_cov.push(p_filt);
    }
    Ok(out)
}

/// Fixed-interval smoother with lag-one cross covariances.
///
/// `P_{t|t-1}` must be positive definite at every step; a singular predictive
/// covariance is an error, not something to pseudo-invert around.
pub fn kalman_smoother(spec: &StateSpaceSpec, filt: &FilterOutput) -> Result<SmootherOutput> {
    let t_len = filt.len();
    let n = spec.state_dim();
    if t_len == 0 {
        return Ok(SmootherOutput {
            init_mean: filt.init_mean.clone(),
            init_cov: filt.init_cov.clone(),
            smooth_mean: vec![],
            smooth_cov: vec![],
            lag_cov: vec![],
            smoother_gain: vec![],
        });
    }
    if filt.init_mean.len() != n {
        return Err(Error::Dimension("filter output does not match spec".into()));
    }
    let phi = &spec.phi_tilde;
    let phit = phi.transpose();

    // J_{t-1} = P_{t-1|t-1} Φ̃' P_{t|t-1}^{-1}, for t = 1..T
    let mut gains = Vec::with_capacity(t_len);
    for t in 1..=t_len {
        let chol = cholesky_strict(&filt.pred_cov[t - 1], &format!("P_{{{t}|{}}}", t - 1))?;
        let pf = filt.filt_cov_at(t - 1) * &phit;
        gains.push(chol.solve(&pf.transpose()).transpose());
    }

    // smoothed[t] for t = 0..T
    let mut means = vec![DVector::zeros(n); t_len + 1];
    let mut covs = vec![DMatrix::zeros(n, n); t_len + 1];
    means[t_len] = filt.filt_mean[t_len - 1].clone();
    covs[t_len] = filt.filt_cov[t_len - 1].clone();
    for t in (1..=t_len).rev() {
        let j = &gains[t - 1];
        let m = filt.filt_mean_at(t - 1) + j * (&means[t] - &filt.pred_mean[t - 1]);
        let mut p = filt.filt_cov_at(t - 1) + j * (&covs[t] - &filt.pred_cov[t - 1]) * j.transpose();
        symmetrize_mut(&mut p);
        means[t - 1] = m;
        covs[t - 1] = p;
    }

    // lag[t] = P_{t,t-1|T} for t = 1..T
    let mut lag = vec![DMatrix::zeros(n, n); t_len + 1];
    let eye = DMatrix::<f64>::identity(n, n);
    let kt = &filt.gain[t_len - 1];
    lag[t_len] = (&eye - kt * &spec.lambda_tilde) * phi * filt.filt_cov_at(t_len - 1);
    for t in (2..=t_len).rev() {
        let j1 = &gains[t - 1];
        let j2t = gains[t - 2].transpose();
        let pf = filt.filt_cov_at(t - 1);
        lag[t - 1] = pf * &j2t + j1 * (&lag[t] - phi * pf) * &j2t;
    }

    let init_mean = means[0].clone();
    let init_cov = covs[0].clone();
    means.remove(0);
    covs.remove(0);
    lag.remove(0);
    Ok(SmootherOutput {
        init_mean,
        init_cov,
        smooth_mean: means,
        smooth_cov: covs,
        lag_cov: lag,
        smoother_gain: gains,
    })
}

/// Exact Gaussian log-likelihood of the panel by prediction-error decomposition.
pub fn loglikelihood(spec: &StateSpaceSpec, panel: &DMatrix<f64>) -> Result<f64> {
    Ok(kalman_filter(spec, panel)?.loglik)
}

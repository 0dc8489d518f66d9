//! Free-parameter layout, the expected complete-data log-likelihood, its
//! gradient, and observed-information standard errors.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{e_step, ConstraintSet, SufficientStats};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_jitter, cholesky_strict, log_det_cholesky};
use crate::statespace::StateSpaceSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    Lambda,
    Phi,
    Q,
    R,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub kind: ParamKind,
    pub row: usize,
    pub col: usize,
    pub label: String,
}

/// Ordered list of the entries left free by a [`ConstraintSet`]. Symmetric
/// covariances contribute their upper triangle only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub params: Vec<Param>,
}

impl ParamLayout {
    pub fn new(cons: &ConstraintSet) -> Self {
        let q = cons.n_factors;
        let k = cons.n_series;
        let n = q + k;
        let mut params = vec![];
        for j in 0..n {
            for i in 0..k {
                if !cons.lambda_pinned(i, j) {
                    let label = if j < q {
                        format!("lambda[{i},{j}]")
                    } else {
                        format!("lambda_tilde[{i},{j}]")
                    };
                    params.push(Param { kind: ParamKind::Lambda, row: i, col: j, label });
                }
            }
        }
        for j in 0..n {
            for i in 0..n {
                if !cons.phi_pinned(i, j) {
                    let label = if i == j && i >= q {
                        format!("phi[{}]", i - q)
                    } else {
                        format!("phi_tilde[{i},{j}]")
                    };
                    params.push(Param { kind: ParamKind::Phi, row: i, col: j, label });
                }
            }
        }
        for i in 0..n {
            for j in i..n {
                if !cons.q_pinned(i, j) {
                    let label = if i >= q {
                        format!("q_short[{},{}]", i - q, j - q)
                    } else {
                        format!("q_tilde[{i},{j}]")
                    };
                    params.push(Param { kind: ParamKind::Q, row: i, col: j, label });
                }
            }
        }
        for i in 0..k {
            let hi = if cons.r_diagonal { i + 1 } else { k };
            for j in i..hi {
                let label = if i == j { format!("r[{i}]") } else { format!("r[{i},{j}]") };
                params.push(Param { kind: ParamKind::R, row: i, col: j, label });
            }
        }
        Self { params }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.params.iter().map(|p| p.label.clone()).collect()
    }

    pub fn get(&self, spec: &StateSpaceSpec) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.params.iter().map(|p| match p.kind {
                ParamKind::Lambda => spec.lambda_tilde[(p.row, p.col)],
                ParamKind::Phi => spec.phi_tilde[(p.row, p.col)],
                ParamKind::Q => spec.q_tilde[(p.row, p.col)],
                ParamKind::R => spec.r[(p.row, p.col)],
            }),
        )
    }

    pub fn set(&self, spec: &StateSpaceSpec, theta: &DVector<f64>) -> StateSpaceSpec {
        let mut out = spec.clone();
        for (p, &v) in self.params.iter().zip(theta.iter()) {
            match p.kind {
                ParamKind::Lambda => out.lambda_tilde[(p.row, p.col)] = v,
                ParamKind::Phi => out.phi_tilde[(p.row, p.col)] = v,
                ParamKind::Q => {
                    out.q_tilde[(p.row, p.col)] = v;
                    out.q_tilde[(p.col, p.row)] = v;
                }
                ParamKind::R => {
                    out.r[(p.row, p.col)] = v;
                    out.r[(p.col, p.row)] = v;
                }
            }
        }
        out
    }
}

fn residual_q(stats: &SufficientStats, phi: &DMatrix<f64>) -> DMatrix<f64> {
    let bp = &stats.b_mat * phi.transpose();
    &stats.c_mat - &bp - bp.transpose() + phi * &stats.a_mat * phi.transpose()
}

fn residual_r(stats: &SufficientStats, lambda: &DMatrix<f64>) -> DMatrix<f64> {
    let le = lambda * stats.e2.transpose();
    &stats.e3 - &le - le.transpose() + lambda * &stats.e1 * lambda.transpose()
}

/// Expected complete-data log-likelihood `G(θ)` given E-step statistics,
/// without the `2π` constant.
pub fn expected_complete_loglik(spec: &StateSpaceSpec, stats: &SufficientStats) -> Result<f64> {
    let t = stats.n_obs as f64;
    let (rc, _) = cholesky_jitter(&spec.r, "R")?;
    let (qc, _) = cholesky_jitter(&spec.q_tilde, "Q")?;
    let (sc, _) = cholesky_jitter(&spec.sigma0, "Sigma0")?;
    let tr = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>, m: &DMatrix<f64>| c.solve(m).trace();
    let d0 = &stats.init_mean - &spec.a;
    let s0 = &stats.init_cov + &d0 * d0.transpose();
    Ok(-0.5 * t * log_det_cholesky(&rc)
        - 0.5 * tr(&rc, &residual_r(stats, &spec.lambda_tilde))
        - 0.5 * t * log_det_cholesky(&qc)
        - 0.5 * tr(&qc, &residual_q(stats, &spec.phi_tilde))
        - 0.5 * log_det_cholesky(&sc)
        - 0.5 * tr(&sc, &s0))
}

/// Gradient of `G` at `spec` over the layout; evaluated with the statistics
/// of `spec` itself it equals the observed-data score.
pub fn score_from_stats(
    spec: &StateSpaceSpec,
    stats: &SufficientStats,
    layout: &ParamLayout,
) -> Result<DVector<f64>> {
    let t = stats.n_obs as f64;
    let r_inv = cholesky_strict(&spec.r, "R")?.inverse();
    let q_inv = cholesky_strict(&spec.q_tilde, "Q")?.inverse();
    let d_lambda = &r_inv * (&stats.e2 - &spec.lambda_tilde * &stats.e1);
    let d_phi = &q_inv * (&stats.b_mat - &spec.phi_tilde * &stats.a_mat);
    let cov_grad = |inv: &DMatrix<f64>, s: &DMatrix<f64>| -> DMatrix<f64> {
        inv * s * inv * 0.5 - inv * (0.5 * t)
    };
    let d_q = cov_grad(&q_inv, &residual_q(stats, &spec.phi_tilde));
    let d_r = cov_grad(&r_inv, &residual_r(stats, &spec.lambda_tilde));
    let sym = |d: &DMatrix<f64>, i: usize, j: usize| {
        if i == j {
            d[(i, i)]
        } else {
            d[(i, j)] + d[(j, i)]
        }
    };
    Ok(DVector::from_iterator(
        layout.len(),
        layout.params.iter().map(|p| match p.kind {
            ParamKind::Lambda => d_lambda[(p.row, p.col)],
            ParamKind::Phi => d_phi[(p.row, p.col)],
            ParamKind::Q => sym(&d_q, p.row, p.col),
            ParamKind::R => sym(&d_r, p.row, p.col),
        }),
    ))
}

/// Observed-data score over the free parameters (Fisher identity).
pub fn score(
    spec: &StateSpaceSpec,
    panel: &DMatrix<f64>,
    layout: &ParamLayout,
) -> Result<DVector<f64>> {
    let (stats, _, _) = e_step(spec, panel)?;
    score_from_stats(spec, &stats, layout)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardErrors {
    pub labels: Vec<String>,
    pub kinds: Vec<ParamKind>,
    pub estimates: Vec<f64>,
    /// `None` where the observed information does not give a positive variance.
    pub se: Vec<Option<f64>>,
    /// `max|H − H′| / max|H|` of the finite-difference Hessian.
    pub hessian_asymmetry: f64,
    /// Whether the negative Hessian was positive definite.
    pub information_pd: bool,
}

impl StandardErrors {
    pub fn get(&self, label: &str) -> Option<Option<f64>> {
        self.labels.iter().position(|l| l == label).map(|i| self.se[i])
    }

    /// Entries for Φ and Λ only.
    pub fn phi_lambda(&self) -> Vec<(String, f64, Option<f64>)> {
        (0..self.labels.len())
            .filter(|&i| matches!(self.kinds[i], ParamKind::Phi | ParamKind::Lambda))
            .map(|i| (self.labels[i].clone(), self.estimates[i], self.se[i]))
            .collect()
    }
}

/// Standard errors from the inverse observed information, with the Hessian
/// of the log-likelihood taken by central differences of the analytic score.
pub fn standard_errors(
    spec: &StateSpaceSpec,
    panel: &DMatrix<f64>,
    cons: &ConstraintSet,
) -> Result<StandardErrors> {
    let layout = ParamLayout::new(cons);
    let theta = layout.get(spec);
    let p = layout.len();
    if p == 0 {
        return Err(Error::InvalidInput("no free parameters".into()));
    }
    let cols: Vec<Result<DVector<f64>>> = (0..p)
        .into_par_iter()
        .map(|i| {
            let h = 1e-4 * theta[i].abs().max(1e-2);
            let mut up = theta.clone();
            up[i] += h;
            let mut dn = theta.clone();
            dn[i] -= h;
            let su = score(&layout.set(spec, &up), panel, &layout)?;
            let sd = score(&layout.set(spec, &dn), panel, &layout)?;
            Ok((su - sd) / (2.0 * h))
        })
        .collect();
    let mut hess = DMatrix::zeros(p, p);
    for (i, c) in cols.into_iter().enumerate() {
        hess.set_column(i, &c?);
    }
    let scale = hess.amax().max(f64::MIN_POSITIVE);
    let asym = (&hess - hess.transpose()).amax() / scale;
    let info = -(&hess + hess.transpose()) * 0.5;
    let (cov, pd) = match cholesky_strict(&info, "information") {
        Ok(c) => (Some(c.inverse()), true),
        Err(_) => (info.clone().try_inverse(), false),
    };
    let se = (0..p)
        .map(|i| {
            cov.as_ref()
                .map(|c| c[(i, i)])
                .filter(|v| v.is_finite() && *v > 0.0)
                .map(f64::sqrt)
        })
        .collect();
    Ok(StandardErrors {
        labels: layout.labels(),
        kinds: layout.params.iter().map(|p| p.kind).collect(),
        estimates: theta.iter().copied().collect(),
        se,
        hessian_asymmetry: asym,
        information_pd: pd,
    })
}

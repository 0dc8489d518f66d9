//! Binary logit by Newton–Raphson with step halving.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficient bound used when the classes are (quasi-)separated.
pub const COEF_CAP: f64 = 30.0;
pub const GRAD_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogitStatus {
    Converged,
    /// Coefficients hit the cap; the likelihood has no finite maximizer.
    Separated,
    /// Only one class in the sample; the model is a constant.
    SingleClass,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierState {
    pub theta: Vec<f64>,
    pub mcfadden_r2: f64,
    pub loglik: f64,
    pub loglik_null: f64,
    pub converged: bool,
    pub status: LogitStatus,
    pub iterations: usize,
    pub n: usize,
}

impl ClassifierState {
    pub fn prob(&self, x: &[f64]) -> f64 {
        sigmoid(self.theta.iter().zip(x).map(|(a, b)| a * b).sum())
    }

    /// `Ŷ = 1` iff the fitted probability is strictly above one half.
    pub fn predict(&self, x: &[f64]) -> bool {
        self.prob(x) > 0.5
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn log1pexp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn loglik(x: &DMatrix<f64>, y: &[bool], theta: &DVector<f64>) -> f64 {
    let eta = x * theta;
    y.iter()
        .zip(eta.iter())
        .map(|(&yi, &e)| if yi { -log1pexp(-e) } else { -log1pexp(e) })
        .sum()
}

fn null_loglik(y: &[bool]) -> f64 {
    let n = y.len() as f64;
    let k = y.iter().filter(|v| **v).count() as f64;
    if k == 0.0 || k == n {
        return 0.0;
    }
    k * (k / n).ln() + (n - k) * (1.0 - k / n).ln()
}

/// Maximum-likelihood logit of `y` on the columns of `x` (which must contain
/// the intercept if one is wanted).
pub fn fit_logit(x: &DMatrix<f64>, y: &[bool], max_iter: usize) -> Result<ClassifierState> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Dimension(format!("{n} design rows but {} labels", y.len())));
    }
    if n == 0 || p == 0 {
        return Err(Error::InvalidInput("empty logit design".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logit design".into()));
    }
    let ones = y.iter().filter(|v| **v).count();
    let l0 = null_loglik(y);
    if ones == 0 || ones == n {
        let mut theta = vec![0.0; p];
        theta[0] = if ones == n { COEF_CAP } else { -COEF_CAP };
        return Ok(ClassifierState {
            theta,
            mcfadden_r2: 0.0,
            loglik: 0.0,
            loglik_null: 0.0,
            converged: false,
            status: LogitStatus::SingleClass,
            iterations: 0,
            n,
        });
    }
    let yv = DVector::from_fn(n, |i, _| if y[i] { 1.0 } else { 0.0 });
    let mut theta = DVector::zeros(p);
    // Start at the intercept-only optimum when the first column is constant.
    if x.column(0).iter().all(|v| *v == x[(0, 0)]) && x[(0, 0)] != 0.0 {
        let m = ones as f64 / n as f64;
        theta[0] = (m / (1.0 - m)).ln() / x[(0, 0)];
    }
    let mut ll = loglik(x, y, &theta);
    let mut status = LogitStatus::MaxIter;
    let mut iterations = 0;
    for it in 0..max_iter {
        let mu = (x * &theta).map(sigmoid);
        let grad = x.transpose() * (&yv - &mu);
        if grad.amax() <= GRAD_TOL {
            status = LogitStatus::Converged;
            iterations = it;
            break;
        }
        let w = mu.map(|m| (m * (1.0 - m)).max(1e-300));
        let mut info = DMatrix::zeros(p, p);
        for i in 0..n {
            let row = x.row(i).transpose();
            info.ger(w[i], &row, &row, 1.0);
        }
        let step = match info.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None => match info.lu().solve(&grad) {
                Some(s) => s,
                None => {
                    return Err(Error::Singular("logit information matrix is singular".into()));
                }
            },
        };
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand = &theta + &step * scale;
            let lc = loglik(x, y, &cand);
            if lc >= ll {
                theta = cand;
                ll = lc;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        iterations = it + 1;
        if theta.amax() > COEF_CAP {
            theta = theta.map(|v| v.clamp(-COEF_CAP, COEF_CAP));
            ll = loglik(x, y, &theta);
            status = LogitStatus::Separated;
            break;
        }
        if !improved {
            // No ascent possible along the Newton direction: numerically at the optimum.
            let mu = (x * &theta).map(sigmoid);
            let g = x.transpose() * (&yv - &mu);
            if g.amax() <= GRAD_TOL {
                status = LogitStatus::Converged;
            }
            break;
        }
    }
    let converged = status == LogitStatus::Converged;
    let r2 = if l0 < 0.0 { (1.0 - ll / l0).clamp(0.0, 1.0) } else { 0.0 };
    Ok(ClassifierState {
        theta: theta.iter().copied().collect(),
        mcfadden_r2: r2,
        loglik: ll,
        loglik_null: l0,
        converged,
        status,
        iterations,
        n,
    })
}

//! Information criteria, factor-count selection and the estimation report.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_em, initial_spec, ConstraintSet, EmOptions, EmTrace, ParamLayout, StandardErrors};
use crate::error::{Error, Result};
use crate::serde_mat::to_rows;
use crate::statespace::StateSpaceSpec;

/// `(AIC, BIC)` with `AIC = −2ℓ + 2p`, `BIC = −2ℓ + p·ln(T·K)`.
pub fn information_criteria(loglik: f64, n_params: usize, n_obs: usize, n_series: usize) -> (f64, f64) {
    let p = n_params as f64;
    let aic = -2.0 * loglik + 2.0 * p;
    let bic = -2.0 * loglik + p * ((n_obs * n_series) as f64).ln();
    (aic, bic)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSelectionRow {
    pub q: usize,
    pub loglik: Option<f64>,
    pub n_params: usize,
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct QSelection {
    pub q_best: usize,
    pub rows: Vec<QSelectionRow>,
    /// Fitted spec and trace per candidate, `None` where the fit failed.
    pub fits: Vec<Option<(StateSpaceSpec, EmTrace)>>,
}

/// Fits each candidate factor count from PCA starting values and picks the
/// BIC minimizer. Failed fits are recorded in the table and skipped.
pub fn select_q<F>(
    panel: &DMatrix<f64>,
    candidates: &[usize],
    template: F,
    opts: EmOptions,
) -> Result<QSelection>
where
    F: Fn(usize, usize) -> Result<ConstraintSet> + Sync,
{
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no factor counts to compare".into()));
    }
    let k = panel.ncols();
    let t = panel.nrows();
    let results: Vec<(QSelectionRow, Option<(StateSpaceSpec, EmTrace)>)> = candidates
        .par_iter()
        .map(|&q| {
            let fitted = template(q, k).and_then(|cons| {
                let init = initial_spec(panel, q)?;
                let (spec, trace) = fit_em(panel, &cons, &init, opts)?;
                Ok((cons, spec, trace))
            });
            match fitted {
                Ok((cons, spec, trace)) => {
                    let p = ParamLayout::new(&cons).len();
                    let ll = *trace
                        .loglik_path
                        .iter()
                        .max_by(|a, b| a.total_cmp(b))
                        .expect("non-empty path");
                    let (aic, bic) = information_criteria(ll, p, t, k);
                    let row = QSelectionRow {
                        q,
                        loglik: Some(ll),
                        n_params: p,
                        aic: Some(aic),
                        bic: Some(bic),
                        converged: trace.converged,
                        iterations: trace.iterations,
                        error: None,
                    };
                    (row, Some((spec, trace)))
                }
                Err(e) => {
                    let p = template(q, k).map(|c| ParamLayout::new(&c).len()).unwrap_or(0);
                    let row = QSelectionRow {
                        q,
                        loglik: None,
                        n_params: p,
                        aic: None,
                        bic: None,
                        converged: false,
                        iterations: 0,
                        error: Some(e.to_string()),
                    };
                    (row, None)
                }
            }
        })
        .collect();
    let best = results
        .iter()
        .filter_map(|(r, _)| r.bic.map(|b| (r.q, b)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::InvalidInput("every candidate factor count failed".into()))?;
    let (rows, fits) = results.into_iter().unzip();
    Ok(QSelection {
        q_best: best.0,
        rows,
        fits,
    })
}

/// Machine-readable summary of one fitted model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimationReport {
    pub model: String,
    pub source: String,
    pub n_factors: usize,
    pub n_series: usize,
    pub n_obs: usize,
    pub loglik: f64,
    pub n_params: usize,
    pub aic: f64,
    pub bic: f64,
    pub trace: EmTrace,
    pub lambda: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
    pub q_short: Vec<Vec<f64>>,
    pub r: Vec<f64>,
    pub standard_errors: Option<StandardErrors>,
    pub q_table: Vec<QSelectionRow>,
}

impl EstimationReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model: &str,
        source: &str,
        spec: &StateSpaceSpec,
        trace: EmTrace,
        cons: &ConstraintSet,
        n_obs: usize,
        standard_errors: Option<StandardErrors>,
        q_table: Vec<QSelectionRow>,
    ) -> Self {
        let loglik = trace
            .loglik_path
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let n_params = ParamLayout::new(cons).len();
        let (aic, bic) = information_criteria(loglik, n_params, n_obs, spec.n_series);
        Self {
            model: model.to_string(),
            source: source.to_string(),
            n_factors: spec.n_factors,
            n_series: spec.n_series,
            n_obs,
            loglik,
            n_params,
            aic,
            bic,
            trace,
            lambda: to_rows(&spec.lambda()),
            phi: spec.phi_diag(),
            q_short: to_rows(&spec.q_short()),
            r: spec.r_diag(),
            standard_errors,
            q_table,
        }
    }
}

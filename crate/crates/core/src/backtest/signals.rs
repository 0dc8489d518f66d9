//! Criterion variable, rolling classifier signals and the R²-gated variant.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::logit::{fit_logit, LogitStatus, DEFAULT_MAX_ITER};
use crate::error::{Error, Result};
use crate::stats::{norm_ppf, quantile_sorted};

pub const DEFAULT_WINDOW: usize = 126;

/// `z_{1/3}`, the lower tercile of the standard normal.
pub fn z_third() -> f64 {
    norm_ppf(1.0 / 3.0)
}

/// `Y_t = 1{r_t / √RV_t < z_{1/3}}`.
pub fn criterion_variable(returns: &[f64], rv: &[f64]) -> Result<Vec<bool>> {
    if returns.len() != rv.len() {
        return Err(Error::Dimension(format!(
            "{} returns but {} realized variances",
            returns.len(),
            rv.len()
        )));
    }
    if let Some(i) = rv.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput(format!("realized variance at {i} is not positive")));
    }
    let z = z_third();
    Ok(returns.iter().zip(rv).map(|(r, v)| r / v.sqrt() < z).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeSignalSeries {
    /// Row index (into the aligned inputs) of ledger step 0.
    pub start: usize,
    /// `ŷ[k]` predicts `Y` at step `k + 1`.
    pub y_hat: Vec<bool>,
    /// `s[0] = 0`, then ±1.
    pub s: Vec<i8>,
    /// McFadden R² of the classifier that produced `s[k + 1]`.
    pub r2: Vec<f64>,
    pub status: Vec<Option<LogitStatus>>,
    /// Gate level when this series is R²-gated.
    pub alpha_gate: Option<f64>,
    /// `z_α` used at each step when gated.
    pub r2_quantile: Vec<f64>,
    pub failed_windows: usize,
}

impl TradeSignalSeries {
    pub fn sells(&self) -> usize {
        self.s.iter().filter(|v| **v == -1).count()
    }

    pub fn trades(&self) -> u64 {
        trade_count(&self.s)
    }
}

/// `Tr = Σ |s_{i+1} − s_i|`.
pub fn trade_count(s: &[i8]) -> u64 {
    s.windows(2).map(|w| (w[1] as i64 - w[0] as i64).unsigned_abs()).sum()
}

/// At each step `t ≥ window`, fits the logit of `Y_{u+1}` on
/// `X_u = [1, r̃_u, S_u]` over the trailing `window` pairs `u = t−window..t−1`
/// and maps the prediction at `X_t` to `s_{t+1}` (−1 for a predicted
/// negative abnormal return, +1 otherwise). Windows whose fit fails give +1.
pub fn rolling_signals(
    signals: &DMatrix<f64>,
    returns: &[f64],
    rv: &[f64],
    window: usize,
) -> Result<TradeSignalSeries> {
    let n = returns.len();
    if signals.nrows() != n {
        return Err(Error::Dimension(format!("{n} returns but {} signal rows", signals.nrows())));
    }
    if n <= window + 1 || window == 0 {
        return Err(Error::InvalidInput(format!("need more than {} observations, got {n}", window + 1)));
    }
    let y = criterion_variable(returns, rv)?;
    let d = signals.ncols();
    let x_row = |u: usize| {
        let mut v = Vec::with_capacity(d + 2);
        v.push(1.0);
        v.push(returns[u] / rv[u].sqrt());
        v.extend(signals.row(u).iter().copied());
        v
    };
    let fits: Vec<(bool, f64, Option<LogitStatus>)> = (window..n - 1)
        .into_par_iter()
        .map(|t| {
            let x = DMatrix::from_fn(window, d + 2, |r, c| x_row(t - window + r)[c]);
            let yw: Vec<bool> = (0..window).map(|r| y[t - window + r + 1]).collect();
            match fit_logit(&x, &yw, DEFAULT_MAX_ITER) {
                Ok(st) => (st.predict(&x_row(t)), st.mcfadden_r2, Some(st.status)),
                Err(_) => (false, 0.0, None),
            }
        })
        .collect();
    let mut s = Vec::with_capacity(fits.len() + 1);
    s.push(0);
    s.extend(fits.iter().map(|f| if f.0 { -1 } else { 1 }));
    Ok(TradeSignalSeries {
        start: window,
        y_hat: fits.iter().map(|f| f.0).collect(),
        s,
        r2: fits.iter().map(|f| f.1).collect(),
        status: fits.iter().map(|f| f.2).collect(),
        alpha_gate: None,
        r2_quantile: Vec::new(),
        failed_windows: fits.iter().filter(|f| f.2.is_none()).count(),
    })
}

/// Keeps a sell at step `k + 1` only when `R²_k ≥ z_α`, the type-1 empirical
/// α-quantile of `R²_0..R²_{k−1}`. `z_0 = −∞`; an empty history passes.
pub fn gate_signal(raw: &TradeSignalSeries, alpha: f64) -> Result<TradeSignalSeries> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} outside [0, 1)")));
    }
    if raw.r2.len() + 1 != raw.s.len() {
        return Err(Error::Dimension("R² path does not match the signal".into()));
    }
    let mut out = raw.clone();
    out.alpha_gate = Some(alpha);
    out.r2_quantile = Vec::with_capacity(raw.r2.len());
    let mut past: Vec<f64> = Vec::with_capacity(raw.r2.len());
    for k in 0..raw.r2.len() {
        let z = if alpha == 0.0 || past.is_empty() {
            f64::NEG_INFINITY
        } else {
            quantile_sorted(&past, alpha)
        };
        out.r2_quantile.push(z);
        if raw.s[k + 1] == -1 && raw.r2[k] < z {
            out.s[k + 1] = 1;
        }
        let pos = past.partition_point(|v| *v < raw.r2[k]);
        past.insert(pos, raw.r2[k]);
    }
    Ok(out)
}

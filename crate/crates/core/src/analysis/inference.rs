//! Lagged quantile-regression tests of sentiment signals on market returns.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quantile::{lt_test, quantile_fit, sparsity, QuantileFit};
use crate::error::{Error, Result};

pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

/// `(r_t, S_{t−h})` for `t = h..n−1`, with `returns` and `signals` on the
/// same dates.
pub fn lagged_design(returns: &[f64], signals: &DMatrix<f64>, h: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = returns.len();
    if signals.nrows() != n {
        return Err(Error::Dimension(format!(
            "{n} returns but {} signal rows",
            signals.nrows()
        )));
    }
    if n <= h + 2 {
        return Err(Error::InvalidInput(format!("sample of {n} too short for lag {h}")));
    }
    let y = returns[h..].to_vec();
    let x = DMatrix::from_fn(n - h, signals.ncols(), |t, j| signals[(t, j)]);
    Ok((y, x))
}

pub fn lagged_fit(returns: &[f64], signals: &DMatrix<f64>, tau: f64, h: usize) -> Result<QuantileFit> {
    let (y, x) = lagged_design(returns, signals, h)?;
    quantile_fit(&y, &prune_zero_columns(&x), tau)
}

/// Drops columns that are identically zero; they carry no information and
/// make the design rank deficient.
pub fn prune_zero_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let keep: Vec<usize> = (0..x.ncols()).filter(|&j| x.column(j).iter().any(|v| *v != 0.0)).collect();
    x.select_columns(&keep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R1Cell {
    pub model: String,
    pub tau: f64,
    pub r1: f64,
    pub lt_stat: f64,
    pub df: usize,
    pub p_value: f64,
}

/// `R¹(τ)` and its `L_T` test for each model signal and level.
pub fn r1_table(
    returns: &[f64],
    models: &[(String, DMatrix<f64>)],
    taus: &[f64],
    h: usize,
) -> Result<Vec<R1Cell>> {
    let jobs: Vec<(usize, f64)> = (0..models.len()).flat_map(|m| taus.iter().map(move |&t| (m, t))).collect();
    jobs.par_iter()
        .map(|&(m, tau)| {
            let (name, sig) = &models[m];
            let fit = lagged_fit(returns, sig, tau, h)?;
            Ok(R1Cell {
                model: name.clone(),
                tau,
                r1: fit.r1,
                lt_stat: fit.lt_stat,
                df: fit.beta.len(),
                p_value: fit.p_value,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongShortTest {
    pub tau: f64,
    pub h: usize,
    pub v_hat: f64,
    /// Objective with the long-term block only.
    pub v_lt: f64,
    /// Objective with the short-term block only.
    pub v_st: f64,
    pub sparsity: f64,
    pub l_lt: f64,
    pub df_lt: usize,
    pub p_lt: f64,
    pub l_st: f64,
    pub df_st: usize,
    pub p_st: f64,
}

/// Tests the long-term block (restricted model: short-term only) and the
/// short-term block (restricted model: long-term only) of a lagged signal.
/// Degrees of freedom are the block sizes, whatever columns are pruned.
pub fn long_short_tests(
    returns: &[f64],
    signals: &DMatrix<f64>,
    lt_cols: &[usize],
    st_cols: &[usize],
    tau: f64,
    h: usize,
) -> Result<LongShortTest> {
    if lt_cols.is_empty() || st_cols.is_empty() {
        return Err(Error::InvalidInput("both signal blocks must be non-empty".into()));
    }
    let (y, x) = lagged_design(returns, signals, h)?;
    let mut all: Vec<usize> = lt_cols.iter().chain(st_cols).copied().collect();
    all.sort_unstable();
    all.dedup();
    if all.len() != lt_cols.len() + st_cols.len() || all.iter().any(|&c| c >= x.ncols()) {
        return Err(Error::InvalidInput("signal blocks overlap or exceed the signal width".into()));
    }
    let full = quantile_fit(&y, &prune_zero_columns(&x.select_columns(&all)), tau)?;
    let lt_only = quantile_fit(&y, &prune_zero_columns(&x.select_columns(lt_cols)), tau)?;
    let st_only = quantile_fit(&y, &prune_zero_columns(&x.select_columns(st_cols)), tau)?;
    let v_hat = full.v_hat.min(lt_only.v_hat).min(st_only.v_hat);
    let s = full.sparsity;
    let (l_lt, p_lt) = lt_test(st_only.v_hat, v_hat, tau, lt_cols.len(), s)?;
    let (l_st, p_st) = lt_test(lt_only.v_hat, v_hat, tau, st_cols.len(), s)?;
    Ok(LongShortTest {
        tau,
        h,
        v_hat,
        v_lt: lt_only.v_hat,
        v_st: st_only.v_hat,
        sparsity: s,
        l_lt,
        df_lt: lt_cols.len(),
        p_lt,
        l_st,
        df_st: st_cols.len(),
        p_st,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLagRow {
    pub tau: f64,
    pub h: usize,
    pub v1: f64,
    pub vh: f64,
    pub stat: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Design `[r_{t−1}, S_{t−1}, …, S_{t−h}]` on `t = h..n−1` (0-based).
fn multi_lag_design(returns: &[f64], signals: &DMatrix<f64>, h: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = returns.len();
    let d = signals.ncols();
    let rows = n - h;
    let x = DMatrix::from_fn(rows, 1 + d * h, |r, c| {
        let t = r + h;
        if c == 0 {
            returns[t - 1]
        } else {
            let lag = (c - 1) / d + 1;
            signals[(t - lag, (c - 1) % d)]
        }
    });
    (returns[h..].to_vec(), x)
}

/// For each `h = 2..=h_max`, compares the lag-1 model with the lag-h model
/// on the common sample `t > h`; `df = dim·(h − 1)`.
pub fn multi_lag_test(returns: &[f64], signals: &DMatrix<f64>, tau: f64, h_max: usize) -> Result<Vec<MultiLagRow>> {
    if h_max < 2 {
        return Err(Error::InvalidInput(format!("h_max must be at least 2, got {h_max}")));
    }
    let n = returns.len();
    if signals.nrows() != n {
        return Err(Error::Dimension(format!("{n} returns but {} signal rows", signals.nrows())));
    }
    let d = signals.ncols();
    if n <= h_max + 2 + (1 + d * h_max) {
        return Err(Error::InvalidInput(format!("sample of {n} too short for {h_max} lags")));
    }
    (2..=h_max)
        .into_par_iter()
        .map(|h| {
            let (y, x) = multi_lag_design(returns, signals, h);
            let restricted = x.columns(0, 1 + d).into_owned();
            let big = quantile_fit(&y, &x, tau)?;
            let small = quantile_fit(&y, &restricted, tau)?;
            let vh = big.v_hat.min(small.v_hat);
            let s = sparsity(&big.residuals, tau)?;
            let df = d * (h - 1);
            let (stat, p_value) = lt_test(small.v_hat, vh, tau, df, s)?;
            Ok(MultiLagRow { tau, h, v1: small.v_hat, vh, stat, df, p_value })
        })
        .collect()
}

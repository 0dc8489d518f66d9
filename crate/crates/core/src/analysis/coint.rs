//! Engle–Granger two-step cointegration test.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ols::{ols, ols_raw};
use crate::error::{Error, Result};

/// MacKinnon response-surface coefficients `(β∞, β₁, β₂)` for two variables,
/// constant, no trend, at 1%, 5% and 10%.
const MACKINNON_N2: [(f64, [f64; 3]); 3] = [
    (0.01, [-3.89644, -10.9519, -33.527]),
    (0.05, [-3.33613, -6.1101, -6.823]),
    (0.10, [-3.04445, -4.2412, -2.720]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PBand {
    #[serde(rename = "<0.01")]
    Below1,
    #[serde(rename = "0.01-0.05")]
    Below5,
    #[serde(rename = "0.05-0.10")]
    Below10,
    #[serde(rename = ">0.10")]
    Above10,
}

impl PBand {
    pub fn stars(self) -> &'static str {
        match self {
            PBand::Below1 => "***",
            PBand::Below5 => "**",
            PBand::Below10 => "*",
            PBand::Above10 => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngleGranger {
    pub intercept: f64,
    pub coint_beta: f64,
    /// `−∞` when the residuals vanish.
    pub adf_stat: f64,
    pub lags: usize,
    pub critical: [f64; 3],
    pub p_band: PBand,
    /// Rejection of no cointegration at 5%.
    pub reject: bool,
}

/// Schwert lag rule `⌊12 (T/100)^{1/4}⌋`.
pub fn schwert_lags(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

pub fn critical_values(n: usize) -> [f64; 3] {
    let t = n as f64;
    MACKINNON_N2.map(|(_, b)| b[0] + b[1] / t + b[2] / (t * t))
}

/// Regresses `y` on `[1, x]`, then runs an ADF regression with constant on
/// the residuals.
pub fn engle_granger(x: &[f64], y: &[f64]) -> Result<EngleGranger> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::Dimension(format!("x has {n} points, y has {}", y.len())));
    }
    if n < 50 {
        return Err(Error::InvalidInput(format!("Engle-Granger needs at least 50 points, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cointegration input".into()));
    }
    let constant = |s: &[f64]| s.iter().all(|v| *v == s[0]);
    if constant(x) || constant(y) {
        return Err(Error::InvalidInput("constant series".into()));
    }
    let xm = DMatrix::from_column_slice(n, 1, x);
    let (coef, resid, _) = ols_raw(y, &xm)?;
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let critical = critical_values(n);
    let lags = schwert_lags(n);
    let adf_stat = if resid.iter().all(|e| e.abs() <= 1e-10 * scale) {
        f64::NEG_INFINITY
    } else {
        adf_stat(resid.as_slice(), lags)?
    };
    let p_band = if adf_stat < critical[0] {
        PBand::Below1
    } else if adf_stat < critical[1] {
        PBand::Below5
    } else if adf_stat < critical[2] {
        PBand::Below10
    } else {
        PBand::Above10
    };
    Ok(EngleGranger {
        intercept: coef[0],
        coint_beta: coef[1],
        adf_stat,
        lags,
        critical,
        p_band,
        reject: matches!(p_band, PBand::Below1 | PBand::Below5),
    })
}

/// t-statistic of ρ in `Δe_t = c + ρ e_{t−1} + Σ_{j≤p} γ_j Δe_{t−j} + ε_t`.
pub fn adf_stat(e: &[f64], lags: usize) -> Result<f64> {
    let n = e.len();
    if n < lags + 10 {
        return Err(Error::InvalidInput("series too short for the ADF regression".into()));
    }
    let de: Vec<f64> = e.windows(2).map(|w| w[1] - w[0]).collect();
    // Δe index i corresponds to Δe_{i+1}; usable rows start at i = lags.
    let rows = de.len() - lags;
    let y: Vec<f64> = de[lags..].to_vec();
    let x = DMatrix::from_fn(rows, lags + 1, |r, c| {
        let i = r + lags;
        if c == 0 {
            e[i]
        } else {
            de[i - c]
        }
    });
    let fit = ols(&y, &x)?;
    Ok(fit.t_stat(1))
}

//! Single-asset long/short ledger with proportional costs, and its metrics.
//!
//! The signal `s_{t+1}` is decided at the close of day `t` and executed at
//! that close, so the position change and its cost are valued at `M_t`:
//!
//! `cash_{t+1} = cash_t − (s_{t+1} − s_t) c₀ M_t − |s_{t+1} − s_t| c₀ M_t cost/2`,
//! `P_{t+1} = s_{t+1} c₀ M_{t+1} + cash_{t+1}`, with `c₀ = cash₀ / M₀`.
//!
//! Entering buy-and-hold at 0.1% on $100,000 therefore costs exactly $50.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CASH: f64 = 100_000.0;
pub const TRADING_DAYS: f64 = 252.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioLedger {
    pub signal: Vec<i8>,
    pub market: Vec<f64>,
    pub position_value: Vec<f64>,
    pub cash: Vec<f64>,
    pub portfolio: Vec<f64>,
    /// Cost paid on entering each step.
    pub costs: Vec<f64>,
    pub shares: f64,
    pub cost_rate: f64,
    pub trades: u64,
    pub total_costs: f64,
}

pub fn run_ledger(signal: &[i8], market: &[f64], cash0: f64, cost_rate: f64) -> Result<PortfolioLedger> {
    let n = signal.len();
    if market.len() != n {
        return Err(Error::Dimension(format!("{n} signals but {} market levels", market.len())));
    }
    if n == 0 {
        return Err(Error::InvalidInput("empty signal".into()));
    }
    if signal[0] != 0 {
        return Err(Error::InvalidInput("the signal must start flat (s_0 = 0)".into()));
    }
    if signal.iter().any(|s| !(-1..=1).contains(s)) {
        return Err(Error::InvalidInput("signal values must be −1, 0 or +1".into()));
    }
    if market.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
        return Err(Error::InvalidInput("market levels must be positive".into()));
    }
    if !(cost_rate >= 0.0) {
        return Err(Error::InvalidInput(format!("cost rate {cost_rate} is negative")));
    }
    let c0 = cash0 / market[0];
    let mut cash = vec![cash0; n];
    let mut costs = vec![0.0; n];
    let mut trades = 0u64;
    for t in 0..n - 1 {
        let ds = (signal[t + 1] - signal[t]) as f64;
        let cost = ds.abs() * c0 * market[t] * cost_rate / 2.0;
        cash[t + 1] = cash[t] - ds * c0 * market[t] - cost;
        costs[t + 1] = cost;
        trades += ds.abs() as u64;
    }
    let position_value: Vec<f64> = (0..n).map(|t| signal[t] as f64 * c0 * market[t]).collect();
    let portfolio: Vec<f64> = (0..n).map(|t| position_value[t] + cash[t]).collect();
    let total_costs = costs.iter().sum();
    Ok(PortfolioLedger {
        signal: signal.to_vec(),
        market: market.to_vec(),
        position_value,
        cash,
        portfolio,
        costs,
        shares: c0,
        cost_rate,
        trades,
        total_costs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub annual_return: f64,
    pub annual_volatility: f64,
    pub annual_negative_volatility: f64,
    /// `None` when the volatility is zero.
    pub sharpe: Option<f64>,
    pub sortino: Option<f64>,
    /// Largest peak-to-trough fall of the portfolio value, in currency.
    pub max_drawdown: f64,
    pub final_value: f64,
    pub trades: u64,
    pub total_costs: f64,
}

/// Annualized statistics of daily log-returns of `P_t`.
pub fn performance_metrics(ledger: &PortfolioLedger) -> Result<Metrics> {
    let mut m = value_metrics(&ledger.portfolio)?;
    m.trades = ledger.trades;
    m.total_costs = ledger.total_costs;
    Ok(m)
}

pub fn value_metrics(p: &[f64]) -> Result<Metrics> {
    if p.len() < 2 {
        return Err(Error::InvalidInput("need at least two portfolio values".into()));
    }
    if p.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput("portfolio value is not positive; log-returns undefined".into()));
    }
    let r: Vec<f64> = p.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let var = if r.len() > 1 {
        r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let down = (r.iter().map(|v| v.min(0.0).powi(2)).sum::<f64>() / n).sqrt();
    let annual_return = mean * TRADING_DAYS;
    let annual_volatility = var.sqrt() * TRADING_DAYS.sqrt();
    let annual_negative_volatility = down * TRADING_DAYS.sqrt();
    let ratio = |den: f64| (den > 0.0).then(|| annual_return / den);
    let mut peak = p[0];
    let mut mdd: f64 = 0.0;
    for &v in p {
        peak = peak.max(v);
        mdd = mdd.max(peak - v);
    }
    Ok(Metrics {
        annual_return,
        annual_volatility,
        annual_negative_volatility,
        sharpe: ratio(annual_volatility),
        sortino: ratio(annual_negative_volatility),
        max_drawdown: mdd,
        final_value: *p.last().expect("non-empty"),
        trades: 0,
        total_costs: 0.0,
    })
}

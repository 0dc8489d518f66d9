//! Sentiment-driven long/short strategy on a representative portfolio.

pub mod ledger;
pub mod logit;
pub mod montecarlo;
pub mod signals;

pub use ledger::{performance_metrics, run_ledger, value_metrics, Metrics, PortfolioLedger, DEFAULT_CASH};
pub use logit::{fit_logit, ClassifierState, LogitStatus};
pub use montecarlo::{mc_significance, shuffled, McReport, SimQuantiles, DEFAULT_SIMS};
pub use signals::{
    criterion_variable, gate_signal, rolling_signals, trade_count, z_third, TradeSignalSeries,
    DEFAULT_WINDOW,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ALPHA_GRID: [f64; 6] = [0.0, 0.2, 0.35, 0.5, 0.65, 0.8];
pub const DEFAULT_COST: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyResult {
    /// `None` for the ungated signal and for buy-and-hold.
    pub alpha: Option<f64>,
    pub label: String,
    pub metrics: Metrics,
    pub sells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestRun {
    pub model: String,
    pub window: usize,
    pub cost_rate: f64,
    pub start: usize,
    pub raw: TradeSignalSeries,
    pub strategies: Vec<StrategyResult>,
    /// Ledgers in the order of `strategies`.
    pub ledgers: Vec<PortfolioLedger>,
}

/// Buy-and-hold, the raw signal and each gated variant on one aligned sample.
/// `market` is the portfolio level `M_t` on the same rows as `returns`.
#[allow(clippy::too_many_arguments)]
pub fn run_backtest(
    model: &str,
    signals: &DMatrix<f64>,
    returns: &[f64],
    rv: &[f64],
    market: &[f64],
    window: usize,
    cost_rate: f64,
    alphas: &[f64],
) -> Result<BacktestRun> {
    if market.len() != returns.len() {
        return Err(Error::Dimension("market level and returns differ in length".into()));
    }
    let raw = rolling_signals(signals, returns, rv, window)?;
    let m = &market[raw.start..raw.start + raw.s.len()];
    let mut strategies = Vec::new();
    let mut ledgers = Vec::new();
    let mut push = |alpha: Option<f64>, label: String, s: &[i8]| -> Result<()> {
        let l = run_ledger(s, m, DEFAULT_CASH, cost_rate)?;
        strategies.push(StrategyResult {
            alpha,
            label,
            metrics: performance_metrics(&l)?,
            sells: s.iter().filter(|v| **v == -1).count(),
        });
        ledgers.push(l);
        Ok(())
    };
    let mut bh = vec![1i8; raw.s.len()];
    bh[0] = 0;
    push(None, "buy_and_hold".into(), &bh)?;
    push(None, model.to_string(), &raw.s)?;
    for &a in alphas {
        let g = gate_signal(&raw, a)?;
        push(Some(a), format!("{model}_alpha_{a}"), &g.s)?;
    }
    Ok(BacktestRun {
        model: model.to_string(),
        window,
        cost_rate,
        start: raw.start,
        raw,
        strategies,
        ledgers,
    })
}

//! Significance of a strategy against randomly shuffled versions of its signal.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ledger::{performance_metrics, run_ledger};
use crate::error::{Error, Result};
use crate::rng::{child_seed, stream};
use crate::stats::quantile_sorted;

pub const DEFAULT_SIMS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub n_sims: usize,
    pub seed: u64,
    pub sharpe: Option<f64>,
    pub sortino: Option<f64>,
    /// Share of shuffled strategies with a lower ratio; ties count one half.
    pub sharpe_percentile: f64,
    pub sortino_percentile: f64,
    pub sharpe_sims: SimQuantiles,
    pub sortino_sims: SimQuantiles,
    pub sells: usize,
    /// Whether every draw kept the original number of sells.
    pub sells_preserved: bool,
}

/// Upper quantiles of the shuffled-signal ratios (undefined draws excluded).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimQuantiles {
    pub best5: f64,
    pub best10: f64,
    pub best25: f64,
    pub median: f64,
    pub n_defined: usize,
}

impl SimQuantiles {
    fn of(sims: &[Option<f64>]) -> Self {
        let mut v: Vec<f64> = sims.iter().flatten().copied().collect();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| quantile_sorted(&v, p);
        Self {
            best5: q(0.95),
            best10: q(0.90),
            best25: q(0.75),
            median: q(0.5),
            n_defined: v.len(),
        }
    }
}

/// Permutes `s[1..]` uniformly (the flat start stays put).
pub fn shuffled(signal: &[i8], seed: u64) -> Vec<i8> {
    let mut s = signal.to_vec();
    if s.len() > 1 {
        s[1..].shuffle(&mut stream(seed));
    }
    s
}

fn rank(real: Option<f64>, sims: &[Option<f64>]) -> f64 {
    let Some(r) = real else { return f64::NAN };
    let score: f64 = sims
        .iter()
        .map(|s| match s {
            Some(v) if r > *v => 1.0,
            Some(v) if r == *v => 0.5,
            Some(_) => 0.0,
            None => 1.0,
        })
        .sum();
    score / sims.len() as f64
}

/// Draw `i` uses the stream `child_seed(seed, i)`, so the result does not
/// depend on how the draws are spread over threads.
pub fn mc_significance(
    signal: &[i8],
    market: &[f64],
    cash0: f64,
    cost_rate: f64,
    n_sims: usize,
    seed: u64,
) -> Result<McReport> {
    let sells = signal.iter().filter(|v| **v == -1).count();
    if sells == 0 {
        return Err(Error::InvalidInput("signal has no sells to shuffle".into()));
    }
    if n_sims == 0 {
        return Err(Error::InvalidInput("n_sims must be positive".into()));
    }
    let real = performance_metrics(&run_ledger(signal, market, cash0, cost_rate)?)?;
    let draws: Vec<(Option<f64>, Option<f64>, bool)> = (0..n_sims)
        .into_par_iter()
        .map(|i| {
            let s = shuffled(signal, child_seed(seed, i as u64));
            let kept = s.iter().filter(|v| **v == -1).count() == sells;
            let m = run_ledger(&s, market, cash0, cost_rate).and_then(|l| performance_metrics(&l));
            match m {
                Ok(m) => (m.sharpe, m.sortino, kept),
                Err(_) => (None, None, kept),
            }
        })
        .collect();
    let sh: Vec<Option<f64>> = draws.iter().map(|d| d.0).collect();
    let so: Vec<Option<f64>> = draws.iter().map(|d| d.1).collect();
    Ok(McReport {
        n_sims,
        seed,
        sharpe: real.sharpe,
        sortino: real.sortino,
        sharpe_percentile: rank(real.sharpe, &sh),
        sortino_percentile: rank(real.sortino, &so),
        sharpe_sims: SimQuantiles::of(&sh),
        sortino_sims: SimQuantiles::of(&so),
        sells,
        sells_preserved: draws.iter().all(|d| d.2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shuffle_keeps_start_and_multiset() {
        let s: Vec<i8> = std::iter::once(0).chain((0..50).map(|i| if i % 3 == 0 { -1 } else { 1 })).collect();
        let t = shuffled(&s, 4);
        assert_eq!(t[0], 0);
        let mut a = s.clone();
        let mut b = t.clone();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert_eq!(shuffled(&s, 4), t);
    }

    #[test]
    fn rank_with_ties() {
        assert_eq!(rank(Some(1.0), &[Some(0.0), Some(1.0), Some(2.0), None]), 0.625);
    }
}

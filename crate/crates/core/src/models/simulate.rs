//! Forward simulation of the augmented system.

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::panel::{business_days, SentimentPanel, Source};
use crate::error::Result;
use crate::linalg::psd_sqrt;
use crate::rng;
use crate::statespace::StateSpaceSpec;

/// Simulated states `x_1..x_T` (`T × (q+K)`, long-term block first).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTruth {
    pub states: DMatrix<f64>,
    pub n_factors: usize,
}

impl LatentTruth {
    pub fn long_term(&self) -> DMatrix<f64> {
        self.states.columns(0, self.n_factors).into_owned()
    }

    pub fn short_term(&self) -> DMatrix<f64> {
        let k = self.states.ncols() - self.n_factors;
        self.states.columns(self.n_factors, k).into_owned()
    }

    /// Cross-sectional mean of the short-term components.
    pub fn psi_bar(&self) -> Vec<f64> {
        let s = self.short_term();
        let k = s.ncols().max(1) as f64;
        (0..s.nrows()).map(|t| s.row(t).sum() / k).collect()
    }
}

pub fn default_start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2010, 1, 4).expect("valid date")
}

/// Draws `T` observations starting from `x_0 = a`. The returned panel is
/// flagged synthetic, so values are not restricted to `[−1, 1]`.
pub fn simulate_mlss(
    spec: &StateSpaceSpec,
    t_len: usize,
    seed: u64,
) -> Result<(SentimentPanel, LatentTruth)> {
    let (values, states) = simulate_raw(spec, t_len, seed)?;
    let k = spec.n_series;
    let assets = (1..=k).map(|i| format!("S{i:02}")).collect();
    let panel = SentimentPanel::new(
        values,
        business_days(default_start_date(), t_len),
        assets,
        Source::News,
        true,
    )?;
    Ok((panel, LatentTruth { states, n_factors: spec.n_factors }))
}

/// Observation and state matrices without panel metadata.
pub fn simulate_raw(
    spec: &StateSpaceSpec,
    t_len: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = spec.state_dim();
    let k = spec.n_series;
    let lq = psd_sqrt(&spec.q_tilde, 1e-10, "Q")?;
    let lr = psd_sqrt(&spec.r, 1e-10, "R")?;
    let mut rng = rng::stream(seed);
    let mut draw = |m: usize| -> DVector<f64> {
        DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng))
    };
    let mut x = spec.a.clone();
    let mut obs = DMatrix::zeros(t_len, k);
    let mut states = DMatrix::zeros(t_len, n);
    for t in 0..t_len {
        x = &spec.phi_tilde * &x + &lq * draw(n);
        let y = &spec.lambda_tilde * &x + &lr * draw(k);
        obs.set_row(t, &y.transpose());
        states.set_row(t, &x.transpose());
    }
    Ok((obs, states))
}

/// Reference MLSS system used for demos and recovery studies: lower-triangular
/// loadings of order 0.01, short-term persistence spread over `[0.3, 0.8]`,
/// equicorrelated short-term innovations (sd 0.1, correlation 0.3) and
/// observation noise sd ≈ 0.045. The slow long-term block keeps the filtered
/// short-term mean within reach of the true one at T = 2000.
pub fn demo_spec(n_series: usize, n_factors: usize) -> Result<StateSpaceSpec> {
    let (k, q) = (n_series, n_factors);
    let lambda = DMatrix::from_fn(k, q, |i, j| {
        if j > i {
            0.0
        } else {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            let base = if j == 0 { 1.0 } else { sign };
            DEMO_LOADING * base * (1.0 + 0.15 * i as f64) / (1.0 + j as f64 * 0.3)
        }
    });
    let phi: Vec<f64> = (0..k)
        .map(|i| if k == 1 { 0.5 } else { 0.3 + 0.5 * i as f64 / (k - 1) as f64 })
        .collect();
    let qs = DMatrix::from_fn(k, k, |i, j| if i == j { 0.01 } else { 0.003 });
    let r = vec![DEMO_NOISE_VAR; k];
    StateSpaceSpec::mlss(&lambda, &phi, &qs, &r)
}

pub const DEMO_LOADING: f64 = 0.01;
pub const DEMO_NOISE_VAR: f64 = 0.002;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_noise_means_zero_panel() {
        let mut spec = demo_spec(3, 1).unwrap();
        spec.q_tilde.fill(0.0);
        spec.r.fill(0.0);
        let (p, truth) = simulate_mlss(&spec, 50, 1).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
        assert!(truth.states.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_seed_same_panel() {
        let spec = demo_spec(4, 2).unwrap();
        let a = simulate_mlss(&spec, 100, 9).unwrap();
        let b = simulate_mlss(&spec, 100, 9).unwrap();
        let c = simulate_mlss(&spec, 100, 10).unwrap();
        assert_eq!(a.0, b.0);
        assert_ne!(a.0.values, c.0.values);
    }

    #[test]
    fn demo_spec_is_identified() {
        for (k, q) in [(6, 2), (6, 3), (1, 1), (4, 0)] {
            assert!(demo_spec(k, q).unwrap().invariant_violations(0.0).is_empty());
        }
    }
}

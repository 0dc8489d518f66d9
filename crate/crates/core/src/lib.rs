//! Estimation and evaluation toolkit for the multivariate long/short sentiment
//! state-space model (MLSS) and its nested variants.
//!
//! * [`statespace`]: augmented system, Kalman filter and smoother.
//! * [`em`]: constrained EM, standard errors, factor-count selection.
//! * [`models`]: panels, model wrappers, signals and simulation.
//! * [`analysis`]: PCA market factor, cointegration, correlation regressions,
//!   quantile regression inference.
//! * [`backtest`]: logit classifier, trading signals, ledger, Monte Carlo.

pub mod analysis;
pub mod backtest;
pub mod em;
pub mod error;
pub mod io;
pub mod linalg;
pub mod models;
pub mod rng;
pub mod serde_mat;
pub mod statespace;
pub mod stats;

pub use error::{Error, Result};
pub use statespace::{
    kalman_filter, kalman_smoother, loglikelihood, FilterOutput, SmootherOutput, StateSpaceSpec,
};
pub use nalgebra::{DMatrix, DVector};

//! Downstream statistics: market factor, cointegration, correlation
//! regressions and quantile-regression inference.

pub mod coint;
pub mod correlation;
pub mod inference;
pub mod ols;
pub mod pca;
pub mod quantile;
pub mod sectors;

pub use coint::{engle_granger, EngleGranger, PBand};
pub use correlation::{
    correlation_regression, pair_regression, unvechl, vechl, CorrRegression, CorrelationInputs,
    CorrelationStudy,
};
pub use inference::{
    lagged_fit, long_short_tests, multi_lag_test, r1_table, stars, LongShortTest, MultiLagRow, R1Cell,
};
pub use ols::{ols, OlsFit};
pub use pca::{pca_market, MarketFactor};
pub use quantile::{lt_test, quantile_fit, rho, QuantileFit, TAU_GRID};
pub use sectors::{sector_map, sector_of, DJIA27};

//! Sentiment panels, the model family built on the state-space core, and
//! synthetic data.

mod panel;
mod signals;
mod simulate;

pub use panel::{
    aggregate_daily, business_days, fill_missing, FillReport, IntradayRecord, IntradaySentiment,
    SentimentPanel, Source, DEFAULT_CUTOFF_HOUR, DEFAULT_FILL_WINDOW, DEFAULT_MISSING_CAP,
};
pub use signals::{fit_model, fit_source, signal_to_noise, FilteredSignals, ModelTag, SourceFit};
pub use simulate::{
    default_start_date, demo_spec, simulate_mlss, simulate_raw, LatentTruth, DEMO_LOADING,
    DEMO_NOISE_VAR,
};

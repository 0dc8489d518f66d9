//! Pipeline configuration: one JSON document shared by every subcommand.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use mlss_core::analysis::TAU_GRID;
use mlss_core::backtest::{ALPHA_GRID, DEFAULT_COST, DEFAULT_SIMS, DEFAULT_WINDOW};
use mlss_core::em::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use mlss_core::models::{default_start_date, ModelTag, DEFAULT_CUTOFF_HOUR};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root seed; every stochastic stage draws from a named substream of it.
    pub seed: Option<u64>,
    pub data: DataPaths,
    pub synth: SynthConfig,
    pub estimate: EstimateConfig,
    pub analyze: AnalyzeConfig,
    pub backtest: BacktestConfig,
    pub mc: McConfig,
}

/// Input files. Relative paths are taken from the config file's directory;
/// absent ones default to the outputs of earlier stages under `--out`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub news: Option<PathBuf>,
    pub social: Option<PathBuf>,
    /// Minute-level files (`date,minute,ticker,score,buzz`), used instead of
    /// the daily panels when given. Days follow the price calendar.
    pub news_intraday: Option<PathBuf>,
    pub social_intraday: Option<PathBuf>,
    pub cutoff_hour: Option<u32>,
    pub prices: Option<PathBuf>,
    pub rv: Option<PathBuf>,
    /// Directory holding `signals_<MODEL>.csv` and the parameter files.
    pub estimates: Option<PathBuf>,
    /// Sentiment outside `[−1, 1]` is allowed. Defaults to true when the
    /// panels come from `synth`.
    pub synthetic: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_series: usize,
    pub n_factors: usize,
    pub n_obs: usize,
    pub start_date: NaiveDate,
    /// Daily volatility of the common return factor.
    pub base_vol: f64,
    /// Log-volatility response to standardized lagged short-term news sentiment.
    pub vol_effect: f64,
    /// Mean response, in units of `base_vol`.
    pub mean_effect: f64,
    pub idio_vol: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_series: 6,
            n_factors: 2,
            n_obs: 2000,
            start_date: default_start_date(),
            base_vol: 0.01,
            vol_effect: 0.3,
            mean_effect: 0.25,
            idio_vol: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub models: Vec<ModelTag>,
    pub q_news: usize,
    pub q_social: usize,
    /// Factor counts compared by AIC/BIC for the MLSS model.
    pub q_grid: Vec<usize>,
    /// Use the BIC choice instead of `q_news`/`q_social`.
    pub select_q: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub accelerate: bool,
    pub standard_errors: bool,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            models: ModelTag::ALL.to_vec(),
            q_news: 2,
            q_social: 2,
            q_grid: vec![1, 2, 3],
            select_q: false,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            accelerate: false,
            standard_errors: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub tau_grid: Vec<f64>,
    /// Forecast lag of the R¹ and long/short tests.
    pub h: usize,
    /// Largest lag of the multi-lag test (0 skips it).
    pub h_max: usize,
    pub q_mrk: usize,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            tau_grid: TAU_GRID.to_vec(),
            h: 1,
            h_max: 5,
            q_mrk: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub window: usize,
    pub cost_rate: f64,
    pub alpha_grid: Vec<f64>,
    pub cash: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            cost_rate: DEFAULT_COST,
            alpha_grid: ALPHA_GRID.to_vec(),
            cash: mlss_core::backtest::DEFAULT_CASH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub n_sims: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { n_sims: DEFAULT_SIMS }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: None,
            data: DataPaths::default(),
            synth: SynthConfig::default(),
            estimate: EstimateConfig::default(),
            analyze: AnalyzeConfig::default(),
            backtest: BacktestConfig::default(),
            mc: McConfig::default(),
        }
    }
}

/// Default file names written by the stages.
pub mod layout {
    pub const DATA: &str = "data";
    pub const ESTIMATE: &str = "estimate";
    pub const ANALYZE: &str = "analyze";
    pub const BACKTEST: &str = "backtest";
    pub const MC: &str = "mc";
    pub const NEWS: &str = "news.csv";
    pub const SOCIAL: &str = "social.csv";
    pub const PRICES: &str = "prices.csv";
    pub const RV: &str = "rv.csv";
    pub const TRADE_SIGNALS: &str = "trade_signals.csv";
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.data.rebase(base);
        Ok(cfg)
    }

    /// Fills every unset input path with the default location under `out`,
    /// so the echoed config names exactly the files that were read.
    pub fn resolve(&mut self, out: &Path, seed: Option<u64>) {
        if seed.is_some() {
            self.seed = seed;
        }
        let d = &mut self.data;
        let from_synth = d.news.is_none() && d.news_intraday.is_none();
        let data = out.join(layout::DATA);
        if d.news_intraday.is_none() {
            d.news.get_or_insert_with(|| data.join(layout::NEWS));
        }
        if d.social_intraday.is_none() {
            d.social.get_or_insert_with(|| data.join(layout::SOCIAL));
        }
        d.prices.get_or_insert_with(|| data.join(layout::PRICES));
        d.rv.get_or_insert_with(|| data.join(layout::RV));
        d.estimates.get_or_insert_with(|| out.join(layout::ESTIMATE));
        d.synthetic.get_or_insert(from_synth);
        if d.news_intraday.is_some() || d.social_intraday.is_some() {
            d.cutoff_hour.get_or_insert(DEFAULT_CUTOFF_HOUR);
        }
    }

    pub fn seed_required(&self, stage: &str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Validation(format!("{stage} is stochastic: set \"seed\" or pass --seed")))
    }

    pub fn check_estimate(&self) -> Result<(), CliError> {
        let e = &self.estimate;
        if e.models.is_empty() {
            return Err(CliError::Validation("estimate.models is empty".into()));
        }
        if !(e.tol > 0.0) || e.max_iter == 0 {
            return Err(CliError::Validation("estimate.tol and estimate.max_iter must be positive".into()));
        }
        if e.q_news == 0 || e.q_social == 0 || e.q_grid.contains(&0) {
            return Err(CliError::Validation("factor counts must be positive".into()));
        }
        if e.select_q && e.q_grid.is_empty() {
            return Err(CliError::Validation("select_q needs a non-empty q_grid".into()));
        }
        Ok(())
    }

    pub fn check_analyze(&self) -> Result<(), CliError> {
        let a = &self.analyze;
        if a.tau_grid.is_empty() || a.tau_grid.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(CliError::Validation("analyze.tau_grid must hold values in (0, 1)".into()));
        }
        if a.h == 0 {
            return Err(CliError::Validation("analyze.h must be at least 1".into()));
        }
        if a.h_max == 1 {
            return Err(CliError::Validation("analyze.h_max must be 0 (skip) or at least 2".into()));
        }
        if a.q_mrk == 0 {
            return Err(CliError::Validation("analyze.q_mrk must be positive".into()));
        }
        Ok(())
    }

    pub fn check_backtest(&self) -> Result<(), CliError> {
        let b = &self.backtest;
        if b.window < 2 {
            return Err(CliError::Validation("backtest.window must be at least 2".into()));
        }
        if !(b.cost_rate >= 0.0) || !(b.cash > 0.0) {
            return Err(CliError::Validation("backtest.cost_rate ≥ 0 and cash > 0 required".into()));
        }
        if b.alpha_grid.iter().any(|a| !(0.0..1.0).contains(a)) {
            return Err(CliError::Validation("backtest.alpha_grid values must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

impl DataPaths {
    fn rebase(&mut self, base: &Path) {
        for p in [
            &mut self.news,
            &mut self.social,
            &mut self.news_intraday,
            &mut self.social_intraday,
            &mut self.prices,
            &mut self.rv,
            &mut self.estimates,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// Errors naming every missing file at once.
pub fn require_files(files: &[(&str, &Path)]) -> Result<(), CliError> {
    let missing: Vec<String> = files
        .iter()
        .filter(|(_, p)| !p.is_file())
        .map(|(what, p)| format!("{what}: {}", p.display()))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("missing inputs: {}", missing.join("; "))))
    }
}

//! The five sentiment filters and the signal vectors they feed downstream.

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::panel::{SentimentPanel, Source};
use crate::em::{fit_em, initial_local_level, initial_spec, ConstraintSet, EmOptions, EmTrace};
use crate::error::{Error, Result};
use crate::statespace::{kalman_filter, StateSpaceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelTag {
    Mlss,
    Lss,
    Mlnsl,
    Lnsl,
    Obs,
}

impl ModelTag {
    pub const ALL: [ModelTag; 5] = [
        ModelTag::Mlss,
        ModelTag::Lss,
        ModelTag::Mlnsl,
        ModelTag::Lnsl,
        ModelTag::Obs,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelTag::Mlss => "MLSS",
            ModelTag::Lss => "LSS",
            ModelTag::Mlnsl => "MLNSL",
            ModelTag::Lnsl => "LNSL",
            ModelTag::Obs => "Obs",
        }
    }

    /// Signal dimension for a given pair of news/social factor counts.
    pub fn signal_dim(&self, q_news: usize, q_social: usize) -> usize {
        match self {
            ModelTag::Mlss => q_news + q_social + 2,
            ModelTag::Lss => 4,
            _ => 2,
        }
    }

    pub fn has_short_term(&self) -> bool {
        matches!(self, ModelTag::Mlss | ModelTag::Lss)
    }
}

impl std::fmt::Display for ModelTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MLSS" => Ok(ModelTag::Mlss),
            "LSS" => Ok(ModelTag::Lss),
            "MLNSL" => Ok(ModelTag::Mlnsl),
            "LNSL" => Ok(ModelTag::Lnsl),
            "OBS" => Ok(ModelTag::Obs),
            other => Err(Error::Parse(format!("unknown model tag '{other}'"))),
        }
    }
}

/// Fit of one model to one source.
#[derive(Debug, Clone)]
pub struct SourceFit {
    pub source: Source,
    pub spec: StateSpaceSpec,
    pub cons: ConstraintSet,
    pub trace: EmTrace,
    /// Filtered state means `F̃_{t|t}`, `T × (q+K)`.
    pub filtered: DMatrix<f64>,
    /// Panel the model was fitted on (the cross-sectional mean for LSS/LNSL).
    pub fitted_panel: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct FilteredSignals {
    pub tag: ModelTag,
    /// `dates[1..]` of the input panels: signals are differences.
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<String>,
    /// `(T−1) × dim` signal matrix.
    pub values: DMatrix<f64>,
    /// Long-term part of each source in signal order (levels, `T` rows).
    pub long_term: Vec<DMatrix<f64>>,
    /// `Ψ̄_t` per source for the models that have a short-term block.
    pub short_term: Vec<Vec<f64>>,
    pub fits: Vec<SourceFit>,
    pub warnings: Vec<String>,
}

impl FilteredSignals {
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Column positions of the long-term and short-term signal blocks.
    pub fn block_columns(&self) -> (Vec<usize>, Vec<usize>) {
        let lt = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.starts_with("psi_bar"))
            .map(|(i, _)| i)
            .collect();
        let st = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.starts_with("psi_bar"))
            .map(|(i, _)| i)
            .collect();
        (lt, st)
    }
}

fn filtered_states(spec: &StateSpaceSpec, panel: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let f = kalman_filter(spec, panel)?;
    let n = spec.state_dim();
    Ok(DMatrix::from_fn(panel.nrows(), n, |t, j| f.filt_mean[t][j]))
}

/// Fits the structural model for `tag` on one panel matrix.
pub fn fit_source(
    tag: ModelTag,
    panel: &DMatrix<f64>,
    source: Source,
    q: usize,
    opts: EmOptions,
) -> Result<SourceFit> {
    let fitted_panel = match tag {
        ModelTag::Lss | ModelTag::Lnsl => {
            let k = panel.ncols().max(1) as f64;
            DMatrix::from_fn(panel.nrows(), 1, |t, _| panel.row(t).sum() / k)
        }
        _ => panel.clone(),
    };
    let k = fitted_panel.ncols();
    let (cons, init) = match tag {
        ModelTag::Mlss => (ConstraintSet::mlss(q, k)?, initial_spec(&fitted_panel, q)?),
        ModelTag::Lss => (ConstraintSet::mlss(1, 1)?, initial_spec(&fitted_panel, 1)?),
        ModelTag::Mlnsl => (ConstraintSet::local_level(k, false)?, initial_local_level(&fitted_panel)?),
        ModelTag::Lnsl => (ConstraintSet::local_level(1, true)?, initial_local_level(&fitted_panel)?),
        ModelTag::Obs => {
            return Err(Error::InvalidInput("Obs has no structural model".into()));
        }
    };
    let (spec, trace) = fit_em(&fitted_panel, &cons, &init, opts)?;
    let filtered = filtered_states(&spec, &fitted_panel)?;
    Ok(SourceFit { source, spec, cons, trace, filtered, fitted_panel })
}

fn diff_column(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

fn row_mean(m: &DMatrix<f64>, cols: std::ops::Range<usize>) -> Vec<f64> {
    let w = cols.len().max(1) as f64;
    (0..m.nrows())
        .map(|t| cols.clone().map(|j| m[(t, j)]).sum::<f64>() / w)
        .collect()
}

/// Signals of one model from the news and social panels.
///
/// * MLSS: `[ΔF news (q_news), ΔF social (q_social), Ψ̄ news, Ψ̄ social]`
/// * LSS: the same with one factor fitted on each cross-sectional mean
/// * MLNSL, LNSL: `ΔF̄` per source
/// * Obs: `ΔS̄` per source
///
/// Every component is built from filtered means, so row `t` only uses data
/// up to `t`.
pub fn fit_model(
    tag: ModelTag,
    news: &SentimentPanel,
    social: &SentimentPanel,
    q_news: usize,
    q_social: usize,
    opts: EmOptions,
) -> Result<FilteredSignals> {
    if news.dates != social.dates {
        return Err(Error::InvalidInput("news and social panels are not date-aligned".into()));
    }
    for p in [news, social] {
        if !p.is_complete() {
            return Err(Error::Missing(format!("{} panel has missing values", p.source)));
        }
    }
    let t_len = news.n_obs();
    if t_len < 3 {
        return Err(Error::InvalidInput("need at least 3 dates".into()));
    }
    let dates = news.dates[1..].to_vec();
    let sources = [(news, q_news), (social, q_social)];
    let mut lt_cols: Vec<(String, Vec<f64>)> = vec![];
    let mut st_cols: Vec<(String, Vec<f64>)> = vec![];
    let mut long_term = vec![];
    let mut short_term = vec![];
    let mut fits = vec![];
    let mut warnings = vec![];

    for (panel, q) in sources {
        let src = panel.source.as_str();
        if tag == ModelTag::Obs {
            let sbar = row_mean(&panel.values, 0..panel.n_series());
            long_term.push(DMatrix::from_column_slice(t_len, 1, &sbar));
            lt_cols.push((format!("dS_bar_{src}"), diff_column(&sbar)));
            continue;
        }
        if tag == ModelTag::Mlss && (q == 0 || q > panel.n_series()) {
            return Err(Error::InvalidInput(format!(
                "q = {q} is infeasible for {} {src} series",
                panel.n_series()
            )));
        }
        let fit = fit_source(tag, &panel.values, panel.source, q, opts)?;
        if !fit.trace.converged {
            warnings.push(format!(
                "{tag} {src}: EM stopped after {} iterations without meeting the tolerance",
                fit.trace.iterations
            ));
        }
        let nf = fit.spec.n_factors;
        let k = fit.spec.n_series;
        match tag {
            ModelTag::Mlss | ModelTag::Lss => {
                for j in 0..nf {
                    let col: Vec<f64> = fit.filtered.column(j).iter().copied().collect();
                    lt_cols.push((format!("dF{}_{src}", j + 1), diff_column(&col)));
                }
                let psi = row_mean(&fit.filtered, nf..nf + k);
                st_cols.push((format!("psi_bar_{src}"), psi[1..].to_vec()));
                long_term.push(fit.filtered.columns(0, nf).into_owned());
                short_term.push(psi);
            }
            _ => {
                let level = row_mean(&fit.filtered, 0..k);
                lt_cols.push((format!("dF_bar_{src}"), diff_column(&level)));
                long_term.push(DMatrix::from_column_slice(t_len, 1, &level));
            }
        }
        fits.push(fit);
    }
    let all: Vec<(String, Vec<f64>)> = lt_cols.into_iter().chain(st_cols).collect();
    let values = DMatrix::from_fn(t_len - 1, all.len(), |t, j| all[j].1[t]);
    Ok(FilteredSignals {
        tag,
        dates,
        columns: all.into_iter().map(|c| c.0).collect(),
        values,
        long_term,
        short_term,
        fits,
        warnings,
    })
}

/// Per-series signal-to-noise ratio: `(Σ_j Λ_ij² + Q_short,ii) / R_ii` for
/// the long/short models, `Q_ii / R_ii` for the level models.
pub fn signal_to_noise(spec: &StateSpaceSpec, tag: ModelTag) -> Result<Vec<f64>> {
    let k = spec.n_series;
    let r = spec.r_diag();
    if let Some(i) = r.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::InvalidInput(format!("R[{i},{i}] must be positive")));
    }
    let qs = spec.q_short();
    match tag {
        ModelTag::Mlss | ModelTag::Lss => {
            let lam = spec.lambda();
            Ok((0..k)
                .map(|i| (lam.row(i).iter().map(|v| v * v).sum::<f64>() + qs[(i, i)]) / r[i])
                .collect())
        }
        ModelTag::Mlnsl | ModelTag::Lnsl => Ok((0..k).map(|i| qs[(i, i)] / r[i]).collect()),
        ModelTag::Obs => Err(Error::InvalidInput("Obs has no signal-to-noise ratio".into())),
    }
}

//! `mlss estimate`: factor-count table, model fits and their signals.

use std::path::Path;

use mlss_core::em::{select_q, standard_errors, ConstraintSet, EmOptions, EmTrace, EstimationReport, QSelectionRow};
use mlss_core::io;
use mlss_core::models::{
    aggregate_daily, fill_missing, fit_model, signal_to_noise, ModelTag, SentimentPanel, Source, SourceFit,
    DEFAULT_FILL_WINDOW, DEFAULT_MISSING_CAP,
};
use mlss_core::{kalman_filter, kalman_smoother, DMatrix, Error};

use crate::align::{align, describe};
use crate::config::{layout, require_files};
use crate::report::num;
use crate::{CliError, CliResult, PipelineConfig, Run};

fn load_source(cfg: &PipelineConfig, source: Source) -> CliResult<SentimentPanel> {
    let d = &cfg.data;
    let synthetic = d.synthetic.unwrap_or(false);
    let (daily, intraday) = match source {
        Source::News => (&d.news, &d.news_intraday),
        Source::Social => (&d.social, &d.social_intraday),
    };
    let name = source.as_str();
    if let Some(p) = intraday {
        let prices = d.prices.as_deref().expect("resolved");
        require_files(&[(&format!("{name} intraday"), p), ("prices (trading calendar)", prices)])?;
        let calendar = io::read_wide_csv(prices)?.dates;
        let raw = io::read_intraday_csv(p)?;
        return Ok(aggregate_daily(&raw, d.cutoff_hour.unwrap_or(16), &calendar, source)?);
    }
    let p = daily.as_deref().expect("resolved");
    require_files(&[(name, p)])?;
    Ok(io::read_panel_csv(p, source, synthetic)?)
}

/// News and social panels on a common calendar with gaps filled.
pub fn load_panels(cfg: &PipelineConfig, run: &mut Run) -> CliResult<(SentimentPanel, SentimentPanel)> {
    let news = load_source(cfg, Source::News)?;
    let social = load_source(cfg, Source::Social)?;
    let (_, rows, rep) = align(&[("news", &news.dates), ("social", &social.dates)])?;
    for w in describe(&["news", "social"], &rep) {
        run.warn(w);
    }
    let mut out = Vec::new();
    for (p, r) in [(news, &rows[0]), (social, &rows[1])] {
        let p = p.select_rows(r);
        let (filled, report) = fill_missing(&p, DEFAULT_FILL_WINDOW, DEFAULT_MISSING_CAP)?;
        if report.total() > 0 {
            run.warn(format!("{}: filled {} missing value(s): {:?}", p.source, report.total(), report.filled));
        }
        out.push(filled);
    }
    let social = out.pop().expect("two panels");
    let news = out.pop().expect("two panels");
    Ok((news, social))
}

pub fn state_columns(tag: ModelTag, fit: &SourceFit, assets: &[String]) -> Vec<String> {
    let nf = fit.spec.n_factors;
    let k = fit.spec.n_series;
    let names: Vec<String> = if k == assets.len() { assets.to_vec() } else { vec!["mean".into()] };
    let mut cols: Vec<String> = (1..=nf).map(|j| format!("F{j}")).collect();
    let prefix = if tag.has_short_term() { "psi" } else { "level" };
    cols.extend(names.iter().map(|a| format!("{prefix}_{a}")));
    cols
}

fn trace_rows(trace: &EmTrace) -> Vec<Vec<String>> {
    trace
        .loglik_path
        .iter()
        .enumerate()
        .map(|(i, l)| vec![i.to_string(), num(*l)])
        .collect()
}

fn ic_rows(rows: &[QSelectionRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.q.to_string(),
                r.loglik.map(num).unwrap_or_default(),
                r.n_params.to_string(),
                r.aic.map(num).unwrap_or_default(),
                r.bic.map(num).unwrap_or_default(),
                r.converged.to_string(),
                r.iterations.to_string(),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect()
}

pub fn params_path(dir: &Path, tag: ModelTag, source: Source) -> std::path::PathBuf {
    dir.join(format!("params_{}_{}.json", tag.as_str(), source.as_str()))
}

pub fn filtered_path(dir: &Path, tag: ModelTag, source: Source) -> std::path::PathBuf {
    dir.join(format!("filtered_{}_{}.csv", tag.as_str(), source.as_str()))
}

pub fn signals_path(dir: &Path, tag: ModelTag) -> std::path::PathBuf {
    dir.join(format!("signals_{}.csv", tag.as_str()))
}

fn write_fit(
    run: &mut Run,
    dir: &Path,
    tag: ModelTag,
    fit: &SourceFit,
    panel: &SentimentPanel,
    with_se: bool,
    q_table: Vec<QSelectionRow>,
) -> CliResult<()> {
    let src = fit.source.as_str();
    let label = format!("{}_{src}", tag.as_str());
    let se = if with_se {
        match standard_errors(&fit.spec, &fit.fitted_panel, &fit.cons) {
            Ok(s) => {
                if !s.information_pd {
                    run.warn(format!("{label}: observed information is not positive definite"));
                }
                Some(s)
            }
            Err(e) => {
                run.warn(format!("{label}: standard errors unavailable: {e}"));
                None
            }
        }
    } else {
        None
    };
    let rep = EstimationReport::new(
        tag.as_str(),
        src,
        &fit.spec,
        fit.trace.clone(),
        &fit.cons,
        fit.fitted_panel.nrows(),
        se,
        q_table,
    );
    run.json(&params_path(dir, tag, fit.source), &rep)?;
    run.table(
        &dir.join(format!("trace_{label}.csv")),
        "EM log-likelihood per iteration",
        &["iteration", "loglik"],
        &trace_rows(&fit.trace),
    )?;
    let cols = state_columns(tag, fit, &panel.assets);
    run.wide(
        &filtered_path(dir, tag, fit.source),
        "filtered state means",
        &panel.dates,
        &cols,
        &fit.filtered,
    )?;
    let filt = kalman_filter(&fit.spec, &fit.fitted_panel)?;
    let sm = kalman_smoother(&fit.spec, &filt)?;
    let smoothed = DMatrix::from_fn(panel.n_obs(), cols.len(), |t, j| sm.smooth_mean[t][j]);
    run.wide(
        &dir.join(format!("smoothed_{label}.csv")),
        "smoothed state means",
        &panel.dates,
        &cols,
        &smoothed,
    )?;
    Ok(())
}

pub fn run(cfg: &PipelineConfig, run: &mut Run) -> CliResult<()> {
    cfg.check_estimate()?;
    let e = &cfg.estimate;
    let (news, social) = run.time("load", |run| load_panels(cfg, run))?;
    if news.n_obs() < 3 {
        return Err(CliError::Validation(format!("need at least 3 aligned dates, got {}", news.n_obs())));
    }
    let dir = run.dir(layout::ESTIMATE)?;
    let opts = EmOptions {
        tol: e.tol,
        max_iter: e.max_iter,
        accelerate: e.accelerate,
    };
    let mut q = [e.q_news, e.q_social];
    let mut q_tables: [Vec<QSelectionRow>; 2] = [Vec::new(), Vec::new()];
    if e.models.contains(&ModelTag::Mlss) && !e.q_grid.is_empty() {
        for (i, p) in [&news, &social].into_iter().enumerate() {
            let src = p.source.as_str();
            let grid: Vec<usize> = e.q_grid.iter().copied().filter(|&g| g <= p.n_series()).collect();
            if grid.len() < e.q_grid.len() {
                run.warn(format!("{src}: factor counts above K = {} skipped", p.n_series()));
            }
            if grid.is_empty() {
                continue;
            }
            let sel = run.time(&format!("select_q {src}"), |_| {
                Ok(select_q(&p.values, &grid, |q, k| ConstraintSet::mlss(q, k), opts)?)
            })?;
            run.table(
                &dir.join(format!("ic_{src}.csv")),
                "AIC/BIC of the MLSS model across factor counts",
                &["q", "loglik", "n_params", "aic", "bic", "converged", "iterations", "error"],
                &ic_rows(&sel.rows),
            )?;
            if e.select_q {
                q[i] = sel.q_best;
            }
            q_tables[i] = sel.rows;
        }
    }

    let mut stn_rows = Vec::new();
    for &tag in &e.models {
        let name = tag.as_str();
        let fitted = run.time(&format!("fit {name}"), |_| Ok(fit_model(tag, &news, &social, q[0], q[1], opts)));
        let signals = match fitted? {
            Ok(s) => s,
            Err(err) => {
                if let Error::Em { trace, .. } = &err {
                    let path = dir.join(format!("failed_trace_{name}.csv"));
                    run.table(&path, "EM log-likelihood before the failure", &["iteration", "loglik"], &trace_rows(trace))?;
                }
                return Err(err.into());
            }
        };
        for w in &signals.warnings {
            run.warn(w.clone());
        }
        run.wide(
            &signals_path(&dir, tag),
            &format!("{name} signals; row t uses sentiment up to t"),
            &signals.dates,
            &signals.columns,
            &signals.values,
        )?;
        for fit in &signals.fits {
            let (panel, qt) = match fit.source {
                Source::News => (&news, &q_tables[0]),
                Source::Social => (&social, &q_tables[1]),
            };
            let qt = if tag == ModelTag::Mlss { qt.clone() } else { Vec::new() };
            run.time(&format!("report {name} {}", fit.source), |run| {
                write_fit(run, &dir, tag, fit, panel, e.standard_errors, qt)
            })?;
            let stn = signal_to_noise(&fit.spec, tag)?;
            let names = if stn.len() == panel.n_series() { panel.assets.clone() } else { vec!["mean".into()] };
            for (a, v) in names.iter().zip(stn) {
                stn_rows.push(vec![name.to_string(), fit.source.to_string(), a.clone(), num(v)]);
            }
        }
    }
    if !stn_rows.is_empty() {
        run.table(
            &dir.join("signal_to_noise.csv"),
            "per-series signal-to-noise ratio",
            &["model", "source", "asset", "stn"],
            &stn_rows,
        )?;
    }
    Ok(())
}

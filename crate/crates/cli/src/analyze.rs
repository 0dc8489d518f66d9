//! `mlss analyze`: quantile-regression tables, correlation regressions and
//! cointegration of the long-term factors with the market level.

use mlss_core::analysis::correlation::{correlation_regression, CorrelationInputs};
use mlss_core::analysis::inference::{long_short_tests, multi_lag_test, r1_table, stars};
use mlss_core::analysis::{engle_granger, pca_market, sector_map, MarketFactor};
use mlss_core::em::EstimationReport;
use mlss_core::io::{self, WideTable};
use mlss_core::models::{ModelTag, Source};
use mlss_core::DMatrix;

use crate::align::{align, describe};
use crate::config::{layout, require_files};
use crate::estimate::{filtered_path, load_panels, params_path, signals_path};
use crate::report::num;
use crate::{CliError, CliResult, PipelineConfig, Run};

/// Log-returns, market factor and market level built from a price table.
pub struct Market {
    pub returns: WideTable,
    pub factor: MarketFactor,
    /// `R_t`, first principal component of the returns.
    pub r: Vec<f64>,
    /// `M_t` on the price dates.
    pub level: Vec<f64>,
    pub prices: WideTable,
}

/// Reads prices and orders their columns like `assets` when both name the
/// same set of tickers.
pub fn load_market(cfg: &PipelineConfig, assets: Option<&[String]>) -> CliResult<Market> {
    let path = cfg.data.prices.as_deref().expect("resolved");
    require_files(&[("prices", path)])?;
    let mut prices = io::read_wide_csv(path)?;
    if let Some(a) = assets {
        let mut want = a.to_vec();
        let mut have = prices.columns.clone();
        want.sort();
        have.sort();
        if want == have && a != prices.columns.as_slice() {
            let idx: Vec<usize> = a
                .iter()
                .map(|t| prices.columns.iter().position(|c| c == t).expect("same set"))
                .collect();
            prices.values = prices.values.select_columns(&idx);
            prices.columns = a.to_vec();
        }
    }
    if prices.dates.len() < 3 {
        return Err(CliError::Validation("need at least 3 price dates".into()));
    }
    if prices.values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(CliError::Validation("prices must be positive and complete".into()));
    }
    let (t, k) = prices.values.shape();
    let lr = DMatrix::from_fn(t - 1, k, |i, j| (prices.values[(i + 1, j)] / prices.values[(i, j)]).ln());
    let factor = pca_market(&lr, cfg.analyze.q_mrk)?;
    let r: Vec<f64> = factor.factor_returns.column(0).iter().copied().collect();
    let lvl = factor.factor_level(&prices.values)?;
    let level: Vec<f64> = lvl.column(0).iter().copied().collect();
    let returns = WideTable {
        dates: prices.dates[1..].to_vec(),
        columns: prices.columns.clone(),
        values: lr,
    };
    Ok(Market { returns, factor, r, level, prices })
}

pub fn load_signals(cfg: &PipelineConfig, tags: &[ModelTag]) -> CliResult<Vec<(ModelTag, WideTable)>> {
    let dir = cfg.data.estimates.as_deref().expect("resolved");
    let paths: Vec<(String, std::path::PathBuf)> =
        tags.iter().map(|t| (format!("{t} signals"), signals_path(dir, *t))).collect();
    let named: Vec<(&str, &std::path::Path)> = paths.iter().map(|(n, p)| (n.as_str(), p.as_path())).collect();
    require_files(&named)?;
    let mut out = Vec::new();
    for (t, (_, p)) in tags.iter().zip(&paths) {
        let s = io::read_wide_csv(p)?;
        if s.values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Validation(format!("{} has missing values", p.display())));
        }
        out.push((*t, s));
    }
    Ok(out)
}

fn read_report(path: &std::path::Path) -> CliResult<EstimationReport> {
    require_files(&[("estimation report", path)])?;
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn rows_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

fn cell(v: f64, p: f64) -> String {
    format!("{}{}", num(v), stars(p))
}

pub fn run(cfg: &PipelineConfig, run: &mut Run) -> CliResult<()> {
    cfg.check_analyze()?;
    let a = &cfg.analyze;
    let tags = cfg.estimate.models.clone();
    if tags.is_empty() {
        return Err(CliError::Validation("estimate.models is empty".into()));
    }
    let signals = load_signals(cfg, &tags)?;
    let (news, _social) = run.time("load panels", |run| load_panels(cfg, run))?;
    let market = run.time("market factor", |_| load_market(cfg, Some(&news.assets)))?;
    let dir = run.dir(layout::ANALYZE)?;

    let mut cals: Vec<(&str, &[chrono::NaiveDate])> = vec![("returns", &market.returns.dates)];
    let names: Vec<String> = signals.iter().map(|(t, _)| format!("{t} signals")).collect();
    for (n, (_, s)) in names.iter().zip(&signals) {
        cals.push((n, &s.dates));
    }
    let (dates, rows, rep) = align(&cals)?;
    let cal_names: Vec<&str> = cals.iter().map(|c| c.0).collect();
    for w in describe(&cal_names, &rep) {
        run.warn(w);
    }
    let r: Vec<f64> = rows[0].iter().map(|&i| market.r[i]).collect();
    let models: Vec<(String, DMatrix<f64>, Vec<String>)> = signals
        .iter()
        .zip(&rows[1..])
        .map(|((t, s), idx)| {
            let s = s.select_rows(idx);
            (t.as_str().to_string(), s.values, s.columns)
        })
        .collect();
    run.json(
        &dir.join("market_factor.json"),
        &serde_json::json!({
            "loadings": mlss_core::serde_mat::to_rows(&market.factor.loadings),
            "eigenvalues": market.factor.eigenvalues,
            "explained_share": market.factor.explained_share(),
            "assets": market.returns.columns,
            "n_obs": dates.len(),
            "first_date": dates[0],
            "last_date": dates[dates.len() - 1],
        }),
    )?;

    // R¹ across τ and models.
    let inputs: Vec<(String, DMatrix<f64>)> = models.iter().map(|m| (m.0.clone(), m.1.clone())).collect();
    let cells = run.time("r1 table", |_| Ok(r1_table(&r, &inputs, &a.tau_grid, a.h)?))?;
    let long: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                c.model.clone(),
                num(c.tau),
                num(c.r1),
                num(c.lt_stat),
                c.df.to_string(),
                num(c.p_value),
                stars(c.p_value).to_string(),
            ]
        })
        .collect();
    run.table(
        &dir.join("r1_long.csv"),
        &format!("R1 of the quantile regression of R_(t+{}) on the signals at t", a.h),
        &["model", "tau", "r1", "lt_stat", "df", "p_value", "stars"],
        &long,
    )?;
    let mut header: Vec<&str> = vec!["tau"];
    header.extend(models.iter().map(|m| m.0.as_str()));
    let wide: Vec<Vec<String>> = a
        .tau_grid
        .iter()
        .map(|&tau| {
            let mut row = vec![num(tau)];
            for m in &models {
                let c = cells.iter().find(|c| c.model == m.0 && c.tau == tau).expect("every cell");
                row.push(cell(c.r1, c.p_value));
            }
            row
        })
        .collect();
    run.table(
        &dir.join("r1_table.csv"),
        "R1 by quantile level and model; * 10%, ** 5%, *** 1% significance of the joint test",
        &header,
        &wide,
    )?;

    // Long-term versus short-term blocks.
    let mut ls_rows = Vec::new();
    for (name, x, cols) in &models {
        let lt: Vec<usize> = (0..cols.len()).filter(|&j| !cols[j].starts_with("psi_bar")).collect();
        let st: Vec<usize> = (0..cols.len()).filter(|&j| cols[j].starts_with("psi_bar")).collect();
        if lt.is_empty() || st.is_empty() {
            continue;
        }
        for &tau in &a.tau_grid {
            let t = long_short_tests(&r, x, &lt, &st, tau, a.h)?;
            ls_rows.push(vec![
                name.clone(),
                num(tau),
                t.h.to_string(),
                num(t.l_lt),
                t.df_lt.to_string(),
                num(t.p_lt),
                stars(t.p_lt).to_string(),
                num(t.l_st),
                t.df_st.to_string(),
                num(t.p_st),
                stars(t.p_st).to_string(),
                num(t.sparsity),
            ]);
        }
    }
    if !ls_rows.is_empty() {
        run.table(
            &dir.join("long_short_tests.csv"),
            "tests of the long-term (L_LT) and short-term (L_ST) signal blocks",
            &["model", "tau", "h", "l_lt", "df_lt", "p_lt", "stars_lt", "l_st", "df_st", "p_st", "stars_st", "sparsity"],
            &ls_rows,
        )?;
    }

    // Extra lags.
    if a.h_max >= 2 {
        let mut ml_rows = Vec::new();
        run.time("multi-lag", |_| {
            for (name, x, _) in &models {
                for &tau in &a.tau_grid {
                    for row in multi_lag_test(&r, x, tau, a.h_max)? {
                        ml_rows.push(vec![
                            name.clone(),
                            num(tau),
                            row.h.to_string(),
                            num(row.stat),
                            row.df.to_string(),
                            num(row.p_value),
                            stars(row.p_value).to_string(),
                        ]);
                    }
                }
            }
            Ok(())
        })?;
        run.table(
            &dir.join("multi_lag.csv"),
            "test of signal lags 2..h against lag 1 only",
            &["model", "tau", "h", "stat", "df", "p_value", "stars"],
            &ml_rows,
        )?;
    }

    // Correlation structure.
    let est = cfg.data.estimates.as_deref().expect("resolved");
    if tags.contains(&ModelTag::Mlss) && tags.contains(&ModelTag::Mlnsl) {
        let mlss = read_report(&params_path(est, ModelTag::Mlss, Source::News))?;
        let mlnsl = read_report(&params_path(est, ModelTag::Mlnsl, Source::News))?;
        let ret_rows: Vec<usize> = rows[0].clone();
        let k = market.returns.columns.len();
        let mut ret = DMatrix::from_fn(ret_rows.len(), k, |i, j| market.returns.values[(ret_rows[i], j)]);
        for j in 0..k {
            let m = ret.column(j).mean();
            ret.column_mut(j).add_scalar_mut(-m);
        }
        let sectors = sector_map(&news.assets);
        let study = correlation_regression(&CorrelationInputs {
            returns: &ret,
            return_assets: &market.returns.columns,
            q_short: &rows_matrix(&mlss.q_short),
            q_mlnsl: &rows_matrix(&mlnsl.q_short),
            sentiment: &news.values,
            sentiment_assets: &news.assets,
            market: &r,
            sectors: &sectors,
        });
        match study {
            Ok(study) => {
                let reg: Vec<Vec<String>> = study
                    .regressions
                    .iter()
                    .map(|g| {
                        vec![
                            g.model.clone(),
                            g.target.clone(),
                            g.same_sector.to_string(),
                            g.n_pairs.to_string(),
                            num(g.alpha),
                            num(g.beta),
                            num(g.r2),
                            num(g.f_stat),
                            num(g.p_value),
                            stars(g.p_value).to_string(),
                        ]
                    })
                    .collect();
                run.table(
                    &dir.join("correlation_regressions.csv"),
                    "OLS of return correlations on sentiment correlations, all pairs and same-sector pairs",
                    &["model", "target", "same_sector", "n_pairs", "alpha", "beta", "r2", "f_stat", "p_value", "stars"],
                    &reg,
                )?;
                run.json(&dir.join("correlation_study.json"), &study)?;
            }
            Err(e) if !e.is_numerical() => run.warn(format!("correlation study skipped: {e}")),
            Err(e) => return Err(e.into()),
        }
    } else {
        run.warn("correlation study needs the MLSS and MLNSL models; skipped");
    }

    // Cointegration of long-term factors with the market level.
    let mut co_rows = Vec::new();
    for &tag in tags.iter().filter(|t| **t != ModelTag::Obs) {
        for source in [Source::News, Source::Social] {
            let path = filtered_path(est, tag, source);
            require_files(&[("filtered states", &path)])?;
            let f = io::read_wide_csv(&path)?;
            let (_, idx, _) = align(&[("filtered states", &f.dates), ("prices", &market.prices.dates)])?;
            let level: Vec<f64> = idx[1].iter().map(|&i| market.level[i]).collect();
            let mut series: Vec<(String, Vec<f64>)> = (0..f.columns.len())
                .filter(|&j| f.columns[j].starts_with('F'))
                .map(|j| (f.columns[j].clone(), idx[0].iter().map(|&i| f.values[(i, j)]).collect()))
                .collect();
            if series.is_empty() {
                // level models: the cross-sectional mean level
                let k = f.columns.len() as f64;
                series.push(("level_mean".into(), idx[0].iter().map(|&i| f.values.row(i).sum() / k).collect()));
            }
            for (label, x) in series {
                match engle_granger(&x, &level) {
                    Ok(eg) => co_rows.push(vec![
                        tag.to_string(),
                        source.to_string(),
                        label,
                        num(eg.coint_beta),
                        num(eg.adf_stat),
                        eg.lags.to_string(),
                        num(eg.critical[0]),
                        num(eg.critical[1]),
                        num(eg.critical[2]),
                        eg.p_band.stars().to_string(),
                        eg.reject.to_string(),
                    ]),
                    Err(e) => run.warn(format!("{tag} {source} {label}: cointegration test failed: {e}")),
                }
            }
        }
    }
    run.table(
        &dir.join("cointegration.csv"),
        "Engle-Granger test of each long-term sentiment factor against the market level",
        &["model", "source", "factor", "beta", "adf_stat", "lags", "cv_1pct", "cv_5pct", "cv_10pct", "stars", "reject_5pct"],
        &co_rows,
    )?;
    Ok(())
}

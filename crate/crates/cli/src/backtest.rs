//! `mlss backtest` and `mlss mc`: sentiment strategies on the market
//! portfolio and their significance against shuffled signals.

use mlss_core::backtest::{mc_significance, run_backtest, BacktestRun, Metrics, StrategyResult};
use mlss_core::io;
use mlss_core::models::ModelTag;
use mlss_core::rng::substream_seed;
use mlss_core::DMatrix;
use serde::Serialize;

use crate::align::{align, describe};
use crate::analyze::{load_market, load_signals};
use crate::config::{layout, require_files};
use crate::report::{num, opt};
use crate::{CliError, CliResult, PipelineConfig, Run};

const METRIC_ROWS: [&str; 8] = [
    "A. return (%)",
    "A. volatility (%)",
    "A. neg. volatility (%)",
    "A. Sharpe ratio",
    "A. Sortino ratio",
    "MDD ($)",
    "Number of trades",
    "Transaction costs ($)",
];

fn metric_values(m: &Metrics) -> [String; 8] {
    [
        num(100.0 * m.annual_return),
        num(100.0 * m.annual_volatility),
        num(100.0 * m.annual_negative_volatility),
        opt(m.sharpe),
        opt(m.sortino),
        num(m.max_drawdown),
        m.trades.to_string(),
        num(m.total_costs),
    ]
}

/// Rows are the measures, columns the strategies.
fn metrics_table(cols: &[&StrategyResult]) -> Vec<Vec<String>> {
    let vals: Vec<[String; 8]> = cols.iter().map(|s| metric_values(&s.metrics)).collect();
    METRIC_ROWS
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut row = vec![name.to_string()];
            row.extend(vals.iter().map(|v| v[i].clone()));
            row
        })
        .collect()
}

#[derive(Serialize)]
struct ModelSummary<'a> {
    model: &'a str,
    start_date: chrono::NaiveDate,
    steps: usize,
    failed_windows: usize,
    separated_windows: usize,
    strategies: &'a [StrategyResult],
    strategies_without_cost: Option<&'a [StrategyResult]>,
}

pub fn run(cfg: &PipelineConfig, run: &mut Run) -> CliResult<()> {
    cfg.check_backtest()?;
    let b = &cfg.backtest;
    let tags = cfg.estimate.models.clone();
    if tags.is_empty() {
        return Err(CliError::Validation("estimate.models is empty".into()));
    }
    let rv_path = cfg.data.rv.as_deref().expect("resolved");
    require_files(&[("realized variance", rv_path)])?;
    let signals = load_signals(cfg, &tags)?;
    let market = run.time("market factor", |_| load_market(cfg, None))?;
    let (rv_dates, rv) = io::read_series_csv(rv_path)?;
    let dir = run.dir(layout::BACKTEST)?;

    let names: Vec<String> = signals.iter().map(|(t, _)| format!("{t} signals")).collect();
    let mut cals: Vec<(&str, &[chrono::NaiveDate])> =
        vec![("returns", &market.returns.dates), ("realized variance", &rv_dates)];
    for (n, (_, s)) in names.iter().zip(&signals) {
        cals.push((n, &s.dates));
    }
    let (dates, rows, rep) = align(&cals)?;
    let cal_names: Vec<&str> = cals.iter().map(|c| c.0).collect();
    for w in describe(&cal_names, &rep) {
        run.warn(w);
    }
    let returns: Vec<f64> = rows[0].iter().map(|&i| market.r[i]).collect();
    // return row i ends on price row i + 1
    let level: Vec<f64> = rows[0].iter().map(|&i| market.level[i + 1]).collect();
    let rv: Vec<f64> = rows[1].iter().map(|&i| rv[i]).collect();
    if let Some(i) = level.iter().position(|m| !(*m > 0.0)) {
        return Err(CliError::Validation(format!(
            "market level is not positive on {}; check the price inputs",
            dates[i]
        )));
    }

    let mut runs: Vec<(ModelTag, BacktestRun, Option<BacktestRun>)> = Vec::new();
    for ((tag, s), idx) in signals.iter().zip(&rows[2..]) {
        let x: DMatrix<f64> = s.select_rows(idx).values;
        let name = tag.as_str();
        let with = run.time(&format!("backtest {name}"), |_| {
            Ok(run_backtest(name, &x, &returns, &rv, &level, b.window, b.cost_rate, &b.alpha_grid)?)
        })?;
        let without = if b.cost_rate > 0.0 {
            // the classifier path does not depend on costs; only the ledgers change
            Some(run_backtest(name, &x, &returns, &rv, &level, b.window, 0.0, &b.alpha_grid)?)
        } else {
            None
        };
        if with.raw.failed_windows > 0 {
            run.warn(format!("{name}: {} classifier window(s) failed and defaulted to +1", with.raw.failed_windows));
        }
        runs.push((*tag, with, without));
    }
    let start = runs[0].1.start;
    let steps = runs[0].1.raw.s.len();
    let ledger_dates = &dates[start..start + steps];

    let mut header: Vec<String> = vec!["Measures".into(), "BH".into()];
    header.extend(runs.iter().map(|r| r.0.as_str().to_string()));
    let hdr: Vec<&str> = header.iter().map(String::as_str).collect();
    let pick = |with_cost: bool| -> Vec<&StrategyResult> {
        let first = if with_cost { &runs[0].1 } else { runs[0].2.as_ref().unwrap_or(&runs[0].1) };
        let mut cols = vec![&first.strategies[0]];
        for r in &runs {
            let br = if with_cost { &r.1 } else { r.2.as_ref().unwrap_or(&r.1) };
            cols.push(&br.strategies[1]);
        }
        cols
    };
    run.table(
        &dir.join("metrics_cost.csv"),
        &format!("strategy performance with proportional cost {}", b.cost_rate),
        &hdr,
        &metrics_table(&pick(true)),
    )?;
    run.table(
        &dir.join("metrics_nocost.csv"),
        "strategy performance without transaction costs",
        &hdr,
        &metrics_table(&pick(false)),
    )?;

    for (tag, with, _) in &runs {
        let mut header: Vec<String> = vec!["Measures".into(), "BH".into()];
        header.extend(b.alpha_grid.iter().map(|a| format!("alpha={a}")));
        let hdr: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut cols = vec![&with.strategies[0]];
        cols.extend(with.strategies.iter().filter(|s| s.alpha.is_some()));
        run.table(
            &dir.join(format!("gate_{}.csv", tag.as_str())),
            "R2-gated strategies across alpha, with costs",
            &hdr,
            &metrics_table(&cols),
        )?;
    }

    // Ledgers of buy-and-hold and each raw model signal, with costs.
    let mut ledgers = vec![("BH".to_string(), &runs[0].1.ledgers[0])];
    ledgers.extend(runs.iter().map(|r| (r.0.as_str().to_string(), &r.1.ledgers[1])));
    for (label, l) in &ledgers {
        let rows: Vec<Vec<String>> = (0..l.signal.len())
            .map(|k| {
                vec![
                    ledger_dates[k].to_string(),
                    l.signal[k].to_string(),
                    num(l.position_value[k]),
                    num(l.cash[k]),
                    num(l.portfolio[k]),
                    num(l.costs[k]),
                ]
            })
            .collect();
        run.table(
            &dir.join(format!("ledger_{label}.csv")),
            "daily ledger; trades execute at the close of the decision day",
            &["date", "signal", "position_value", "cash", "portfolio", "costs"],
            &rows,
        )?;
    }

    let mut cols = vec!["market".to_string()];
    cols.extend(runs.iter().map(|r| r.0.as_str().to_string()));
    let sig = DMatrix::from_fn(steps, cols.len(), |k, j| {
        if j == 0 {
            level[start + k]
        } else {
            runs[j - 1].1.raw.s[k] as f64
        }
    });
    run.wide(&dir.join(layout::TRADE_SIGNALS), "market level and raw trading signals", ledger_dates, &cols, &sig)?;

    let summary: Vec<ModelSummary> = runs
        .iter()
        .map(|(tag, w, wo)| ModelSummary {
            model: tag.as_str(),
            start_date: ledger_dates[0],
            steps,
            failed_windows: w.raw.failed_windows,
            separated_windows: w
                .raw
                .status
                .iter()
                .filter(|s| matches!(s, Some(mlss_core::backtest::LogitStatus::Separated)))
                .count(),
            strategies: &w.strategies,
            strategies_without_cost: wo.as_ref().map(|r| r.strategies.as_slice()),
        })
        .collect();
    run.json(&dir.join("backtest.json"), &summary)?;
    Ok(())
}

pub fn run_mc(cfg: &PipelineConfig, run: &mut Run) -> CliResult<()> {
    cfg.check_backtest()?;
    let seed = cfg.seed_required("mc")?;
    let n_sims = cfg.mc.n_sims;
    if n_sims == 0 {
        return Err(CliError::Validation("mc.n_sims must be positive".into()));
    }
    let path = run.out.join(layout::BACKTEST).join(layout::TRADE_SIGNALS);
    require_files(&[("trade signals (run backtest first)", &path)])?;
    let t = io::read_wide_csv(&path)?;
    let market = t.column("market").ok_or_else(|| CliError::Validation("trade signals lack a market column".into()))?;
    let dir = run.dir(layout::MC)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for col in t.columns.iter().filter(|c| c.as_str() != "market") {
        let s: Vec<i8> = t.column(col).expect("listed").iter().map(|v| *v as i8).collect();
        let sells = s.iter().filter(|v| **v == -1).count();
        if sells == 0 {
            run.warn(format!("{col}: no sell signals; shuffling is uninformative, skipped"));
            continue;
        }
        let rep = run.time(&format!("mc {col}"), |_| {
            Ok(mc_significance(
                &s,
                &market,
                cfg.backtest.cash,
                cfg.backtest.cost_rate,
                n_sims,
                substream_seed(seed, &format!("mc/{col}")),
            )?)
        })?;
        if !rep.sells_preserved {
            return Err(CliError::Validation(format!("{col}: a shuffled signal changed the number of sells")));
        }
        let pct = |v: f64| num(100.0 * v);
        rows.push(vec![col.clone(), opt(rep.sharpe), pct(rep.sharpe_percentile), opt(rep.sortino), pct(rep.sortino_percentile)]);
        for (label, a, b) in [
            ("best 5%", rep.sharpe_sims.best5, rep.sortino_sims.best5),
            ("best 10%", rep.sharpe_sims.best10, rep.sortino_sims.best10),
            ("best 25%", rep.sharpe_sims.best25, rep.sortino_sims.best25),
            ("median", rep.sharpe_sims.median, rep.sortino_sims.median),
        ] {
            rows.push(vec![label.to_string(), num(a), String::new(), num(b), String::new()]);
        }
        reports.push((col.clone(), rep));
    }
    run.table(
        &dir.join("mc_report.csv"),
        "annual Sharpe and Sortino ratios with their percentile among shuffled signals, then quantiles of the shuffled distribution",
        &["strategy", "sharpe", "sharpe_percentile", "sortino", "sortino_percentile"],
        &rows,
    )?;
    let json: Vec<serde_json::Value> = reports
        .iter()
        .map(|(c, r)| serde_json::json!({ "strategy": c, "report": r }))
        .collect();
    run.json(&dir.join("mc_report.json"), &json)?;
    Ok(())
}

//! `mlss synth`: simulated news/social panels, prices and realized variance
//! with returns driven by lagged short-term news sentiment.

use mlss_core::analysis::sectors;
use mlss_core::models::{business_days, demo_spec, simulate_mlss, LatentTruth, SentimentPanel, Source};
use mlss_core::rng::{stream, substream_seed};
use mlss_core::serde_mat::to_rows;
use mlss_core::stats::variance;
use mlss_core::{DMatrix, StateSpaceSpec};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::config::{layout, SynthConfig};
use crate::{CliError, CliResult, PipelineConfig, Run};

#[derive(Serialize)]
struct SpecTruth {
    lambda: Vec<Vec<f64>>,
    phi: Vec<f64>,
    q_short: Vec<Vec<f64>>,
    r: Vec<f64>,
}

impl SpecTruth {
    fn of(s: &StateSpaceSpec) -> Self {
        Self {
            lambda: to_rows(&s.lambda()),
            phi: s.phi_diag(),
            q_short: to_rows(&s.q_short()),
            r: s.r_diag(),
        }
    }
}

#[derive(Serialize)]
struct Truth {
    news: SpecTruth,
    social: SpecTruth,
    /// Asset exposures to the common return factor.
    betas: Vec<f64>,
    synth: SynthConfig,
}

pub fn asset_names(k: usize) -> Vec<String> {
    if k <= sectors::DJIA27.len() {
        sectors::tickers(k)
    } else {
        (1..=k).map(|i| format!("S{i:02}")).collect()
    }
}

/// Log-returns `T × K` (row 0 is zero) and realized variance of the
/// equal-weight unit-norm portfolio.
pub fn simulate_returns(cfg: &SynthConfig, psi_bar: &[f64], betas: &[f64], seed: u64) -> (DMatrix<f64>, Vec<f64>) {
    let t_len = psi_bar.len();
    let k = betas.len();
    let sd = variance(psi_bar).sqrt();
    let z: Vec<f64> = psi_bar.iter().map(|p| if sd > 0.0 { p / sd } else { 0.0 }).collect();
    let mut rng = stream(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let w = 1.0 / (k.max(1) as f64).sqrt();
    let bw: f64 = betas.iter().map(|b| b * w).sum();
    let idio_var = k as f64 * w * w * cfg.idio_vol * cfg.idio_vol;
    let mut r = DMatrix::zeros(t_len, k);
    let mut rv = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let sigma = if t == 0 {
            cfg.base_vol
        } else {
            cfg.base_vol * (-cfg.vol_effect * z[t - 1]).exp()
        };
        if t > 0 {
            let m = cfg.mean_effect * cfg.base_vol * z[t - 1] + sigma * normal();
            for i in 0..k {
                r[(t, i)] = betas[i] * m + cfg.idio_vol * normal();
            }
        }
        let noise = (0.2 * normal() - 0.02).exp();
        rv.push((bw * bw * sigma * sigma + idio_var) * noise);
    }
    (r, rv)
}

fn truth_table(truth: &LatentTruth, assets: &[String]) -> (Vec<String>, DMatrix<f64>) {
    let q = truth.n_factors;
    let mut cols: Vec<String> = (1..=q).map(|j| format!("F{j}")).collect();
    cols.extend(assets.iter().map(|a| format!("psi_{a}")));
    cols.push("psi_bar".into());
    let psi_bar = truth.psi_bar();
    let n = truth.states.ncols();
    let m = DMatrix::from_fn(truth.states.nrows(), n + 1, |t, j| {
        if j < n {
            truth.states[(t, j)]
        } else {
            psi_bar[t]
        }
    });
    (cols, m)
}

pub fn run(cfg: &PipelineConfig, run: &mut Run) -> CliResult<()> {
    let seed = cfg.seed_required("synth")?;
    let s = &cfg.synth;
    if s.n_series == 0 || s.n_factors == 0 || s.n_factors > s.n_series {
        return Err(CliError::Validation(format!(
            "synth needs 1 ≤ n_factors ≤ n_series, got q = {}, K = {}",
            s.n_factors, s.n_series
        )));
    }
    if !(s.base_vol > 0.0) || !(s.idio_vol >= 0.0) || !s.vol_effect.is_finite() || !s.mean_effect.is_finite() {
        return Err(CliError::Validation("synth volatilities must be positive and effects finite".into()));
    }
    let dir = run.dir(layout::DATA)?;
    let spec = demo_spec(s.n_series, s.n_factors)?;
    let assets = asset_names(s.n_series);
    let dates = business_days(s.start_date, s.n_obs);

    let mut truths = Vec::new();
    for (source, file) in [(Source::News, layout::NEWS), (Source::Social, layout::SOCIAL)] {
        let name = source.as_str();
        let (panel, truth) = run.time(&format!("simulate {name}"), |_| {
            Ok(simulate_mlss(&spec, s.n_obs, substream_seed(seed, &format!("synth/{name}")))?)
        })?;
        let panel = SentimentPanel::new(panel.values, dates.clone(), assets.clone(), source, true)?;
        run.wide(&dir.join(file), &format!("simulated daily {name} sentiment"), &dates, &assets, &panel.values)?;
        let (cols, m) = truth_table(&truth, &assets);
        let path = dir.join(format!("truth_{name}.csv"));
        run.wide(&path, &format!("latent {name} states: long-term factors, short-term components, their mean"), &dates, &cols, &m)?;
        truths.push(truth);
    }

    let k = s.n_series;
    let betas: Vec<f64> = (0..k)
        .map(|i| if k == 1 { 1.0 } else { 0.8 + 0.4 * i as f64 / (k - 1) as f64 })
        .collect();
    let (r, rv) = simulate_returns(s, &truths[0].psi_bar(), &betas, substream_seed(seed, "synth/returns"));
    let mut prices = DMatrix::zeros(s.n_obs, k);
    for i in 0..k {
        let mut lp = (100.0 * (1.0 + 0.1 * i as f64)).ln();
        for t in 0..s.n_obs {
            lp += r[(t, i)];
            prices[(t, i)] = lp.exp();
        }
    }
    run.wide(&dir.join(layout::PRICES), "simulated closing prices", &dates, &assets, &prices)?;
    let rv_m = DMatrix::from_column_slice(s.n_obs, 1, &rv);
    run.wide(&dir.join(layout::RV), "realized variance of the representative portfolio", &dates, &["rv".to_string()], &rv_m)?;
    let truth = Truth {
        news: SpecTruth::of(&spec),
        social: SpecTruth::of(&spec),
        betas,
        synth: s.clone(),
    };
    run.json(&dir.join("truth_spec.json"), &truth)?;
    Ok(())
}

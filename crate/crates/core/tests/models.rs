use chrono::NaiveDate;
use mlss_core::em::{fit_em, initial_local_level, ConstraintSet, EmOptions};
use mlss_core::io;
use mlss_core::models::{
    aggregate_daily, business_days, demo_spec, fill_missing, fit_model, fit_source, signal_to_noise, simulate_mlss, IntradayRecord,
    IntradaySentiment, ModelTag, SentimentPanel, Source,
};
use mlss_core::stats::correlation;
use mlss_core::{kalman_filter, DMatrix};

fn panels(k: usize, q: usize, t: usize, seed: u64) -> (SentimentPanel, SentimentPanel) {
    let spec = demo_spec(k, q).unwrap();
    let (news, _) = simulate_mlss(&spec, t, seed).unwrap();
    let (social, _) = simulate_mlss(&spec, t, seed + 1).unwrap();
    (news, SentimentPanel { source: Source::Social, ..social })
}

#[test]
fn mlss_recovers_short_term_mean() {
    let spec = demo_spec(6, 2).unwrap();
    let (news, truth) = simulate_mlss(&spec, 2000, 4).unwrap();
    let psi_bar = truth.psi_bar();
    let opts = EmOptions { accelerate: true, ..EmOptions::plain(1e-6, 2000) };
    let fit = fit_source(ModelTag::Mlss, &news.values, Source::News, 2, opts).unwrap();
    let est: Vec<f64> = (0..2000).map(|t| fit.filtered.row(t).columns(2, 6).sum() / 6.0).collect();
    let oracle = kalman_filter(&spec, &news.values).unwrap();
    let best: Vec<f64> = oracle.filt_mean.iter().map(|x| x.rows(2, 6).sum() / 6.0).collect();
    let (rho, rho_best) = (correlation(&psi_bar, &est), correlation(&psi_bar, &best));
    assert!(rho >= 0.8, "corr(psi_bar) = {rho}, true-parameter filter {rho_best}");
}

#[test]
fn mlss_stn_exceeds_mlnsl_stn() {
    let (news, social) = panels(6, 2, 1000, 1);
    let opts = EmOptions::plain(1e-3, 500);
    let mlss = fit_model(ModelTag::Mlss, &news, &social, 2, 2, opts).unwrap();
    let mlnsl = fit_model(ModelTag::Mlnsl, &news, &social, 2, 2, opts).unwrap();
    for src in 0..2 {
        let a = signal_to_noise(&mlss.fits[src].spec, ModelTag::Mlss).unwrap();
        let b = signal_to_noise(&mlnsl.fits[src].spec, ModelTag::Mlnsl).unwrap();
        assert!(a.iter().chain(&b).all(|v| *v > 0.0));
        for (x, y) in a.iter().zip(&b) {
            assert!(x > y, "stn MLSS {x} vs MLNSL {y}");
        }
    }
}

#[test]
fn signal_layouts_match_each_tag() {
    let (news, social) = panels(3, 1, 200, 9);
    let opts = EmOptions::plain(1e-3, 200);
    for tag in ModelTag::ALL {
        let s = fit_model(tag, &news, &social, 1, 1, opts).unwrap();
        assert_eq!(s.dim(), tag.signal_dim(1, 1), "{tag}");
        assert_eq!(s.dates, news.dates[1..]);
        assert!(s.values.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn obs_passes_through_mean_differences() {
    let (news, social) = panels(4, 1, 50, 3);
    let s = fit_model(ModelTag::Obs, &news, &social, 1, 1, EmOptions::plain(1e-3, 10)).unwrap();
    for (j, p) in [&news, &social].iter().enumerate() {
        for t in 1..50 {
            let m = |t: usize| p.values.row(t).sum() / 4.0;
            assert!((s.values[(t - 1, j)] - (m(t) - m(t - 1))).abs() < 1e-15);
        }
    }
    let flat = DMatrix::from_element(10, 2, 0.3);
    let dates = business_days(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), 10);
    let p = SentimentPanel::new(flat, dates, vec!["A".into(), "B".into()], Source::News, false).unwrap();
    let s = fit_model(ModelTag::Obs, &p, &p, 1, 1, EmOptions::plain(1e-3, 10)).unwrap();
    assert!(s.values.iter().all(|v| *v == 0.0));
}

#[test]
fn lnsl_nests_in_diagonal_mlnsl() {
    let (news, _) = panels(2, 1, 300, 5);
    let opts = EmOptions::plain(1e-300, 40);
    let joint_cons = ConstraintSet::local_level(2, true).unwrap();
    let (joint, _) = fit_em(&news.values, &joint_cons, &initial_local_level(&news.values).unwrap(), opts).unwrap();
    let fj = kalman_filter(&joint, &news.values).unwrap();
    for i in 0..2 {
        let col = news.values.columns(i, 1).into_owned();
        let cons = ConstraintSet::local_level(1, true).unwrap();
        let (single, _) = fit_em(&col, &cons, &initial_local_level(&col).unwrap(), opts).unwrap();
        let fs = kalman_filter(&single, &col).unwrap();
        for t in 0..300 {
            assert!((fj.filt_mean[t][i] - fs.filt_mean[t][0]).abs() < 1e-6);
        }
    }
}

#[test]
fn wide_csv_round_trip_keeps_values_and_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("news.csv");
    let dates = business_days(NaiveDate::from_ymd_opt(2021, 3, 1).unwrap(), 4);
    let mut v = DMatrix::from_row_slice(4, 2, &[0.1, -0.2, 0.123456789012345, 1.0, -1.0, 0.0, 0.5, 0.25]);
    v[(2, 1)] = f64::NAN;
    let p = SentimentPanel::new(v, dates, vec!["AXP".into(), "BA".into()], Source::News, false).unwrap();
    io::write_panel_csv(&path, &p).unwrap();
    let back = io::read_panel_csv(&path, Source::News, false).unwrap();
    assert_eq!(back.dates, p.dates);
    assert_eq!(back.assets, p.assets);
    for (a, b) in back.values.iter().zip(p.values.iter()) {
        assert!(a == b || (a.is_nan() && b.is_nan()));
    }
    let (filled, rep) = fill_missing(&back, 5, 0.5).unwrap();
    assert_eq!(rep.total(), 1);
    assert!((filled.values[(2, 1)] - 0.4).abs() < 1e-15);
}

#[test]
fn out_of_range_sentiment_is_rejected_on_read() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "date,AXP\n2021-03-01,1.5\n").unwrap();
    assert!(io::read_panel_csv(&path, Source::News, false).is_err());
    assert!(io::read_panel_csv(&path, Source::News, true).is_ok());
}

#[test]
fn intraday_file_aggregates_by_cutoff_and_calendar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("intraday.csv");
    let rows = "date,minute,ticker,score,buzz\n\
                2021-03-05,600,AXP,1.0,1.0\n\
                2021-03-05,700,AXP,-1.0,3.0\n\
                2021-03-05,1000,AXP,0.4,2.0\n\
                2021-03-06,100,AXP,0.9,0.0\n\
                2021-03-08,60,BA,0.2,1.0\n";
    std::fs::write(&path, rows).unwrap();
    let raw = io::read_intraday_csv(&path).unwrap();
    let d = |day| NaiveDate::from_ymd_opt(2021, 3, day).unwrap();
    // Friday 5th and Monday 8th; the 16:40 Friday message rolls to Monday.
    let p = aggregate_daily(&raw, 16, &[d(5), d(8)], Source::News).unwrap();
    assert_eq!(p.assets, ["AXP", "BA"]);
    assert!((p.values[(0, 0)] + 0.5).abs() < 1e-15);
    assert!((p.values[(1, 0)] - 0.4).abs() < 1e-15);
    assert!(p.values[(0, 1)].is_nan());
    assert!((p.values[(1, 1)] - 0.2).abs() < 1e-15);

    let bad = IntradaySentiment {
        records: vec![IntradayRecord { date: d(5), minute: 10, ticker: "X".into(), score: 0.1, buzz: -1.0 }],
    };
    assert!(aggregate_daily(&bad, 16, &[], Source::News).is_err());
}

use mlss_core::backtest::ledger::value_metrics;
use mlss_core::backtest::signals::{criterion_variable, gate_signal, rolling_signals, trade_count};
use mlss_core::backtest::{fit_logit, mc_significance, run_backtest, run_ledger, shuffled, LogitStatus, ALPHA_GRID};
use mlss_core::stats::{ks_test, mean};
use mlss_core::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn cents(x: f64) -> i64 {
    (x * 100.0).round() as i64
}

#[test]
fn four_step_ledger_matches_hand_computation() {
    // c0 = 1000 shares; every trade at that day's level, half the rate per unit of |Δs|
    //   t=0: buy 1000 @100, cost 50           cash -50
    //   t=1: flip to short @110 (2000 units), cost 110   cash -50 + 220000 - 110
    //   t=2: flip to long @99, cost 99        cash 219840 - 198000 - 99
    let l = run_ledger(&[0, 1, -1, 1], &[100.0, 110.0, 99.0, 105.0], 100_000.0, 0.001).unwrap();
    assert_eq!(l.cash.iter().map(|c| cents(*c)).collect::<Vec<_>>(), [10_000_000, -5_000, 21_984_000, 2_174_100]);
    assert_eq!(
        l.portfolio.iter().map(|c| cents(*c)).collect::<Vec<_>>(),
        [10_000_000, 10_995_000, 12_084_000, 12_674_100]
    );
    assert_eq!(l.costs.iter().map(|c| cents(*c)).collect::<Vec<_>>(), [0, 5_000, 11_000, 9_900]);
    assert_eq!(l.trades, 5);
    assert_eq!(cents(l.total_costs), 25_900);
}

#[test]
fn buy_and_hold_costs_fifty_dollars() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut m = vec![2500.0];
    for e in normals(&mut rng, 499) {
        let last = *m.last().unwrap();
        m.push(last * (0.01 * e).exp());
    }
    let mut s = vec![1i8; 500];
    s[0] = 0;
    let l = run_ledger(&s, &m, 100_000.0, 0.001).unwrap();
    assert_eq!(l.trades, 1);
    assert_eq!(cents(l.total_costs), 5_000);
    let free = run_ledger(&s, &m, 100_000.0, 0.0).unwrap();
    assert!((free.portfolio[499] / free.portfolio[0] - m[499] / m[0]).abs() < 1e-12);
    assert_eq!(free.total_costs, 0.0);
}

fn random_path(rng: &mut ChaCha8Rng, n: usize, vol: f64) -> (Vec<i8>, Vec<f64>) {
    let mut s = vec![0i8];
    s.extend((1..n).map(|_| if rng.random_bool(0.3) { -1 } else { 1 }));
    let mut m = vec![100.0];
    for _ in 1..n {
        let last: f64 = *m.last().unwrap();
        m.push(last * (vol * rng.sample::<f64, _>(StandardNormal)).exp());
    }
    (s, m)
}

proptest! {
    #[test]
    fn trades_costs_and_identity_match_direct_sums(seed in 0u64..10_000, n in 2usize..80, rate in 0.0f64..0.01) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (s, m) = random_path(&mut rng, n, 0.02);
        let l = run_ledger(&s, &m, 100_000.0, rate).unwrap();
        let c0 = 100_000.0 / m[0];
        let mut tr = 0u64;
        let mut tc = 0.0;
        for i in 0..n - 1 {
            let d = (s[i + 1] - s[i]).abs();
            tr += d as u64;
            tc += d as f64 * c0 * m[i] * rate / 2.0;
        }
        prop_assert_eq!(l.trades, tr);
        prop_assert_eq!(trade_count(&s), tr);
        prop_assert!((l.total_costs - tc).abs() <= 1e-9 * tc.max(1.0));
        for t in 0..n {
            let p = s[t] as f64 * c0 * m[t] + l.cash[t];
            prop_assert!((l.portfolio[t] - p).abs() <= 1e-9 * p.abs().max(1.0));
        }
        let dearer = run_ledger(&s, &m, 100_000.0, rate + 0.001).unwrap();
        prop_assert!(dearer.portfolio[n - 1] <= l.portfolio[n - 1]);
    }
}

#[test]
fn metric_edge_cases() {
    let flat = value_metrics(&[100.0; 5]).unwrap();
    assert_eq!((flat.annual_return, flat.max_drawdown, flat.sharpe), (0.0, 0.0, None));
    let up = value_metrics(&[100.0, 101.0, 103.0, 104.0]).unwrap();
    assert_eq!((up.annual_negative_volatility, up.max_drawdown, up.sortino), (0.0, 0.0, None));
    assert_eq!(value_metrics(&[100.0, 120.0, 90.0, 130.0]).unwrap().max_drawdown, 30.0);
}

#[test]
fn criterion_variable_hits_the_lower_tercile() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let r = normals(&mut rng, 100_000);
    let y = criterion_variable(&r, &vec![1.0; r.len()]).unwrap();
    let share = y.iter().filter(|v| **v).count() as f64 / y.len() as f64;
    assert!((share - 1.0 / 3.0).abs() < 0.01, "{share}");
    assert_eq!(criterion_variable(&[-1.0, 0.0], &[1.0, 1.0]).unwrap(), [true, false]);
    assert!(criterion_variable(&[0.0], &[0.0]).is_err());
}

#[test]
fn logit_recovers_parameters_with_zero_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 5000;
    let theta = [0.5, -1.0, 2.0];
    let x = DMatrix::from_fn(n, 3, |_, j| if j == 0 { 1.0 } else { StandardNormal.sample(&mut rng) });
    let y: Vec<bool> = (0..n)
        .map(|i| {
            let eta: f64 = (0..3).map(|j| theta[j] * x[(i, j)]).sum();
            rng.random_bool(1.0 / (1.0 + (-eta).exp()))
        })
        .collect();
    let st = fit_logit(&x, &y, 100).unwrap();
    assert!(st.converged);
    for j in 0..3 {
        assert!((st.theta[j] - theta[j]).abs() < 0.15, "{:?}", st.theta);
    }
    let mut grad = [0.0; 3];
    for i in 0..n {
        let p = st.prob(&[x[(i, 0)], x[(i, 1)], x[(i, 2)]]);
        for j in 0..3 {
            grad[j] += x[(i, j)] * (y[i] as u8 as f64 - p);
        }
    }
    assert!(grad.iter().all(|g| g.abs() <= 1e-6), "{grad:?}");
    let k = y.iter().filter(|v| **v).count() as f64;
    let l0 = k * (k / n as f64).ln() + (n as f64 - k) * (1.0 - k / n as f64).ln();
    assert!((st.mcfadden_r2 - (1.0 - st.loglik / l0)).abs() < 1e-12);
    assert!((0.0..=1.0).contains(&st.mcfadden_r2));
}

#[test]
fn intercept_only_logit_is_the_log_odds() {
    let y: Vec<bool> = (0..400).map(|i| i % 4 == 0).collect();
    let st = fit_logit(&DMatrix::from_element(400, 1, 1.0), &y, 100).unwrap();
    assert!((st.theta[0] - (0.25f64 / 0.75).ln()).abs() < 1e-8);
    assert!(st.mcfadden_r2.abs() < 1e-12);
    let sep = fit_logit(&DMatrix::from_fn(20, 2, |i, j| if j == 0 { 1.0 } else { i as f64 }), &(0..20).map(|i| i >= 10).collect::<Vec<_>>(), 100).unwrap();
    assert_eq!(sep.status, LogitStatus::Separated);
    assert!(!sep.converged && sep.theta.iter().all(|v| v.abs() <= 30.0));
}

/// A signal column that leaks tomorrow's standardized return.
fn leaky_inputs(seed: u64, n: usize, leak: f64) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = normals(&mut rng, n);
    let noise = normals(&mut rng, n);
    let s = DMatrix::from_fn(n, 1, |u, _| if u + 1 < n { leak * r[u + 1] + noise[u] } else { 0.0 });
    (s, r, vec![1.0; n])
}

#[test]
fn planted_predictor_drives_sells_on_bad_days() {
    let (s, r, rv) = leaky_inputs(3, 3000, 3.0);
    let sig = rolling_signals(&s, &r, &rv, 126).unwrap();
    let y = criterion_variable(&r, &rv).unwrap();
    let (mut hit, mut bad) = (0, 0);
    for k in 1..sig.s.len() {
        if y[sig.start + k] {
            bad += 1;
            hit += (sig.s[k] == -1) as usize;
        }
    }
    assert!(hit as f64 >= 0.8 * bad as f64, "{hit}/{bad}");
    assert_eq!(sig.s[0], 0);
    assert!(sig.s[1..].iter().all(|v| *v == 1 || *v == -1));
}

#[test]
fn uninformative_classifier_never_sells() {
    // every window is single-class (no bad days at all)
    let n = 300;
    let r = vec![0.5; n];
    let s = DMatrix::from_fn(n, 1, |u, _| (u as f64).sin());
    let sig = rolling_signals(&s, &r, &vec![1.0; n], 50).unwrap();
    assert!(sig.s[1..].iter().all(|v| *v == 1));
}

#[test]
fn gate_trades_shrink_with_alpha() {
    for seed in 0..5 {
        let (s, r, rv) = leaky_inputs(100 + seed, 1200, 0.6);
        let raw = rolling_signals(&s, &r, &rv, 126).unwrap();
        let g0 = gate_signal(&raw, 0.0).unwrap();
        assert_eq!(g0.s, raw.s);
        let trades: Vec<u64> = ALPHA_GRID.iter().map(|a| gate_signal(&raw, *a).unwrap().trades()).collect();
        assert!(trades.windows(2).all(|w| w[0] >= w[1]), "seed {seed}: {trades:?}");
        let market: Vec<f64> = (0..r.len()).map(|t| 100.0 + t as f64 * 0.01).collect();
        let run = run_backtest("M", &s, &r, &rv, &market, 126, 0.001, &ALPHA_GRID).unwrap();
        assert_eq!(run.strategies[0].metrics.trades, 1);
        assert!((run.strategies[0].metrics.total_costs - 50.0).abs() < 1e-9);
    }
}

fn mc_inputs() -> (Vec<i8>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    random_path(&mut rng, 400, 0.005)
}

#[test]
fn shuffles_preserve_sells_and_results_are_reproducible() {
    let (s, m) = mc_inputs();
    let a = mc_significance(&s, &m, 100_000.0, 0.001, 10_000, 7).unwrap();
    assert!(a.sells_preserved);
    assert_eq!(a.sells, s.iter().filter(|v| **v == -1).count());
    let b = mc_significance(&s, &m, 100_000.0, 0.001, 10_000, 7).unwrap();
    assert_eq!(a, b);
    for i in 0..50 {
        let sh = shuffled(&s, i);
        assert_eq!(sh[0], 0);
        assert_eq!(sh.iter().filter(|v| **v == -1).count(), a.sells);
    }
}

#[test]
fn mc_percentiles_do_not_depend_on_thread_count() {
    let (s, m) = mc_inputs();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_significance(&s, &m, 100_000.0, 0.001, 2000, 99).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn a_shuffled_copy_ranks_uniformly() {
    let (s, m) = mc_inputs();
    let pct: Vec<f64> = (0..200)
        .map(|i| {
            let fake = shuffled(&s, 10_000 + i);
            mc_significance(&fake, &m, 100_000.0, 0.001, 200, i).unwrap().sharpe_percentile
        })
        .collect();
    let (_, p) = ks_test(&pct, |x| x.clamp(0.0, 1.0));
    assert!(p > 0.01, "KS p = {p}, mean percentile {}", mean(&pct));
}

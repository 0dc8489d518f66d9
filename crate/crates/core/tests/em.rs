mod common;

use common::oracle::random_mlss_spec;
use mlss_core::em::{
    e_step, expected_complete_loglik, fit_em, initial_spec, m_step_unconstrained, score, ConstraintSet, EmOptions,
    ParamLayout,
};
use mlss_core::models::{demo_spec, simulate_raw};
use mlss_core::{loglikelihood, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn fisher_score_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut spec = random_mlss_spec(&mut rng, 1, 2);
    spec.sigma0 = DMatrix::identity(3, 3);
    let (panel, _) = simulate_raw(&spec, 60, 4).unwrap();
    let layout = ParamLayout::new(&ConstraintSet::mlss(1, 2).unwrap());
    let theta = layout.get(&spec);
    let g = score(&spec, &panel, &layout).unwrap();
    for i in 0..layout.len() {
        let h = 1e-6 * theta[i].abs().max(1e-2);
        let mut up = theta.clone();
        up[i] += h;
        let mut dn = theta.clone();
        dn[i] -= h;
        let fd = (loglikelihood(&layout.set(&spec, &up), &panel).unwrap()
            - loglikelihood(&layout.set(&spec, &dn), &panel).unwrap())
            / (2.0 * h);
        let tol = 1e-4 * fd.abs().max(1.0);
        assert!((g[i] - fd).abs() < tol, "{}: score {} vs fd {}", layout.labels()[i], g[i], fd);
    }
}

#[test]
fn unconstrained_m_step_maximizes_expected_loglik() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let spec = random_mlss_spec(&mut rng, 1, 3);
    let (panel, _) = simulate_raw(&spec, 80, 1).unwrap();
    let (stats, _, _) = e_step(&spec, &panel).unwrap();
    let best = m_step_unconstrained(&stats).unwrap();
    let g0 = expected_complete_loglik(&best, &stats).unwrap();
    for _ in 0..200 {
        let mut p = best.clone();
        let eps = 1e-3;
        p.lambda_tilde += DMatrix::from_fn(3, 4, |_, _| rng.random_range(-eps..eps));
        p.phi_tilde += DMatrix::from_fn(4, 4, |_, _| rng.random_range(-eps..eps));
        let d = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-eps..eps));
        p.r += (&d + d.transpose()) * 0.5;
        let d = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-eps..eps));
        p.q_tilde += (&d + d.transpose()) * 0.5;
        assert!(expected_complete_loglik(&p, &stats).unwrap() <= g0 + 1e-12);
    }
}

#[test]
fn em_is_monotone_and_keeps_restrictions() {
    let truth = demo_spec(3, 1).unwrap();
    let (panel, _) = simulate_raw(&truth, 400, 17).unwrap();
    let cons = ConstraintSet::mlss(1, 3).unwrap();
    let init = initial_spec(&panel, 1).unwrap();
    let (spec, trace) = fit_em(&panel, &cons, &init, EmOptions::plain(1e-6, 300)).unwrap();
    assert!(trace.max_decrease <= 1e-8, "decrease {}", trace.max_decrease);
    for w in trace.loglik_path.windows(2) {
        assert!(w[1] >= w[0] - 1e-8);
    }
    assert!(cons.max_violation(&spec) <= 1e-12);
    assert!(spec.invariant_violations(1e-9).is_empty());
    let ll = loglikelihood(&spec, &panel).unwrap();
    assert!(ll >= loglikelihood(&init, &panel).unwrap());
}

#[test]
fn accelerated_em_reaches_at_least_the_plain_likelihood() {
    let truth = demo_spec(3, 1).unwrap();
    let (panel, _) = simulate_raw(&truth, 300, 5).unwrap();
    let cons = ConstraintSet::mlss(1, 3).unwrap();
    let init = initial_spec(&panel, 1).unwrap();
    let (plain, _) = fit_em(&panel, &cons, &init, EmOptions::plain(1e-3, 500)).unwrap();
    let opts = EmOptions { accelerate: true, ..EmOptions::plain(1e-3, 500) };
    let (fast, trace) = fit_em(&panel, &cons, &init, opts).unwrap();
    assert!(trace.max_decrease <= 1e-8);
    assert!(cons.max_violation(&fast) <= 1e-12);
    let (lp, lf) = (loglikelihood(&plain, &panel).unwrap(), loglikelihood(&fast, &panel).unwrap());
    assert!(lf >= lp - 1e-3 * lp.abs(), "plain {lp}, accelerated {lf}");
}

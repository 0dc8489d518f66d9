//! Constrained EM estimation of the augmented state-space system.

mod constraints;
mod params;
mod select;

pub use constraints::{
    apply_constraints, apply_constraints_weighted, free_block_project, gls_project, q_update,
    r_update, ConstraintSet, Pin, PSD_FLOOR,
};
pub use params::{
    expected_complete_loglik, score, standard_errors, ParamKind, ParamLayout, StandardErrors,
};
pub use select::{information_criteria, select_q, EstimationReport, QSelection, QSelectionRow};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky_strict, clip_eigenvalues, diff_rows, min_eigenvalue, outer, sample_cov, symmetrize,
};
use crate::statespace::{kalman_filter, kalman_smoother, SmootherOutput, StateSpaceSpec};
use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;

/// Convergence tolerance `ε` of the relative log-likelihood criterion.
pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 500;
/// Eigenvalue floor on the updated initial covariance.
pub const SIGMA0_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub a_mat: DMatrix<f64>,
    pub b_mat: DMatrix<f64>,
    pub c_mat: DMatrix<f64>,
    pub e1: DMatrix<f64>,
    pub e2: DMatrix<f64>,
    pub e3: DMatrix<f64>,
    /// Smoothed initial state `F̃_{0|T}` and its covariance `P_{0|T}`.
    pub init_mean: DVector<f64>,
    pub init_cov: DMatrix<f64>,
    pub n_obs: usize,
    pub n_factors: usize,
}

/// E-step: smoother moments, the sufficient statistics built from them and
/// the observed-data log-likelihood at `spec`.
pub fn e_step(
    spec: &StateSpaceSpec,
    panel: &DMatrix<f64>,
) -> Result<(SufficientStats, SmootherOutput, f64)> {
    let t_len = panel.nrows();
    if t_len == 0 {
        return Err(Error::InvalidInput("E-step needs at least one observation".into()));
    }
    let filt = kalman_filter(spec, panel)?;
    let sm = kalman_smoother(spec, &filt)?;
    let n = spec.state_dim();
    let k = spec.n_series;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    let mut c = DMatrix::zeros(n, n);
    let mut e2 = DMatrix::zeros(k, n);
    let mut e3 = DMatrix::zeros(k, k);
    for t in 0..t_len {
        let (prev_m, prev_p) = if t == 0 {
            (&sm.init_mean, &sm.init_cov)
        } else {
            (&sm.smooth_mean[t - 1], &sm.smooth_cov[t - 1])
        };
        let m = &sm.smooth_mean[t];
        a += outer(prev_m, prev_m) + prev_p;
        b += outer(m, prev_m) + &sm.lag_cov[t];
        c += outer(m, m) + &sm.smooth_cov[t];
        let y = panel.row(t).transpose();
        e2 += outer(&y, m);
        e3 += outer(&y, &y);
    }
    let a = symmetrize(&a);
    let c = symmetrize(&c);
    let stats = SufficientStats {
        a_mat: a,
        b_mat: b,
        e1: c.clone(),
        c_mat: c,
        e2,
        e3: symmetrize(&e3),
        init_mean: sm.init_mean.clone(),
        init_cov: sm.init_cov.clone(),
        n_obs: t_len,
        n_factors: spec.n_factors,
    };
    Ok((stats, sm, filt.loglik))
}

/// Closed-form maximizer of the expected complete-data log-likelihood with
/// no restrictions. Q̃ and R are symmetrized and eigenvalue-floored.
pub fn m_step_unconstrained(stats: &SufficientStats) -> Result<StateSpaceSpec> {
    let a_chol = cholesky_strict(&stats.a_mat, "A")?;
    let e1_chol = cholesky_strict(&stats.e1, "E1")?;
    // Φ̃ = B A⁻¹, Λ̃ = E₂ E₁⁻¹ via solves on the transposes
    let phi = a_chol.solve(&stats.b_mat.transpose()).transpose();
    let lambda = e1_chol.solve(&stats.e2.transpose()).transpose();
    let q = constraints::repair_psd(&q_update(stats, &phi));
    let r = constraints::repair_psd(&r_update(stats, &lambda));
    StateSpaceSpec::new(
        lambda,
        phi,
        q,
        r,
        stats.init_mean.clone(),
        stats.init_cov.clone(),
        stats.n_factors,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmTrace {
    pub loglik_path: Vec<f64>,
    /// Number of completed parameter updates.
    pub iterations: usize,
    pub converged: bool,
    /// Last value of `|ℓ_j − ℓ_{j−1}| / |ℓ_j + ℓ_{j−1}|`.
    pub final_delta: Option<f64>,
    /// Largest single-step decrease of the log-likelihood (0 when monotone).
    pub max_decrease: f64,
}

impl EmTrace {
    fn new() -> Self {
        Self {
            loglik_path: vec![],
            iterations: 0,
            converged: false,
            final_delta: None,
            max_decrease: 0.0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("EM aborted after {} iterations: {source}", trace.iterations)]
pub struct EmAbort {
    pub source: Error,
    pub trace: EmTrace,
    /// Highest-likelihood iterate reached before the failure.
    pub best: Option<StateSpaceSpec>,
}

impl From<EmAbort> for Error {
    fn from(e: EmAbort) -> Self {
        Error::Em {
            source: Box::new(e.source),
            trace: Box::new(e.trace),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// SQUAREM acceleration: each iteration takes two EM steps and keeps
    /// the squared extrapolation only if the log-likelihood does not fall.
    #[serde(default)]
    pub accelerate: bool,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            accelerate: false,
        }
    }
}

impl EmOptions {
    pub fn plain(tol: f64, max_iter: usize) -> Self {
        Self { tol, max_iter, accelerate: false }
    }
}

/// Extrapolation attempts per cycle before falling back to two plain steps.
const SQUAREM_BACKTRACK: usize = 4;

/// `θ₀ − 2α r + α² v` with `r = θ₁ − θ₀`, `v = θ₂ − 2θ₁ + θ₀` on every block,
/// if the result is a valid model. Pinned entries give `r = v = 0` exactly.
fn squarem_point(
    t0: &StateSpaceSpec,
    t1: &StateSpaceSpec,
    t2: &StateSpaceSpec,
    alpha: f64,
) -> Option<StateSpaceSpec> {
    let mix = |a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>| {
        let r = b - a;
        let v = c - b - &r;
        a - &r * (2.0 * alpha) + v * (alpha * alpha)
    };
    let mut s = t2.clone();
    s.lambda_tilde = mix(&t0.lambda_tilde, &t1.lambda_tilde, &t2.lambda_tilde);
    s.phi_tilde = mix(&t0.phi_tilde, &t1.phi_tilde, &t2.phi_tilde);
    s.q_tilde = symmetrize(&mix(&t0.q_tilde, &t1.q_tilde, &t2.q_tilde));
    s.r = symmetrize(&mix(&t0.r, &t1.r, &t2.r));
    s.sigma0 = symmetrize(&mix(&t0.sigma0, &t1.sigma0, &t2.sigma0));
    let col = |v: &DVector<f64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    s.a = mix(&col(&t0.a), &col(&t1.a), &col(&t2.a)).column(0).into_owned();
    let finite = [&s.lambda_tilde, &s.phi_tilde, &s.q_tilde, &s.r, &s.sigma0]
        .iter()
        .all(|m| m.iter().all(|v| v.is_finite()));
    let ok = finite
        && (0..s.r.nrows()).all(|i| s.r[(i, i)] > PSD_FLOOR)
        && min_eigenvalue(&s.q_tilde) >= 0.0
        && min_eigenvalue(&s.sigma0) > 0.0
        && s.phi_tilde.amax() < 1.0;
    ok.then_some(s)
}

/// Step length `−‖r‖/‖v‖`, capped at −1 (which reproduces θ₂).
fn squarem_alpha(t0: &StateSpaceSpec, t1: &StateSpaceSpec, t2: &StateSpaceSpec) -> f64 {
    let blocks = |s: &StateSpaceSpec| {
        vec![
            s.lambda_tilde.clone(),
            s.phi_tilde.clone(),
            s.q_tilde.clone(),
            s.r.clone(),
            s.sigma0.clone(),
        ]
    };
    let (b0, b1, b2) = (blocks(t0), blocks(t1), blocks(t2));
    let (mut rr, mut vv) = (0.0, 0.0);
    for i in 0..b0.len() {
        let r = &b1[i] - &b0[i];
        let v = &b2[i] - &b1[i] - &r;
        rr += r.norm_squared();
        vv += v.norm_squared();
    }
    if vv == 0.0 {
        return -1.0;
    }
    (-(rr / vv).sqrt()).min(-1.0)
}

/// `a = 0` and `Σ = P_{0|T} + F̃_{0|T}F̃′_{0|T}`, the maximizer over Σ once
/// the initial mean is fixed at zero. Entries where Q̃ is pinned to zero off
/// the diagonal are zeroed too, so blocks that are independent under the
/// restrictions stay independent at t = 0. Floored away from singularity.
fn initial_state_update(spec: &mut StateSpaceSpec, stats: &SufficientStats, cons: &ConstraintSet) {
    let n = spec.state_dim();
    let m = &stats.init_mean;
    spec.a = DVector::zeros(n);
    let mut s = &stats.init_cov + outer(m, m);
    for &(i, j, v) in &cons.q_pins {
        if i != j && v == 0.0 {
            s[(i, j)] = 0.0;
            s[(j, i)] = 0.0;
        }
    }
    spec.sigma0 = clip_eigenvalues(&s, SIGMA0_FLOOR);
}

/// One full constrained EM update from `spec` given its E-step statistics.
pub fn em_update(
    spec: &StateSpaceSpec,
    stats: &SufficientStats,
    cons: &ConstraintSet,
) -> Result<StateSpaceSpec> {
    let cand = m_step_unconstrained(stats)?;
    let mut next = apply_constraints_weighted(&cand, stats, cons, &spec.q_tilde, &spec.r)?;
    initial_state_update(&mut next, stats, cons);
    Ok(next)
}

/// Alternates E-steps and constrained M-steps from `init` until the
/// relative change criterion drops below `tol / 2` or `max_iter` updates
/// have run. Returns the highest-likelihood iterate.
pub fn fit_em(
    panel: &DMatrix<f64>,
    cons: &ConstraintSet,
    init: &StateSpaceSpec,
    opts: EmOptions,
) -> std::result::Result<(StateSpaceSpec, EmTrace), EmAbort> {
    let mut trace = EmTrace::new();
    let abort = |source: Error, trace: EmTrace, best: Option<StateSpaceSpec>| EmAbort {
        source,
        trace,
        best,
    };
    if cons.max_violation(init) > 1e-9 {
        return Err(abort(
            Error::Constraint("initial spec violates the restriction set".into()),
            trace,
            None,
        ));
    }
    let mut spec = init.clone();
    let mut best: Option<(StateSpaceSpec, f64)> = None;
    let mut pending: Option<(SufficientStats, f64)> = None;
    let mut iter = 0;
    loop {
        let (stats, ll) = match pending.take() {
            Some(v) => v,
            None => match e_step(&spec, panel) {
                Ok((st, _, ll)) => (st, ll),
                Err(e) => return Err(abort(e, trace, best.map(|b| b.0))),
            },
        };
        if let Some(&prev) = trace.loglik_path.last() {
            trace.max_decrease = trace.max_decrease.max(prev - ll);
            let delta = (ll - prev).abs() / (ll + prev).abs();
            trace.final_delta = Some(delta);
            if delta < opts.tol / 2.0 {
                trace.converged = true;
            }
        }
        trace.loglik_path.push(ll);
        if best.as_ref().map_or(true, |b| ll > b.1) {
            best = Some((spec.clone(), ll));
        }
        if trace.converged || iter >= opts.max_iter {
            break;
        }
        let t1 = match em_update(&spec, &stats, cons) {
            Ok(s) => s,
            Err(e) => return Err(abort(e, trace, best.map(|b| b.0))),
        };
        if !opts.accelerate {
            spec = t1;
            iter += 1;
            trace.iterations = iter;
            continue;
        }
        // One SQUAREM cycle: two EM steps, then an extrapolated point kept
        // only if it is at least as likely as the first EM step.
        let (st1, ll1) = match e_step(&t1, panel) {
            Ok((st, _, l)) => (st, l),
            Err(e) => return Err(abort(e, trace, best.map(|b| b.0))),
        };
        let t2 = match em_update(&t1, &st1, cons) {
            Ok(s) => s,
            Err(e) => return Err(abort(e, trace, best.map(|b| b.0))),
        };
        let mut alpha = squarem_alpha(&spec, &t1, &t2);
        let mut accepted = None;
        for _ in 0..SQUAREM_BACKTRACK {
            if alpha >= -1.0 {
                break;
            }
            if let Some(cand) = squarem_point(&spec, &t1, &t2, alpha) {
                if let Ok((st, _, l)) = e_step(&cand, panel) {
                    if l.is_finite() && l >= ll1 {
                        accepted = Some((cand, st, l));
                        break;
                    }
                }
            }
            alpha = (alpha - 1.0) / 2.0;
        }
        spec = match accepted {
            Some((cand, st, l)) => {
                pending = Some((st, l));
                cand
            }
            None => t2,
        };
        iter += 1;
        trace.iterations = iter;
    }
    Ok((best.expect("at least one E-step").0, trace))
}

/// Starting values for an MLSS fit, from the covariances `C(h)` of the
/// h-period differences.
///
/// With `M = ΛΛ′` and `Γ₀ = Var(Ψ)`,
/// `C_ij(h) = h M_ij + (2 − φ_i^h − φ_j^h) Γ₀_ij + 2 R_ii δ_ij`.
/// Per series, moment estimates of `(φ, Γ₀, R)` from this variogram are
/// polished by a univariate maximum-likelihood fit; off-diagonal `M_ij` and
/// `Γ₀_ij` then follow by least squares over `h = 1..h₂`. Λ is the rank-q
/// principal part of M rotated to the identified lower-triangular form, then
/// moved to the likelihood maximum over Λ alone with the other blocks fixed.
/// Short panels fall back to Φ = 0.5·I, `Q_short = R = 0.5·diag(var ΔS)` and
/// first-difference principal components.
pub fn initial_spec(panel: &DMatrix<f64>, n_factors: usize) -> Result<StateSpaceSpec> {
    let k = panel.ncols();
    let q = n_factors;
    if q > k {
        return Err(Error::InvalidInput(format!("q = {q} exceeds K = {k}")));
    }
    if panel.nrows() < 3 {
        return Err(Error::InvalidInput("need at least 3 observations to initialise".into()));
    }
    let cov = sample_cov(&diff_rows(panel));
    let fallback = || {
        let lambda = leading_loadings(&cov, q);
        let d: Vec<f64> = (0..k).map(|i| (0.5 * cov[(i, i)]).max(PSD_FLOOR)).collect();
        let qs = DMatrix::from_diagonal(&DVector::from_vec(d.clone()));
        StateSpaceSpec::mlss(&lambda, &vec![0.5; k], &qs, &d)
    };
    let (_, h2) = INIT_HORIZONS;
    if panel.nrows() < 4 * h2 {
        return fallback();
    }
    let rw = random_walk_cov(panel).expect("panel long enough");
    let mut phi = vec![0.5; k];
    let mut m = rw.clone();
    let mut g0 = DMatrix::zeros(k, k);
    let mut rd = vec![0.0; k];
    for i in 0..k {
        let col: Vec<f64> = panel.column(i).iter().copied().collect();
        let rw_var = rw[(i, i)].max(0.0);
        let (p0, gam, r0) = short_term_moments(&col, rw_var)
            .unwrap_or((0.5, 0.25 * cov[(i, i)], 0.25 * cov[(i, i)]));
        let start = (rw_var, p0, gam * (1.0 - p0 * p0), r0);
        let (lv, p, qs, r) = univariate_refine(&col, start).unwrap_or(start);
        phi[i] = p;
        m[(i, i)] = lv;
        g0[(i, i)] = qs.max(PSD_FLOOR) / (1.0 - p * p);
        rd[i] = r.max(PSD_FLOOR);
    }
    // off-diagonal M_ij and Γ₀_ij by least squares on the cross-variogram
    let cs: Vec<DMatrix<f64>> = (1..=h2).map(|h| horizon_cov(panel, h)).collect();
    for i in 0..k {
        for j in 0..i {
            let (mut saa, mut sab, mut sbb, mut sac, mut sbc) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (hi, c) in cs.iter().enumerate() {
                let h = (hi + 1) as i32;
                let a = h as f64;
                let b = 2.0 - phi[i].powi(h) - phi[j].powi(h);
                saa += a * a;
                sab += a * b;
                sbb += b * b;
                sac += a * c[(i, j)];
                sbc += b * c[(i, j)];
            }
            let det = saa * sbb - sab * sab;
            if det.abs() > 1e-12 * saa * sbb {
                let mij = (sbb * sac - sab * sbc) / det;
                let gij = (saa * sbc - sab * sac) / det;
                m[(i, j)] = mij;
                m[(j, i)] = mij;
                g0[(i, j)] = gij;
                g0[(j, i)] = gij;
            }
        }
    }
    let lambda = if q == 0 { DMatrix::zeros(k, 0) } else { leading_loadings(&m, q) };
    let g0 = clip_eigenvalues(&g0, PSD_FLOOR);
    let qs = DMatrix::from_fn(k, k, |i, j| g0[(i, j)] * (1.0 - phi[i] * phi[j]));
    let qs = clip_eigenvalues(&symmetrize(&qs), PSD_FLOOR);
    let spec = StateSpaceSpec::mlss(&lambda, &phi, &qs, &rd)?;
    if q == 0 {
        return Ok(spec);
    }
    Ok(profile_loadings(&spec, panel).unwrap_or(spec))
}

/// Likelihood of the free loadings with every other block held fixed.
struct LoadingProfile<'a> {
    spec: &'a StateSpaceSpec,
    panel: &'a DMatrix<f64>,
    layout: ParamLayout,
}

impl LoadingProfile<'_> {
    fn at(&self, theta: &[f64]) -> StateSpaceSpec {
        self.layout.set(self.spec, &DVector::from_column_slice(theta))
    }

    fn scale(&self) -> f64 {
        self.panel.nrows() as f64
    }
}

fn solver_error(e: Error) -> argmin::core::Error {
    argmin::core::Error::msg(e.to_string())
}

impl CostFunction for LoadingProfile<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, theta: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let ll = crate::statespace::loglikelihood(&self.at(theta), self.panel).map_err(solver_error)?;
        Ok(-ll / self.scale())
    }
}

impl Gradient for LoadingProfile<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, theta: &Vec<f64>) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        let g = score(&self.at(theta), self.panel, &self.layout).map_err(solver_error)?;
        Ok(g.iter().map(|v| -v / self.scale()).collect())
    }
}

/// Moment-based loadings are noisy (few independent long-horizon increments),
/// and the likelihood is far more sensitive to Λ than to the other blocks.
/// L-BFGS on the free Λ entries, the rest fixed at their moment estimates.
fn profile_loadings(spec: &StateSpaceSpec, panel: &DMatrix<f64>) -> Option<StateSpaceSpec> {
    let cons = ConstraintSet::mlss(spec.n_factors, spec.n_series).ok()?;
    let mut layout = ParamLayout::new(&cons);
    layout.params.retain(|p| p.kind == ParamKind::Lambda && p.col < spec.n_factors);
    let x0: Vec<f64> = layout.get(spec).iter().copied().collect();
    let problem = LoadingProfile { spec, panel, layout: layout.clone() };
    let start = problem.cost(&x0).ok()?;
    let solver = LBFGS::new(MoreThuenteLineSearch::new(), 7);
    let res = Executor::new(problem, solver)
        .configure(|s| s.param(x0).max_iters(PROFILE_MAX_ITER))
        .run()
        .ok()?;
    let state = res.state();
    let best = state.get_best_param()?;
    (state.get_best_cost() < start).then(|| layout.set(spec, &DVector::from_column_slice(best)))
}

const PROFILE_MAX_ITER: u64 = 50;

/// Univariate random walk + AR(1) + noise fit of one series. Takes and
/// returns `(λ², φ, Q_short, R)`; used only to place the multivariate start.
fn univariate_refine(x: &[f64], (lv, phi, q, r): (f64, f64, f64, f64)) -> Option<(f64, f64, f64, f64)> {
    let y = DMatrix::from_column_slice(x.len(), 1, x);
    let spec = StateSpaceSpec::mlss(
        &DMatrix::from_element(1, 1, lv.max(1e-12).sqrt()),
        &[phi],
        &DMatrix::from_element(1, 1, q.max(PSD_FLOOR)),
        &[r.max(PSD_FLOOR)],
    )
    .ok()?;
    let cons = ConstraintSet::mlss(1, 1).ok()?;
    let opts = EmOptions { tol: REFINE_TOL, max_iter: REFINE_MAX_ITER, accelerate: true };
    let (fit, _) = fit_em(&y, &cons, &spec, opts).ok()?;
    let l = fit.lambda()[(0, 0)];
    let p = fit.phi_diag()[0];
    let qs = fit.q_short()[(0, 0)];
    let rr = fit.r_diag()[0];
    (p.abs() < 1.0 && qs > PSD_FLOOR && rr > PSD_FLOOR).then_some((l * l, p, qs, rr))
}

const REFINE_TOL: f64 = 1e-6;
const REFINE_MAX_ITER: usize = 100;

/// `(φ, γ₀, R)` from the variogram of one series net of its random-walk
/// increment variance `rw_var`.
fn short_term_moments(x: &[f64], rw_var: f64) -> Option<(f64, f64, f64)> {
    let (h1, h2) = INIT_HORIZONS;
    let w = |h: usize| variogram(x, h) - h as f64 * rw_var;
    let plateau = (h1..=h2).map(w).sum::<f64>() / (h2 - h1 + 1) as f64;
    let (w1, w2) = (w(1), w(2));
    let (d1, d2) = (plateau - w1, plateau - w2);
    if !(d1 > 0.0 && d2 > 0.0 && d2 < d1) {
        return None;
    }
    let phi = (d2 / d1).clamp(0.05, 0.95);
    let g0 = d1 / (2.0 * phi);
    let r = plateau / 2.0 - g0;
    if !(r > 0.05 * plateau / 2.0) {
        return None;
    }
    Some((phi, g0, r))
}

fn variogram(x: &[f64], h: usize) -> f64 {
    let d: Vec<f64> = x.windows(h + 1).map(|w| w[h] - w[0]).collect();
    crate::stats::variance(&d)
}

/// Horizons used to separate the random-walk variance from the stationary part.
pub const INIT_HORIZONS: (usize, usize) = (20, 40);

fn horizon_cov(panel: &DMatrix<f64>, h: usize) -> DMatrix<f64> {
    let t = panel.nrows();
    let d = DMatrix::from_fn(t - h, panel.ncols(), |i, j| panel[(i + h, j)] - panel[(i, j)]);
    sample_cov(&d)
}

fn random_walk_cov(panel: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (h1, h2) = INIT_HORIZONS;
    if panel.nrows() < 4 * h2 {
        return None;
    }
    let m = (horizon_cov(panel, h2) - horizon_cov(panel, h1)) / (h2 - h1) as f64;
    Some(symmetrize(&m))
}

/// `K × q` lower-triangular `Λ` with `ΛΛ′` equal to the rank-q principal
/// part of `m`.
fn leading_loadings(m: &DMatrix<f64>, q: usize) -> DMatrix<f64> {
    let k = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let floor = 1e-12 * eig.eigenvalues.amax().max(1e-300);
    let l = DMatrix::from_fn(k, q, |i, c| {
        let idx = order[c];
        eig.eigenvectors[(i, idx)] * eig.eigenvalues[idx].max(floor).sqrt()
    });
    // L′ = Q R gives L = R′ Q′ with R′ lower-triangular and R′R = L L′
    let qr = l.transpose().qr();
    let mut lam = qr.r().transpose();
    for c in 0..q {
        let sign = if lam[(c, c)] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..k {
            lam[(i, c)] *= sign;
            if i < c {
                lam[(i, c)] = 0.0;
            }
        }
    }
    lam
}

/// Starting values for the random-walk-plus-noise family:
/// `Q = R = 0.5·diag(var ΔS)`.
pub fn initial_local_level(panel: &DMatrix<f64>) -> Result<StateSpaceSpec> {
    if panel.nrows() < 3 {
        return Err(Error::InvalidInput("need at least 3 observations to initialise".into()));
    }
    let cov = sample_cov(&diff_rows(panel));
    let var: Vec<f64> = (0..panel.ncols())
        .map(|i| (0.5 * cov[(i, i)]).max(PSD_FLOOR))
        .collect();
    let q = DMatrix::from_diagonal(&DVector::from_vec(var.clone()));
    StateSpaceSpec::local_level(&q, &var)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats_1d(a: f64, b: f64, c: f64, t: usize) -> SufficientStats {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        SufficientStats {
            a_mat: m(a),
            b_mat: m(b),
            c_mat: m(c),
            e1: m(c),
            e2: m(0.5),
            e3: m(2.0),
            init_mean: DVector::zeros(1),
            init_cov: m(1.0),
            n_obs: t,
            n_factors: 0,
        }
    }

    #[test]
    fn scalar_transition_update() {
        let spec = m_step_unconstrained(&stats_1d(2.0, 1.0, 3.0, 10)).unwrap();
        assert!((spec.phi_tilde[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_cross_moment_gives_c_over_t() {
        let spec = m_step_unconstrained(&stats_1d(2.0, 0.0, 3.0, 10)).unwrap();
        assert_eq!(spec.phi_tilde[(0, 0)], 0.0);
        assert!((spec.q_tilde[(0, 0)] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn singular_a_is_reported() {
        assert!(matches!(
            m_step_unconstrained(&stats_1d(0.0, 0.0, 3.0, 10)),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn single_observation_statistics() {
        let spec = StateSpaceSpec::mlss(
            &DMatrix::from_element(1, 1, 0.5),
            &[0.3],
            &DMatrix::from_element(1, 1, 0.2),
            &[0.1],
        )
        .unwrap();
        let panel = DMatrix::from_element(1, 1, 0.7);
        let (st, sm, _) = e_step(&spec, &panel).unwrap();
        let expected_b = &sm.smooth_mean[0] * sm.init_mean.transpose() + &sm.lag_cov[0];
        assert!((&st.b_mat - expected_b).amax() < 1e-12);
        assert!((st.e3[(0, 0)] - 0.49).abs() < 1e-15);
    }
}

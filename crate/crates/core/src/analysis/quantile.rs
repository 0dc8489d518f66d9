//! Linear quantile regression by a primal–dual interior point method.
//!
//! The pinball problem `min Σ ρ_τ(y_t − x_t′β)` is solved through its dual
//! `max y′a  s.t.  X′a = (1 − τ) X′1,  0 ≤ a ≤ 1`, written as the bounded LP
//! `min c′a, A a = b, 0 ≤ a ≤ u` with `A = X′`, `c = −y`. The Lagrange
//! multiplier of the equality constraint is `−β`. Newton directions use the
//! Mehrotra predictor–corrector.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{norm_ppf, quantile};

/// Default quantile grid.
pub const TAU_GRID: [f64; 9] = [0.01, 0.05, 0.10, 0.33, 0.50, 0.66, 0.90, 0.95, 0.99];

/// Relative duality-gap tolerance.
pub const GAP_TOL: f64 = 1e-8;
const STEP_FRACTION: f64 = 0.9995;
const MAX_ITER: usize = 200;

/// Pinball loss `u (τ − 1{u < 0})`.
pub fn rho(tau: f64, u: f64) -> f64 {
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

pub fn objective(tau: f64, resid: &[f64]) -> f64 {
    resid.iter().map(|&u| rho(tau, u)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Start {
    /// Dual start `a = (1 − τ) 1`.
    #[default]
    Uniform,
    /// `(1 − τ) 1` moved along a fixed direction in the null space of `X′`.
    NullSpace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RqSolution {
    pub coef: DVector<f64>,
    pub resid: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Whether the coefficients were snapped to an exact vertex.
    pub vertex: bool,
}

/// Solves the pinball problem for a full design `x` (no intercept added).
pub fn rq_fit(x: &DMatrix<f64>, y: &[f64], tau: f64, start: Start) -> Result<RqSolution> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Dimension(format!("y has {} rows, X has {n}", y.len())));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidInput(format!("tau = {tau} outside (0, 1)")));
    }
    if n <= p {
        return Err(Error::InvalidInput(format!("need more than {p} observations, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("quantile regression input".into()));
    }
    check_rank(x)?;
    let yv = DVector::from_column_slice(y);
    let a = x.transpose();
    let b = &a * DVector::from_element(n, 1.0 - tau);
    let c = -&yv;

    let mut xp = match start {
        Start::Uniform => DVector::from_element(n, 1.0 - tau),
        Start::NullSpace => null_space_start(x, tau)?,
    };
    let mut s = DVector::from_element(n, 1.0) - &xp;
    let xtx = &a * x;
    let chol = nalgebra::Cholesky::new(xtx).ok_or_else(|| Error::Singular("collinear design".into()))?;
    let mut yd = chol.solve(&(&a * &c));
    let r = &c - a.transpose() * &yd;
    let shift = (r.abs().mean() * 1e-3).max(1e-12);
    let mut z = r.map(|v| v.max(0.0) + shift);
    let mut w = r.map(|v| (-v).max(0.0) + shift);

    let scale = y.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    let mut iterations = 0;
    loop {
        let gap = xp.dot(&z) + s.dot(&w);
        if gap < GAP_TOL * scale {
            break;
        }
        if iterations >= MAX_ITER {
            return Err(Error::NonFinite(format!(
                "interior point did not converge in {MAX_ITER} iterations (gap {gap:.3e})"
            )));
        }
        iterations += 1;
        let rp = &b - &a * &xp;
        let rd = &c - a.transpose() * &yd - &z + &w;
        let q = DVector::from_fn(n, |i, _| 1.0 / (z[i] / xp[i] + w[i] / s[i]));
        let mut aqa = DMatrix::zeros(p, p);
        for i in 0..n {
            let col = a.column(i);
            aqa.ger(q[i], &col, &col, 1.0);
        }
        let m = nalgebra::Cholesky::new(aqa)
            .ok_or_else(|| Error::Singular("normal equations lost definiteness".into()))?;
        let solve = |rxz: &DVector<f64>, rsw: &DVector<f64>| {
            let v = DVector::from_fn(n, |i, _| rd[i] - rxz[i] / xp[i] + rsw[i] / s[i]);
            let qv = q.component_mul(&v);
            let dy = m.solve(&(&rp + &a * &qv));
            let dx = q.component_mul(&(a.transpose() * &dy - &v));
            let ds = -&dx;
            let dz = DVector::from_fn(n, |i, _| (rxz[i] - z[i] * dx[i]) / xp[i]);
            let dw = DVector::from_fn(n, |i, _| (rsw[i] - w[i] * ds[i]) / s[i]);
            (dx, ds, dy, dz, dw)
        };
        let rxz = -xp.component_mul(&z);
        let rsw = -s.component_mul(&w);
        let (dx, ds, _, dz, dw) = solve(&rxz, &rsw);
        let ap = max_step(&xp, &dx).min(max_step(&s, &ds)).min(1.0);
        let ad = max_step(&z, &dz).min(max_step(&w, &dw)).min(1.0);
        let mu = gap / (2 * n) as f64;
        let mu_aff = ((&xp + ap * &dx).dot(&(&z + ad * &dz)) + (&s + ap * &ds).dot(&(&w + ad * &dw)))
            / (2 * n) as f64;
        let sigma = (mu_aff / mu).powi(3).min(1.0);
        let target = sigma * mu;
        let rxz = DVector::from_fn(n, |i, _| rxz[i] - dx[i] * dz[i] + target);
        let rsw = DVector::from_fn(n, |i, _| rsw[i] - ds[i] * dw[i] + target);
        let (dx, ds, dy, dz, dw) = solve(&rxz, &rsw);
        let ap = (STEP_FRACTION * max_step(&xp, &dx).min(max_step(&s, &ds))).min(1.0);
        let ad = (STEP_FRACTION * max_step(&z, &dz).min(max_step(&w, &dw))).min(1.0);
        xp += ap * &dx;
        s += ap * &ds;
        yd += ad * &dy;
        z += ad * &dz;
        w += ad * &dw;
        if [&xp, &s, &yd, &z, &w].iter().any(|v| v.iter().any(|e| !e.is_finite())) {
            return Err(Error::NonFinite("interior point iterate".into()));
        }
    }
    let coef = -yd;
    let resid: Vec<f64> = (&yv - x * &coef).iter().copied().collect();
    let obj = objective(tau, &resid);
    let mut sol = RqSolution { coef, resid, objective: obj, iterations, vertex: false };
    if let Some(v) = polish(x, &yv, tau, &sol) {
        sol = v;
    }
    Ok(sol)
}

/// Largest `α ≤ ∞` keeping `v + α dv ≥ 0`.
fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

fn check_rank(x: &DMatrix<f64>) -> Result<()> {
    let p = x.ncols();
    let scale: Vec<f64> = (0..p).map(|j| x.column(j).norm()).collect();
    if scale.iter().any(|s| *s == 0.0) {
        return Err(Error::Singular("design has a zero column".into()));
    }
    let xs = DMatrix::from_fn(x.nrows(), p, |i, j| x[(i, j)] / scale[j]);
    let sv = xs.singular_values();
    let max = sv.max();
    if sv.min() <= 1e-10 * max {
        return Err(Error::Singular("design columns are collinear".into()));
    }
    Ok(())
}

/// Feasible interior dual start away from the uniform point.
fn null_space_start(x: &DMatrix<f64>, tau: f64) -> Result<DVector<f64>> {
    let n = x.nrows();
    let dir = DVector::from_fn(n, |i, _| ((i as f64 + 1.0) * 0.754_877_666).fract() - 0.5);
    let xtx = x.transpose() * x;
    let chol = nalgebra::Cholesky::new(xtx).ok_or_else(|| Error::Singular("collinear design".into()))?;
    let proj = x * chol.solve(&(x.transpose() * &dir));
    let d = dir - proj;
    let amax = d.amax();
    let room = 0.5 * tau.min(1.0 - tau);
    let base = DVector::from_element(n, 1.0 - tau);
    if amax == 0.0 {
        return Ok(base);
    }
    Ok(base + d * (room / amax))
}

/// Snaps an interior solution to the vertex through the `p` observations with
/// the smallest absolute residuals, if that vertex is at least as good.
fn polish(x: &DMatrix<f64>, y: &DVector<f64>, tau: f64, sol: &RqSolution) -> Option<RqSolution> {
    let (n, p) = x.shape();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        sol.resid[i]
            .abs()
            .total_cmp(&sol.resid[j].abs())
            .then(sol.resid[i].total_cmp(&sol.resid[j]))
    });
    let mut basis: Vec<usize> = Vec::with_capacity(p);
    for &i in order.iter().take(4 * p + 8) {
        let mut trial = basis.clone();
        trial.push(i);
        let sub = DMatrix::from_fn(trial.len(), p, |r, c| x[(trial[r], c)]);
        let sv = sub.singular_values();
        if sv.min() > 1e-9 * sv.max() {
            basis = trial;
        }
        if basis.len() == p {
            break;
        }
    }
    if basis.len() < p {
        return None;
    }
    let xh = DMatrix::from_fn(p, p, |r, c| x[(basis[r], c)]);
    let yh = DVector::from_fn(p, |r, _| y[basis[r]]);
    let coef = xh.lu().solve(&yh)?;
    let resid: Vec<f64> = (y - x * &coef).iter().copied().collect();
    let obj = objective(tau, &resid);
    let slack = 1e-12 * sol.objective.abs().max(1.0);
    (obj <= sol.objective + slack).then_some(RqSolution {
        coef,
        resid,
        objective: obj,
        iterations: sol.iterations,
        vertex: true,
    })
}

/// Intercept-only objective `Ṽ(τ)`, attained at the type-1 sample quantile.
pub fn intercept_only(y: &[f64], tau: f64) -> (f64, f64) {
    let q = quantile(y, tau);
    let v = y.iter().map(|v| rho(tau, v - q)).sum();
    (q, v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileFit {
    pub tau: f64,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub v_hat: f64,
    pub v_tilde: f64,
    pub r1: f64,
    pub lt_stat: f64,
    pub p_value: f64,
    pub sparsity: f64,
    pub n: usize,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

/// Fits `y_t = α + β′x_t` at level `τ` and tests `β = 0`.
pub fn quantile_fit(y: &[f64], x: &DMatrix<f64>, tau: f64) -> Result<QuantileFit> {
    quantile_fit_with(y, x, tau, Start::Uniform)
}

pub fn quantile_fit_with(y: &[f64], x: &DMatrix<f64>, tau: f64, start: Start) -> Result<QuantileFit> {
    let n = y.len();
    if x.nrows() != n {
        return Err(Error::Dimension(format!("y has {n} rows, X has {}", x.nrows())));
    }
    let p = x.ncols();
    if n <= p + 1 {
        return Err(Error::InvalidInput(format!("need more than {} observations", p + 1)));
    }
    let (_, v_tilde) = intercept_only(y, tau);
    let (alpha, beta, v_hat, residuals) = if p == 0 {
        let (q, v) = intercept_only(y, tau);
        (q, Vec::new(), v, y.iter().map(|v| v - q).collect())
    } else {
        let mut xd = DMatrix::from_element(n, p + 1, 1.0);
        xd.columns_mut(1, p).copy_from(x);
        let sol = rq_fit(&xd, y, tau, start)?;
        // The restricted optimum is feasible for the full problem.
        let v = sol.objective.min(v_tilde);
        (sol.coef[0], sol.coef.iter().skip(1).copied().collect(), v, sol.resid)
    };
    let sparsity = sparsity(&residuals, tau)?;
    let (lt_stat, p_value) = lt_test(v_tilde, v_hat, tau, p, sparsity)?;
    let r1 = if v_tilde > 0.0 { (1.0 - v_hat / v_tilde).clamp(0.0, 1.0) } else { 0.0 };
    Ok(QuantileFit { tau, alpha, beta, v_hat, v_tilde, r1, lt_stat, p_value, sparsity, n, residuals })
}

/// Hall–Sheather bandwidth at 95% confidence.
pub fn hall_sheather(n: usize, tau: f64) -> f64 {
    let z = norm_ppf(0.975);
    let x = norm_ppf(tau);
    let f = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (n as f64).powf(-1.0 / 3.0) * z.powf(2.0 / 3.0) * (1.5 * f * f / (2.0 * x * x + 1.0)).powf(1.0 / 3.0)
}

/// `s(τ) = (F̂⁻¹(τ + h) − F̂⁻¹(τ − h)) / 2h` from residual quantiles.
pub fn sparsity(resid: &[f64], tau: f64) -> Result<f64> {
    let n = resid.len();
    let h = hall_sheather(n, tau)
        .min(tau - 0.5 / n as f64)
        .min(1.0 - tau - 0.5 / n as f64);
    if h <= 0.0 {
        return Err(Error::InvalidInput(format!("sample too small for sparsity at tau = {tau}")));
    }
    let s = (quantile(resid, tau + h) - quantile(resid, tau - h)) / (2.0 * h);
    if !(s > 0.0) {
        return Err(Error::InvalidInput(format!("sparsity estimate {s} is not positive")));
    }
    Ok(s)
}

/// `L_T = 2(Ṽ − V̂) / (τ(1 − τ) s)` with its χ²_df p-value.
pub fn lt_test(v_restricted: f64, v_full: f64, tau: f64, df: usize, sparsity: f64) -> Result<(f64, f64)> {
    if !(sparsity > 0.0) {
        return Err(Error::InvalidInput(format!("sparsity {sparsity} is not positive")));
    }
    let scale = v_restricted.abs().max(1.0);
    if v_full > v_restricted + 1e-9 * scale {
        return Err(Error::InvalidInput(format!(
            "restricted objective {v_restricted} below unrestricted {v_full}"
        )));
    }
    let stat = (2.0 * (v_restricted - v_full) / (tau * (1.0 - tau) * sparsity)).max(0.0);
    if df == 0 {
        return Ok((stat, 1.0));
    }
    Ok((stat, crate::stats::chi2_sf(stat, df)?))
}

/// Sparsity `1/φ(Φ⁻¹(τ))` of N(0,1), for oracles and simulations.
pub fn normal_sparsity(tau: f64) -> f64 {
    let x = norm_ppf(tau);
    (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinball_values() {
        assert!((rho(0.1, -1.0) - 0.9).abs() < 1e-15);
        assert!((rho(0.5, 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn median_of_odd_sample() {
        let y = [3.0, -1.0, 7.0, 2.0, 10.0, 0.5, 4.0];
        let x = DMatrix::from_element(7, 1, 1.0);
        let sol = rq_fit(&x, &y, 0.5, Start::Uniform).unwrap();
        assert!((sol.coef[0] - 3.0).abs() < 1e-9);
        let expect: f64 = y.iter().map(|v| (v - 3.0).abs()).sum::<f64>() / 2.0;
        assert!((sol.objective - expect).abs() < 1e-9);
    }

    #[test]
    fn exact_line_is_interpolated() {
        let x = DMatrix::from_fn(20, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y: Vec<f64> = (0..20).map(|i| 1.0 + 0.5 * i as f64).collect();
        let sol = rq_fit(&x, &y, 0.3, Start::Uniform).unwrap();
        assert!((sol.coef[0] - 1.0).abs() < 1e-8 && (sol.coef[1] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn collinear_design_is_refused() {
        let x = DMatrix::from_fn(20, 2, |i, j| (i as f64) * (j + 1) as f64);
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert!(matches!(quantile_fit(&y, &x, 0.5), Err(Error::Singular(_))));
    }

    #[test]
    fn lt_degenerate() {
        let (l, p) = lt_test(3.0, 3.0, 0.5, 2, 1.0).unwrap();
        assert_eq!(l, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
        assert!(lt_test(3.0, 3.0, 0.5, 2, 0.0).is_err());
    }

    #[test]
    fn hall_sheather_median() {
        let h = hall_sheather(1000, 0.5);
        assert!((h - 0.0971).abs() < 1e-3, "{h}");
    }
}

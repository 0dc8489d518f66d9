//! Brute-force reference for the filter and smoother: build the joint
//! Gaussian of (x_0, …, x_T, S_1, …, S_T) from the system matrices and
//! condition on observation prefixes directly.

#![allow(dead_code)]

use mlss_core::StateSpaceSpec;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub struct Joint {
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

pub struct OracleMoments {
    pub pred_mean: Vec<DVector<f64>>,
    pub pred_cov: Vec<DMatrix<f64>>,
    pub filt_mean: Vec<DVector<f64>>,
    pub filt_cov: Vec<DMatrix<f64>>,
    /// index 0 is t = 0
    pub smooth_mean: Vec<DVector<f64>>,
    pub smooth_cov: Vec<DMatrix<f64>>,
    /// `lag_cov[t-1] = Cov(x_t, x_{t-1} | S_1..S_T)`
    pub lag_cov: Vec<DMatrix<f64>>,
    pub loglik: f64,
}

impl Joint {
    pub fn new(spec: &StateSpaceSpec, t_len: usize) -> Self {
        let n = spec.state_dim();
        let k = spec.n_series;
        let dim = n * (t_len + 1) + k * t_len;
        let phi = &spec.phi_tilde;
        let h = &spec.lambda_tilde;

        let mut state_means = vec![spec.a.clone()];
        let mut state_vars = vec![spec.sigma0.clone()];
        for t in 1..=t_len {
            state_means.push(phi * &state_means[t - 1]);
            state_vars.push(phi * &state_vars[t - 1] * phi.transpose() + &spec.q_tilde);
        }
        // Cov(x_t, x_s) = Φ^{t-s} V_s for t >= s
        let state_cov = |t: usize, s: usize| -> DMatrix<f64> {
            if t >= s {
                phi.pow((t - s) as u32) * &state_vars[s]
            } else {
                (phi.pow((s - t) as u32) * &state_vars[t]).transpose()
            }
        };

        let mut mean = DVector::zeros(dim);
        let mut cov = DMatrix::zeros(dim, dim);
        let xs = |t: usize| t * n;
        let ys = |t: usize| n * (t_len + 1) + (t - 1) * k;
        for t in 0..=t_len {
            mean.rows_mut(xs(t), n).copy_from(&state_means[t]);
            for s in 0..=t_len {
                cov.view_mut((xs(t), xs(s)), (n, n)).copy_from(&state_cov(t, s));
            }
        }
        for t in 1..=t_len {
            mean.rows_mut(ys(t), k).copy_from(&(h * &state_means[t]));
            for s in 0..=t_len {
                let c = h * state_cov(t, s);
                cov.view_mut((ys(t), xs(s)), (k, n)).copy_from(&c);
                cov.view_mut((xs(s), ys(t)), (n, k)).copy_from(&c.transpose());
            }
            for s in 1..=t_len {
                let mut c = h * state_cov(t, s) * h.transpose();
                if s == t {
                    c += &spec.r;
                }
                cov.view_mut((ys(t), ys(s)), (k, k)).copy_from(&c);
            }
        }
        Joint { n, k, t: t_len, mean, cov }
    }

    fn x_idx(&self, t: usize) -> Vec<usize> {
        (t * self.n..(t + 1) * self.n).collect()
    }

    fn y_idx(&self, upto: usize) -> Vec<usize> {
        let base = self.n * (self.t + 1);
        (base..base + upto * self.k).collect()
    }

    fn sub(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.cov[(rows[i], cols[j])])
    }

    fn subv(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
        DVector::from_fn(idx.len(), |i, _| v[idx[i]])
    }

    /// Mean of `a` and covariance between `a` and `b` given the first `upto`
    /// observations.
    fn condition(
        &self,
        a: &[usize],
        b: &[usize],
        upto: usize,
        obs: &DVector<f64>,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let y = self.y_idx(upto);
        let ma = Self::subv(&self.mean, a);
        let cab = self.sub(a, b);
        if y.is_empty() {
            return (ma, cab);
        }
        let syy = self.sub(&y, &y);
        let inv = syy.clone().try_inverse().expect("observation covariance invertible");
        let say = self.sub(a, &y);
        let sby = self.sub(b, &y);
        let my = Self::subv(&self.mean, &y);
        let yobs = obs.rows(0, upto * self.k).into_owned();
        let m = ma + &say * &inv * (yobs - my);
        let c = cab - &say * &inv * sby.transpose();
        (m, c)
    }

    pub fn moments(&self, panel: &DMatrix<f64>) -> OracleMoments {
        let obs = DVector::from_iterator(
            self.t * self.k,
            (0..self.t).flat_map(|t| (0..self.k).map(move |j| panel[(t, j)])),
        );
        let mut out = OracleMoments {
            pred_mean: vec![],
            pred_cov: vec![],
            filt_mean: vec![],
            filt_cov: vec![],
            smooth_mean: vec![],
            smooth_cov: vec![],
            lag_cov: vec![],
            loglik: 0.0,
        };
        for t in 1..=self.t {
            let x = self.x_idx(t);
            let (m, c) = self.condition(&x, &x, t - 1, &obs);
            out.pred_mean.push(m);
            out.pred_cov.push(c);
            let (m, c) = self.condition(&x, &x, t, &obs);
            out.filt_mean.push(m);
            out.filt_cov.push(c);
        }
        for t in 0..=self.t {
            let x = self.x_idx(t);
            let (m, c) = self.condition(&x, &x, self.t, &obs);
            out.smooth_mean.push(m);
            out.smooth_cov.push(c);
            if t >= 1 {
                let (_, c) = self.condition(&x, &self.x_idx(t - 1), self.t, &obs);
                out.lag_cov.push(c);
            }
        }
        let y = self.y_idx(self.t);
        let syy = self.sub(&y, &y);
        let d = obs - Self::subv(&self.mean, &y);
        let chol = syy.cholesky().expect("observation covariance PD");
        let logdet: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let quad = d.dot(&chol.solve(&d));
        out.loglik =
            -0.5 * (y.len() as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + quad);
        out
    }
}

fn random_psd<R: Rng>(rng: &mut R, n: usize, ridge: f64) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() * 0.5 + DMatrix::identity(n, n) * ridge
}

/// Random general (not MLSS-structured) system with PD covariances.
pub fn random_spec<R: Rng>(rng: &mut R, q: usize, k: usize) -> StateSpaceSpec {
    let n = q + k;
    let lambda_tilde = DMatrix::from_fn(k, n, |_, _| rng.random_range(-1.0..1.0));
    let phi_tilde = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
    let q_tilde = random_psd(rng, n, 0.2);
    let r = DMatrix::from_diagonal(&DVector::from_fn(k, |_, _| rng.random_range(0.2..1.5)));
    let a = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let sigma0 = random_psd(rng, n, 0.3);
    StateSpaceSpec::new(lambda_tilde, phi_tilde, q_tilde, r, a, sigma0, q).unwrap()
}

/// Random MLSS-structured system (diagonal Φ, identified Λ, Q_long = I).
pub fn random_mlss_spec<R: Rng>(rng: &mut R, q: usize, k: usize) -> StateSpaceSpec {
    let lambda = DMatrix::from_fn(k, q, |i, j| if j > i { 0.0 } else { rng.random_range(-1.0..1.0) });
    let phi: Vec<f64> = (0..k).map(|_| rng.random_range(-0.9..0.9)).collect();
    let qs = random_psd(rng, k, 0.2);
    let r: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.5)).collect();
    let mut spec = StateSpaceSpec::mlss(&lambda, &phi, &qs, &r).unwrap();
    spec.sigma0 = DMatrix::identity(q + k, q + k) * rng.random_range(0.5..3.0);
    spec
}

pub fn random_panel<R: Rng>(rng: &mut R, t: usize, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(t, k, |_, _| rng.random_range(-2.0..2.0))
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

pub fn max_abs_diff_v(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

/// Largest discrepancy between the recursions and the oracle across every
/// filter/smoother moment and the log-likelihood.
pub fn compare(spec: &StateSpaceSpec, panel: &DMatrix<f64>) -> f64 {
    let f = mlss_core::kalman_filter(spec, panel).unwrap();
    let s = mlss_core::kalman_smoother(spec, &f).unwrap();
    let o = Joint::new(spec, panel.nrows()).moments(panel);
    let mut worst: f64 = (f.loglik - o.loglik).abs();
    for t in 0..panel.nrows() {
        worst = worst
            .max(max_abs_diff_v(&f.pred_mean[t], &o.pred_mean[t]))
            .max(max_abs_diff(&f.pred_cov[t], &o.pred_cov[t]))
            .max(max_abs_diff_v(&f.filt_mean[t], &o.filt_mean[t]))
            .max(max_abs_diff(&f.filt_cov[t], &o.filt_cov[t]))
            .max(max_abs_diff_v(&s.smooth_mean[t], &o.smooth_mean[t + 1]))
            .max(max_abs_diff(&s.smooth_cov[t], &o.smooth_cov[t + 1]))
            .max(max_abs_diff(&s.lag_cov[t], &o.lag_cov[t]));
    }
    worst = worst
        .max(max_abs_diff_v(&s.init_mean, &o.smooth_mean[0]))
        .max(max_abs_diff(&s.init_cov, &o.smooth_cov[0]));
    worst
}

//! Shared fixtures for the criterion benchmarks.

use mlss_core::models::{demo_spec, simulate_mlss};
use mlss_core::rng::stream;
use mlss_core::{DMatrix, StateSpaceSpec};
use rand::Rng;

/// Demo MLSS system and a simulated `t × k` panel from it.
pub fn mlss_fixture(k: usize, q: usize, t: usize, seed: u64) -> (StateSpaceSpec, DMatrix<f64>) {
    let spec = demo_spec(k, q).unwrap();
    let (panel, _) = simulate_mlss(&spec, t, seed).unwrap();
    (spec, panel.values)
}

/// Random ±1 signal (starting flat) and a geometric random-walk price path.
pub fn trading_fixture(n: usize, seed: u64) -> (Vec<i8>, Vec<f64>) {
    let mut rng = stream(seed);
    let mut s = vec![0i8];
    s.extend((1..n).map(|_| if rng.random_bool(0.3) { -1 } else { 1 }));
    let mut m = vec![100.0];
    for _ in 1..n {
        let e: f64 = rng.random_range(-0.01..0.01);
        m.push(m.last().unwrap() * e.exp());
    }
    (s, m)
}

use criterion::{criterion_group, criterion_main, Criterion};
use mlss_core::analysis::quantile_fit;
use mlss_core::rng::stream;
use mlss_core::DMatrix;
use rand_distr::{Distribution, StandardNormal};

fn qr_fit(c: &mut Criterion) {
    let mut rng = stream(2);
    let n = 2000;
    let x = DMatrix::from_fn(n, 6, |_, _| StandardNormal.sample(&mut rng));
    let y: Vec<f64> = (0..n).map(|t| {
        let e: f64 = StandardNormal.sample(&mut rng);
        0.3 * x[(t, 0)] + e
    }).collect();
    for tau in [0.05, 0.5] {
        c.bench_function(&format!("quantile_fit n2000 p6 tau{tau}"), |b| b.iter(|| quantile_fit(&y, &x, tau).unwrap()));
    }
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = qr_fit
}
criterion_main!(benches);

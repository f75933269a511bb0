use criterion::{criterion_group, criterion_main, Criterion};
use evavos::learncore::Mlp;
use evavos::metrics::{default_tolerance, jf};
use evavos::propagation::{propagate, PropagationParams};
use evavos::rng::stream;
use evavos::selection::select_farthest;
use evavos_bench::fixture;
use rand::Rng;
use std::hint::black_box;

fn metrics(c: &mut Criterion) {
    let f = fixture(1);
    let tol = default_tolerance(64, 64);
    c.bench_function("jf_64x64", |b| b.iter(|| jf(black_box(&f.preds[30]), black_box(&f.video.gt[0][30]), tol).unwrap()));
}

fn propagation(c: &mut Criterion) {
    let f = fixture(2);
    let params = PropagationParams::default();
    c.bench_function("propagate_60_frames", |b| b.iter(|| propagate(black_box(&f.video), 0, &f.k, &params, 3).unwrap()));
}

fn selection(c: &mut Criterion) {
    let mut rng = stream(4, &[]);
    let emb: Vec<Vec<f64>> = (0..60).map(|_| (0..32).map(|_| rng.random::<f64>()).collect()).collect();
    let annotated = [0, 12, 25, 40, 55];
    c.bench_function("select_farthest_60x32", |b| b.iter(|| select_farthest(black_box(&emb), &annotated).unwrap()));
}

fn mlp(c: &mut Criterion) {
    let net = Mlp::new(&[23, 64, 4], 1.0, &mut stream(5, &[])).unwrap();
    let x: Vec<f64> = (0..23).map(|i| i as f64 / 23.0).collect();
    c.bench_function("mlp_forward_23_64_4", |b| b.iter(|| net.forward(black_box(&x)).unwrap()));
}

criterion_group!(benches, metrics, propagation, selection, mlp);
criterion_main!(benches);

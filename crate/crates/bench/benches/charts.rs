use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use wwsurv_core::count_model::{fit_ingarch_qcml, ingarch_simulate, IngarchParams, IngarchSpec};
use wwsurv_core::spm::{cusum_run, pcc_run, CusumConfig, NigPrior, PccConfig};

fn pseudo_normal(n: usize) -> Vec<f64> {
    // cheap deterministic stand-in; the charts' cost does not depend on the values
    (0..n).map(|i| ((i as f64 * 0.618_034).fract() - 0.5) * 3.0).collect()
}

fn charts(c: &mut Criterion) {
    let x = pseudo_normal(100_000);
    let cusum = CusumConfig::new(0.0, 1.0).unwrap();
    c.bench_function("cusum_100k", |b| b.iter(|| cusum_run(black_box(&x), &cusum).unwrap()));
    let pcc = PccConfig::new(NigPrior::new(0.0, 1.0, 2.0, 1.0).unwrap(), 1.0 / 564.0).unwrap();
    let short = &x[..10_000];
    c.bench_function("pcc_10k", |b| b.iter(|| pcc_run(black_box(short), &pcc).unwrap()));
}

fn count_model(c: &mut Criterion) {
    let spec = IngarchSpec::new(vec![1], vec![1]).unwrap();
    let truth = IngarchParams {
        intercept: 5.0,
        obs_coeffs: vec![0.4],
        mean_coeffs: vec![0.3],
    };
    let y = ingarch_simulate(&spec, &truth, 10.0, 3000, 1).unwrap();
    let mut g = c.benchmark_group("ingarch");
    g.sample_size(20);
    g.bench_function("qcml_fit_3000", |b| {
        b.iter(|| fit_ingarch_qcml(black_box(&y), &spec).unwrap())
    });
    g.finish();
}

criterion_group!(benches, charts, count_model);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use cmi_core::engine::bootstrap_draws;
use cmi_core::mc::{gen_sample, study_config, Case, Noise, Scenario};
use cmi_core::rng::{stream, Stage};
use cmi_core::smoother::{default_bn, estimate_sigma};
use cmi_core::{AdaptiveTest, Method, Sample};

fn sample(n: usize) -> Sample {
    let scenario = Scenario::new(Case::Peak, Noise::NORMAL, n);
    gen_sample(&scenario, &mut stream(1, Stage::Data, 0)).unwrap()
}

fn covariance(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimate_sigma");
    for n in [250, 500, 1000] {
        let s = sample(n);
        let b_n = default_bn(&s, 1.0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| {
            b.iter(|| estimate_sigma(black_box(s), b_n).unwrap())
        });
    }
    group.finish();
}

fn bootstrap(c: &mut Criterion) {
    let mut group = c.benchmark_group("bootstrap_draws");
    for n in [250, 500] {
        let s = sample(n);
        let test = AdaptiveTest::new(study_config(n, 500)).unwrap();
        let prepared = test.prepare(&s).unwrap();
        let full = prepared.plan.full_set();
        group.bench_with_input(BenchmarkId::new("B=500", n), &full, |b, full| {
            b.iter(|| bootstrap_draws(&prepared.plan, black_box(full), 7, Stage::Pia, 500))
        });
    }
    group.finish();
}

fn full_test(c: &mut Criterion) {
    let mut group = c.benchmark_group("full_test");
    group.sample_size(20);
    for n in [250, 500] {
        let s = sample(n);
        let test = AdaptiveTest::new(study_config(n, 500)).unwrap();
        group.bench_with_input(BenchmarkId::new("pia+rms", n), &s, |b, s| {
            b.iter(|| test.run_methods(black_box(s), &[Method::Pia, Method::Rms]).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, covariance, bootstrap, full_test);
criterion_main!(benches);

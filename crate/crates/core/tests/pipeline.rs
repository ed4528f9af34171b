use cmi_core::mc::{gen_sample, Case, Noise, Scenario};
use cmi_core::rng::{stream, Stage};
use cmi_core::{AdaptiveTest, DesignMatrix, Kernel, Method, Sample, TestConfig};
use rand::Rng;
use rand_distr::StandardNormal;

fn planar_sample(n: usize, shift: f64, seed: u64) -> Sample {
    let mut rng = stream(seed, Stage::Data, 0);
    let points: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut y = Vec::with_capacity(2 * n);
    for j in 0..n {
        let (a, b) = (points[2 * j], points[2 * j + 1]);
        let bump = (0.5 - (a * a + b * b).sqrt()).max(0.0);
        y.push(shift * bump - 0.05 + 0.1 * rng.sample::<f64, _>(StandardNormal));
        y.push(-0.1 + 0.1 * rng.sample::<f64, _>(StandardNormal));
    }
    Sample::new(DesignMatrix::new(2, points).unwrap(), 2, y).unwrap()
}

#[test]
fn two_dimensional_design_with_two_moments() {
    let sample = planar_sample(300, 2.0, 1);
    let cfg = TestConfig { alpha: 0.1, bootstrap_draws: 300, seed: 3, ..Default::default() };
    let results = AdaptiveTest::new(cfg).unwrap().run_methods(&sample, &[Method::Pia, Method::Rms]).unwrap();
    let (pia, rms) = (&results[0], &results[1]);
    assert_eq!(pia.resolved.d, 2);
    assert_eq!(pia.resolved.p, 2);
    assert_eq!(pia.per_triple.len(), pia.resolved.index_set_size);
    assert!(pia.per_triple.iter().any(|t| t.m == 1));
    assert_eq!(pia.statistic, rms.statistic);

    // The moment with the bump drives the statistic, and RMS keeps a strict
    // subset of the index set.
    assert_eq!(pia.per_triple[pia.argmax].m, 0);
    let kept = rms.s_rms.as_ref().unwrap();
    assert!(!kept.is_empty() && kept.len() < rms.resolved.index_set_size);
    assert!(kept.iter().all(|t| rms.per_triple.iter().any(|e| e.triple() == *t)));
    assert!(pia.reject && rms.reject);
}

#[test]
fn every_kernel_runs_end_to_end() {
    let scenario = Scenario::new(Case::Peak, Noise::NORMAL, 200);
    let sample = gen_sample(&scenario, &mut stream(5, Stage::Data, 0)).unwrap();
    for kernel in Kernel::ALL {
        let cfg = TestConfig { kernel, bootstrap_draws: 200, ..Default::default() };
        let r = AdaptiveTest::new(cfg).unwrap().run(&sample).unwrap();
        assert!(r.statistic.is_finite() && r.critical_value.is_finite(), "{kernel:?}");
        assert!(r.per_triple.iter().all(|t| t.vhat > 0.0));
    }
}

#[test]
fn randomized_test_reports_cutoff_and_diagnostic() {
    let scenario = Scenario::new(Case::Binding, Noise::MIXTURE, 150);
    let sample = gen_sample(&scenario, &mut stream(8, Stage::Data, 0)).unwrap();
    let cfg = TestConfig { beta: 0.25, bootstrap_draws: 200, seed: 2, ..Default::default() };
    let r = AdaptiveTest::new(cfg).unwrap().run(&sample).unwrap();
    let t = r.t_quantile.unwrap();
    let u = r.u_draw.unwrap();
    assert!((0.0..1.0).contains(&u));
    assert!(t >= r.critical_value && t <= r.critical_value + 0.25);
    assert_eq!(r.reject, r.statistic > t);
    let delta = r.diagnostics.delta.unwrap();
    assert!(delta.delta > 0.0 && delta.guarantee_ratio > 0.0);
}

#[test]
fn deterministic_test_has_no_randomization_fields() {
    let scenario = Scenario::new(Case::Flat, Noise::NORMAL, 120);
    let sample = gen_sample(&scenario, &mut stream(9, Stage::Data, 0)).unwrap();
    let cfg = TestConfig { bootstrap_draws: 200, method: Method::Pia, ..Default::default() };
    let r = AdaptiveTest::new(cfg).unwrap().run(&sample).unwrap();
    assert!(r.t_quantile.is_none() && r.u_draw.is_none() && r.diagnostics.delta.is_none());
    assert!(r.s_rms.is_none() && r.c_pregamma.is_none());
    assert_eq!(r.critical_level, 0.95);
    assert_eq!(r.reject, r.statistic > r.critical_value);
}

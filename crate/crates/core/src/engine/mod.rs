//! The adaptive test: statistic, critical values, and decision.
//!
//! [`AdaptiveTest::run`] chains the pieces: covariance estimation, the
//! bandwidth grid and index set, the studentized statistic, the bootstrap
//! critical value for the chosen method, and the (optionally randomized)
//! decision.

pub mod bootstrap;
pub mod diagnostic;
pub mod testfn;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::design::{build_grid, build_index_set, default_h_max, default_h_min, BandwidthGrid, IndexSet, Triple};
use crate::error::{Error, Result};
use crate::rng::{stream, Stage};
use crate::smoother::{default_bn, estimate_sigma, CovEstimates, Kernel, Sample};

pub use bootstrap::{
    bootstrap_draws, pia_critical, rms_critical, rms_select, simulate_t, solve_c, BootstrapPlan, RmsCritical, Smoothed,
    TripleEstimate,
};
pub use diagnostic::{delta_diagnostic, DeltaDiagnostic};
pub use testfn::{g0, g0_inverse, test_function};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Plug-in asymptotics: every triple treated as binding.
    Pia,
    /// Refined moment selection: slack triples dropped after a pretest.
    Rms,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pia => "pia",
            Method::Rms => "rms",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pia" | "plugin" => Ok(Method::Pia),
            "rms" => Ok(Method::Rms),
            _ => Err(Error::InvalidConfig(format!("unknown method '{s}'"))),
        }
    }
}

/// Tuning parameters. `None` fields are filled in from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    pub alpha: f64,
    /// RMS pretest level; defaults to `0.1 / ln n`.
    pub gamma: Option<f64>,
    /// Randomization width; 0 gives the deterministic test.
    pub beta: f64,
    #[serde(rename = "B")]
    pub bootstrap_draws: usize,
    pub seed: u64,
    /// Grid ratio.
    pub a: f64,
    /// Defaults to half the design diameter.
    pub h_max: Option<f64>,
    /// Defaults to the radius holding `k_min` points on average.
    pub h_min: Option<f64>,
    /// Defaults to 15 up to n = 250, rising linearly to 20 at n = 500.
    pub k_min: Option<usize>,
    /// Test points at one bandwidth are more than `separation_factor · h`
    /// apart.
    pub separation_factor: f64,
    pub kernel: Kernel,
    /// Scale of the covariance-estimation window.
    pub c_b: f64,
    pub method: Method,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            gamma: None,
            beta: 0.0,
            bootstrap_draws: 1000,
            seed: 0,
            a: 0.8,
            h_max: None,
            h_min: None,
            k_min: None,
            separation_factor: 2.0,
            kernel: Kernel::Biweight,
            c_b: 1.0,
            method: Method::Rms,
        }
    }
}

/// Minimum number of bootstrap draws accepted.
pub const MIN_BOOTSTRAP_DRAWS: usize = 100;

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be a nonnegative number, got {}", self.beta));
        }
        if self.bootstrap_draws < MIN_BOOTSTRAP_DRAWS {
            return bad(format!("B must be at least {MIN_BOOTSTRAP_DRAWS}, got {}", self.bootstrap_draws));
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return bad(format!("a must lie in (0, 1), got {}", self.a));
        }
        if !(self.separation_factor > 0.0 && self.separation_factor.is_finite()) {
            return bad(format!("separation factor must be positive, got {}", self.separation_factor));
        }
        if !(self.c_b > 0.0 && self.c_b.is_finite()) {
            return bad(format!("c_b must be positive, got {}", self.c_b));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g < self.alpha / 2.0) {
                return bad(format!("gamma must lie in (0, alpha/2), got {g}"));
            }
        }
        for (name, v) in [("h_max", self.h_max), ("h_min", self.h_min)] {
            if let Some(h) = v {
                if !(h > 0.0 && h.is_finite()) {
                    return bad(format!("{name} must be positive, got {h}"));
                }
            }
        }
        if self.k_min == Some(0) {
            return bad("k_min must be at least 1".into());
        }
        Ok(())
    }

    /// `0.1 / ln n`, pulled below `α/2` when that recommendation is too
    /// large for small samples.
    pub fn default_gamma(&self, n: usize) -> f64 {
        let g = 0.1 / (n as f64).ln();
        if g < self.alpha / 2.0 {
            g
        } else {
            self.alpha / 4.0
        }
    }
}

/// Average number of points inside the kernel support at `h_min`.
pub fn default_k_min(n: usize) -> usize {
    let k = if n <= 250 { 15 } else { 15 + ((n - 250) as f64 / 50.0).round() as usize };
    k.min(n)
}

/// Data-dependent values the run settled on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub n: usize,
    pub d: usize,
    pub p: usize,
    pub gamma: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub k_min: Option<usize>,
    pub b_n: f64,
    pub bandwidths: Vec<f64>,
    pub index_set_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Positions (in `per_triple`) whose variance was floored.
    pub degenerate_variance: Vec<usize>,
    /// Present only for the randomized test.
    pub delta: Option<DeltaDiagnostic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: Method,
    pub statistic: f64,
    /// Position in `per_triple` of the triple attaining the statistic.
    pub argmax: usize,
    /// Bootstrap critical value `c`.
    pub critical_value: f64,
    /// Level at which `c` was computed (`1-α` or `1-α+2γ`).
    pub critical_level: f64,
    /// RMS only: plug-in critical value at `1-γ`.
    pub c_pregamma: Option<f64>,
    /// Randomized test only.
    pub t_quantile: Option<f64>,
    /// Randomized test only.
    pub u_draw: Option<f64>,
    pub reject: bool,
    /// RMS only: the retained triples.
    pub s_rms: Option<Vec<Triple>>,
    pub per_triple: Vec<TripleEstimate>,
    pub resolved: Resolved,
    pub diagnostics: Diagnostics,
}

/// Largest studentized estimate over the index set.
#[derive(Debug, Clone)]
pub struct Statistic {
    pub value: f64,
    /// First position attaining the maximum in canonical order.
    pub argmax: usize,
    pub smoothed: Smoothed,
}

pub fn compute_statistic(sample: &Sample, index: &IndexSet, cov: &CovEstimates, kernel: Kernel) -> Result<Statistic> {
    if index.is_empty() {
        return Err(Error::InvalidInput("index set is empty".into()));
    }
    let smoothed = Smoothed::new(sample, index, cov, kernel);
    let (argmax, value) = smoothed
        .estimates
        .iter()
        .map(|e| e.studentized)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (s, v)| if v > best.1 { (s, v) } else { best });
    Ok(Statistic { value, argmax, smoothed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub reject: bool,
    pub t_quantile: Option<f64>,
    pub u_draw: Option<f64>,
}

/// Compares the statistic with the critical value.
///
/// For `beta > 0` a uniform `U` is drawn from the decision stream of
/// `seed` and the critical value is `t = c + β g₀⁻¹(U)`, so that
/// `g(T̂) ≥ U` exactly when `T̂ ≤ t`.
pub fn decide(statistic: f64, c: f64, beta: f64, seed: u64) -> Decision {
    if beta == 0.0 {
        return Decision { reject: statistic > c, t_quantile: None, u_draw: None };
    }
    let u: f64 = stream(seed, Stage::Decision, 0).random();
    decide_with_u(statistic, c, beta, u)
}

/// [`decide`] with an externally supplied uniform draw.
pub fn decide_with_u(statistic: f64, c: f64, beta: f64, u: f64) -> Decision {
    let t = c + beta * g0_inverse(u);
    Decision { reject: statistic > t, t_quantile: Some(t), u_draw: Some(u) }
}

/// Everything computed from the data before any bootstrap draw.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub grid: BandwidthGrid,
    pub index: IndexSet,
    pub cov: CovEstimates,
    pub statistic: Statistic,
    pub plan: BootstrapPlan,
    pub resolved: Resolved,
}

/// The configured test, ready to run on samples.
#[derive(Debug, Clone)]
pub struct AdaptiveTest {
    config: TestConfig,
}

impl AdaptiveTest {
    pub fn new(config: TestConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &TestConfig {
        &self.config
    }

    pub fn prepare(&self, sample: &Sample) -> Result<Prepared> {
        let cfg = &self.config;
        let x = sample.x();
        let n = sample.n();

        let h_max = match cfg.h_max {
            Some(h) => h,
            None => default_h_max(x)?,
        };
        let (h_min, k_min) = match cfg.h_min {
            Some(h) => (h, None),
            None => {
                // k_min counts points with nonzero kernel weight, which lie
                // within support_radius · h of the centre.
                let k = cfg.k_min.unwrap_or_else(|| default_k_min(n));
                let radius = default_h_min(x, k)? / cfg.kernel.support_radius();
                (radius.min(h_max), Some(k))
            }
        };
        let grid = build_grid(h_max, h_min, cfg.a)?;
        let index = build_index_set(&grid, x, sample.p(), cfg.separation_factor);

        let b_n = default_bn(sample, cfg.c_b)?;
        let cov = estimate_sigma(sample, b_n)?;
        let statistic = compute_statistic(sample, &index, &cov, cfg.kernel)?;
        let plan = BootstrapPlan::new(&statistic.smoothed, &cov)?;

        let gamma = cfg.gamma.unwrap_or_else(|| cfg.default_gamma(n));
        let resolved = Resolved {
            n,
            d: x.d(),
            p: sample.p(),
            gamma,
            h_max,
            h_min,
            k_min,
            b_n,
            bandwidths: grid.values().to_vec(),
            index_set_size: index.len(),
        };
        Ok(Prepared { grid, index, cov, statistic, plan, resolved })
    }

    /// Runs the configured method.
    pub fn run(&self, sample: &Sample) -> Result<TestResult> {
        let mut results = self.run_methods(sample, &[self.config.method])?;
        Ok(results.pop().expect("one method requested"))
    }

    /// Runs several methods on one sample, sharing the data-dependent work
    /// and the plug-in draws. Each result equals what [`AdaptiveTest::run`]
    /// would give for that method.
    pub fn run_methods(&self, sample: &Sample, methods: &[Method]) -> Result<Vec<TestResult>> {
        let prepared = self.prepare(sample)?;
        self.run_prepared(&prepared, methods)
    }

    pub fn run_prepared(&self, prepared: &Prepared, methods: &[Method]) -> Result<Vec<TestResult>> {
        let cfg = &self.config;
        let plan = &prepared.plan;
        let estimates = &prepared.statistic.smoothed.estimates;
        let statistic = prepared.statistic.value;

        let pia_draws = bootstrap_draws(plan, &plan.full_set(), cfg.seed, Stage::Pia, cfg.bootstrap_draws);
        let delta = if cfg.beta > 0.0 {
            Some(delta_diagnostic(
                &prepared.statistic.smoothed,
                &prepared.cov,
                prepared.resolved.p,
                cfg.beta,
                cfg.alpha,
            )?)
        } else {
            None
        };
        let diagnostics = Diagnostics {
            degenerate_variance: estimates.iter().enumerate().filter(|(_, e)| e.floored).map(|(s, _)| s).collect(),
            delta,
        };

        methods
            .iter()
            .map(|&method| {
                let (c, level, c_pregamma, s_rms) = match method {
                    Method::Pia => {
                        let level = 1.0 - cfg.alpha;
                        (solve_c(&pia_draws, cfg.beta, level)?, level, None, None)
                    }
                    Method::Rms => {
                        let gamma = prepared.resolved.gamma;
                        let rms = rms_critical(plan, estimates, &pia_draws, cfg.seed, cfg.beta, cfg.alpha, gamma)?;
                        let kept = rms.selected.iter().map(|&s| estimates[s].triple()).collect();
                        (rms.c, 1.0 - cfg.alpha + 2.0 * gamma, Some(rms.c_pregamma), Some(kept))
                    }
                };
                let decision = decide(statistic, c, cfg.beta, cfg.seed);
                Ok(TestResult {
                    method,
                    statistic,
                    argmax: prepared.statistic.argmax,
                    critical_value: c,
                    critical_level: level,
                    c_pregamma,
                    t_quantile: decision.t_quantile,
                    u_draw: decision.u_draw,
                    reject: decision.reject,
                    s_rms,
                    per_triple: estimates.clone(),
                    resolved: prepared.resolved.clone(),
                    diagnostics: diagnostics.clone(),
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::DesignMatrix;
    use crate::linalg::SymMatrix;
    use approx::assert_abs_diff_eq;

    fn line_sample(xs: Vec<f64>, ys: Vec<f64>) -> Sample {
        Sample::new(DesignMatrix::from_scalars(xs).unwrap(), 1, ys).unwrap()
    }

    #[test]
    fn statistic_of_zero_response_is_zero() {
        let s = line_sample((0..20).map(f64::from).collect(), vec![0.0; 20]);
        let grid = build_grid(10.0, 1.0, 0.5).unwrap();
        let index = build_index_set(&grid, s.x(), 1, 2.0);
        let cov = estimate_sigma(&s, 2.0).unwrap();
        let stat = compute_statistic(&s, &index, &cov, Kernel::Biweight).unwrap();
        assert_eq!(stat.value, 0.0);
        assert!(stat.smoothed.estimates.iter().all(|e| e.floored));
    }

    #[test]
    fn statistic_is_max_studentized_value() {
        // Two far-apart points, each its own window: values y / sqrt(Σ̂).
        let s = line_sample(vec![0.0, 10.0], vec![-1.3 * 2.0, 0.7 * 2.0]);
        let grid = build_grid(1.0, 1.0, 0.5).unwrap();
        let index = build_index_set(&grid, s.x(), 1, 2.0);
        let cov = CovEstimates { sigmas: vec![SymMatrix::diag(&[4.0]); 2], b_n: 1.0 };
        let stat = compute_statistic(&s, &index, &cov, Kernel::Biweight).unwrap();
        assert_abs_diff_eq!(stat.value, 0.7, epsilon = 1e-15);
        assert_eq!(stat.argmax, 1);

        let one = line_sample(vec![0.0, 10.0], vec![1.0, 1.0]);
        let mut index = build_index_set(&grid, one.x(), 1, 2.0);
        index.triples.truncate(1);
        let stat = compute_statistic(&one, &index, &cov, Kernel::Biweight).unwrap();
        assert_eq!(stat.value, 0.5);
    }

    #[test]
    fn argmax_ties_resolve_to_first() {
        let s = line_sample(vec![0.0, 10.0], vec![1.0, 1.0]);
        let grid = build_grid(1.0, 1.0, 0.5).unwrap();
        let index = build_index_set(&grid, s.x(), 1, 2.0);
        let cov = CovEstimates { sigmas: vec![SymMatrix::identity(1); 2], b_n: 1.0 };
        assert_eq!(compute_statistic(&s, &index, &cov, Kernel::Biweight).unwrap().argmax, 0);
    }

    #[test]
    fn decide_boundaries() {
        assert!(!decide(1.0, 1.0, 0.0, 0).reject);
        assert!(decide(1.0 + 1e-12, 1.0, 0.0, 0).reject);

        let d = decide_with_u(0.0, 2.0, 0.5, 1.0);
        assert_eq!(d.t_quantile, Some(2.0));
        let d = decide_with_u(0.0, 2.0, 0.5, 0.0);
        assert_eq!(d.t_quantile, Some(2.5));
        let d = decide_with_u(2.3, 2.0, 0.5, 0.5);
        assert_abs_diff_eq!(d.t_quantile.unwrap(), 2.25, epsilon = 1e-11);
        assert!(d.reject);
        let u = decide(0.0, 0.0, 0.5, 44).u_draw.unwrap();
        assert_eq!(decide(0.0, 0.0, 0.5, 44).u_draw, Some(u));
    }

    #[test]
    fn config_validation() {
        assert!(TestConfig::default().validate().is_ok());
        let bad = [
            TestConfig { alpha: 1.0, ..Default::default() },
            TestConfig { beta: -0.1, ..Default::default() },
            TestConfig { bootstrap_draws: 99, ..Default::default() },
            TestConfig { gamma: Some(0.03), ..Default::default() },
            TestConfig { a: 1.0, ..Default::default() },
            TestConfig { k_min: Some(0), ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))), "{cfg:?}");
        }
    }

    #[test]
    fn defaults_follow_sample_size() {
        assert_eq!(default_k_min(100), 15);
        assert_eq!(default_k_min(250), 15);
        assert_eq!(default_k_min(500), 20);
        assert_eq!(default_k_min(5), 5);
        let cfg = TestConfig { alpha: 0.1, ..Default::default() };
        assert_abs_diff_eq!(cfg.default_gamma(250), 0.1 / 250f64.ln());
        assert_eq!(cfg.default_gamma(3), 0.025);
    }

    #[test]
    fn h_min_puts_k_min_points_inside_kernel_support() {
        // Unit-spaced design: each interior point has 2r + 1 points within r.
        let s = line_sample((0..41).map(f64::from).collect(), vec![0.0; 41]);
        let window = default_h_min(s.x(), 5).unwrap();
        for kernel in Kernel::ALL {
            let cfg = TestConfig { k_min: Some(5), kernel, ..Default::default() };
            let p = AdaptiveTest::new(cfg).unwrap().prepare(&s).unwrap();
            assert_abs_diff_eq!(p.resolved.h_min, window / kernel.support_radius(), epsilon = 1e-12);
        }
    }

    #[test]
    fn two_point_zero_response_does_not_reject() {
        let s = line_sample(vec![0.0, 1.0], vec![0.0, 0.0]);
        let test = AdaptiveTest::new(TestConfig { alpha: 0.1, bootstrap_draws: 200, ..Default::default() }).unwrap();
        for method in [Method::Pia, Method::Rms] {
            let r = test.run_methods(&s, &[method]).unwrap().pop().unwrap();
            assert_eq!(r.statistic, 0.0);
            assert_eq!(r.critical_value, 0.0);
            assert!(!r.reject);
        }
    }

    #[test]
    fn identical_config_identical_result() {
        let xs: Vec<f64> = (0..80).map(|k| ((k * 31) % 80) as f64 / 20.0 - 2.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (3.0 * x).sin() * 0.1).collect();
        let s = line_sample(xs, ys);
        let cfg = TestConfig { beta: 0.2, bootstrap_draws: 200, seed: 99, ..Default::default() };
        let a = AdaptiveTest::new(cfg.clone()).unwrap().run(&s).unwrap();
        let b = AdaptiveTest::new(cfg).unwrap().run(&s).unwrap();
        assert_eq!(a, b);
        assert!(a.diagnostics.delta.is_some());
    }

    #[test]
    fn joint_run_matches_separate_runs() {
        let xs: Vec<f64> = (0..60).map(|k| ((k * 17) % 60) as f64 / 15.0 - 2.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.2 - x.abs()).collect();
        let s = line_sample(xs, ys);
        let pia =
            AdaptiveTest::new(TestConfig { method: Method::Pia, bootstrap_draws: 150, ..Default::default() }).unwrap();
        let rms =
            AdaptiveTest::new(TestConfig { method: Method::Rms, bootstrap_draws: 150, ..Default::default() }).unwrap();
        let both = pia.run_methods(&s, &[Method::Pia, Method::Rms]).unwrap();
        assert_eq!(both[0], pia.run(&s).unwrap());
        assert_eq!(both[1], rms.run(&s).unwrap());
    }
}

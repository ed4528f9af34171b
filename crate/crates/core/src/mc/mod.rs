//! Monte Carlo harness for the size and power study.
//!
//! The design is `X ~ U(-2, 2)` with `Y = L (M - |X|)₊ - m + ε`; four
//! parameter cases cover a binding null, a slack null, a flat alternative,
//! and a peaked alternative. Each replication draws a fresh sample on its
//! own stream and runs the full test, so a table is reproducible from its
//! master seed alone.

pub mod probes;
mod table;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::engine::{default_k_min, AdaptiveTest, Method, TestConfig};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, Stage};
use crate::smoother::{Kernel, Sample};

pub use probes::{
    anticoncentration_probe, chatterjee_bound, invariance_probe, AnticoncentrationEstimate, BoundInputs,
    InvarianceReport, ProbeNoise,
};
pub use table::{render_table, Table};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Noise {
    /// `sd · N(0, 1)`.
    Normal { sd: f64 },
    /// `(ξ sd1 + (1 - ξ) sd0) · N(0, 1)` with `P(ξ = 1) = p_mix`.
    Mixture { p_mix: f64, sd1: f64, sd0: f64 },
}

impl Noise {
    pub const NORMAL: Noise = Noise::Normal { sd: 0.1 };
    pub const MIXTURE: Noise = Noise::Mixture { p_mix: 0.8, sd1: 0.07, sd0: 0.18 };

    pub fn label(&self) -> &'static str {
        match self {
            Noise::Normal { .. } => "Normal",
            Noise::Mixture { .. } => "Mixture",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Noise::Normal { sd } => sd > 0.0,
            Noise::Mixture { p_mix, sd1, sd0 } => (0.0..=1.0).contains(&p_mix) && sd1 > 0.0 && sd0 > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid noise specification {self:?}")))
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        match *self {
            Noise::Normal { sd } => sd * z,
            Noise::Mixture { p_mix, sd1, sd0 } => {
                let sd = if rng.random::<f64>() < p_mix { sd1 } else { sd0 };
                sd * z
            }
        }
    }
}

/// The four parameter configurations of the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    /// `L = M = m = 0`: the null holds with equality everywhere.
    Binding = 1,
    /// `L = 0.1, M = 0.2, m = 0.02`: the null holds, mostly slack.
    Slack = 2,
    /// `L = M = 0, m = -0.02`: flat violation.
    Flat = 3,
    /// `L = 2, M = 0.2, m = 0.2`: peaked violation around zero.
    Peak = 4,
}

impl Case {
    pub const ALL: [Case; 4] = [Case::Binding, Case::Slack, Case::Flat, Case::Peak];

    pub fn from_id(id: u8) -> Result<Self> {
        Case::ALL
            .into_iter()
            .find(|c| c.id() == id)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown case {id}; expected 1-4")))
    }

    pub fn id(self) -> u8 {
        self as u8
    }

    /// `(L, M, m)`.
    pub fn params(self) -> (f64, f64, f64) {
        match self {
            Case::Binding => (0.0, 0.0, 0.0),
            Case::Slack => (0.1, 0.2, 0.02),
            Case::Flat => (0.0, 0.0, -0.02),
            Case::Peak => (2.0, 0.2, 0.2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n: usize,
    pub l: f64,
    pub m_peak: f64,
    pub m_shift: f64,
    pub noise: Noise,
    pub x_low: f64,
    pub x_high: f64,
}

impl Scenario {
    pub fn new(case: Case, noise: Noise, n: usize) -> Self {
        let (l, m_peak, m_shift) = case.params();
        Self { n, l, m_peak, m_shift, noise, x_low: -2.0, x_high: 2.0 }
    }

    /// `E[Y | X = x]`.
    pub fn regression(&self, x: f64) -> f64 {
        self.l * (self.m_peak - x.abs()).max(0.0) - self.m_shift
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::InvalidConfig(format!("scenario needs n >= 10, got {}", self.n)));
        }
        if self.x_low.partial_cmp(&self.x_high) != Some(std::cmp::Ordering::Less) {
            return Err(Error::InvalidConfig("empty design interval".into()));
        }
        self.noise.validate()
    }
}

pub fn gen_sample<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<Sample> {
    scenario.validate()?;
    let mut xs = Vec::with_capacity(scenario.n);
    let mut ys = Vec::with_capacity(scenario.n);
    for _ in 0..scenario.n {
        let x = rng.random_range(scenario.x_low..scenario.x_high);
        xs.push(x);
        ys.push(scenario.regression(x) + scenario.noise.draw(rng));
    }
    Sample::new(DesignMatrix::from_scalars(xs)?, 1, ys)
}

/// Rejection frequency of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub case: Option<u8>,
    pub noise: String,
    pub method: Method,
    pub n: usize,
    pub reps: usize,
    pub rejects: usize,
    pub rejection_rate: f64,
    pub mc_se: f64,
}

impl McResult {
    fn new(case: Option<Case>, scenario: &Scenario, method: Method, reps: usize, rejects: usize) -> Self {
        let rate = rejects as f64 / reps as f64;
        Self {
            case: case.map(Case::id),
            noise: scenario.noise.label().to_string(),
            method,
            n: scenario.n,
            reps,
            rejects,
            rejection_rate: rate,
            mc_se: mc_se(rate, reps),
        }
    }
}

/// `sqrt(r (1 - r) / reps)`.
pub fn mc_se(rate: f64, reps: usize) -> f64 {
    (rate * (1.0 - rate) / reps as f64).sqrt()
}

/// Test configuration of the simulation study: level 10%, biweight kernel,
/// grid ratio 0.8, packing at separation `h`, deterministic critical values,
/// and `γ = 0.1 / ln n`.
pub fn study_config(n: usize, bootstrap_draws: usize) -> TestConfig {
    TestConfig {
        alpha: 0.1,
        gamma: None,
        beta: 0.0,
        bootstrap_draws,
        seed: 0,
        a: 0.8,
        h_max: None,
        h_min: None,
        k_min: Some(default_k_min(n)),
        separation_factor: 1.0,
        kernel: Kernel::Biweight,
        c_b: 1.0,
        method: Method::Rms,
    }
}

/// Rejection decisions of every replication for several methods at once;
/// replication `r` uses the pipeline seed `derive_seed(master_seed, r)` for
/// both the data and the bootstrap.
fn replicate(
    scenario: &Scenario,
    config: &TestConfig,
    methods: &[Method],
    reps: usize,
    master_seed: u64,
) -> Result<Vec<Vec<bool>>> {
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    scenario.validate()?;
    config.validate()?;
    (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(master_seed, r);
            let sample = gen_sample(scenario, &mut stream(seed, Stage::Data, 0))?;
            let test = AdaptiveTest::new(TestConfig { seed, ..config.clone() })?;
            let results = test.run_methods(&sample, methods)?;
            Ok(results.iter().map(|t| t.reject).collect())
        })
        .collect()
}

pub fn run_cell(
    scenario: &Scenario,
    config: &TestConfig,
    method: Method,
    reps: usize,
    master_seed: u64,
) -> Result<McResult> {
    let mut out = run_cells(scenario, None, config, &[method], reps, master_seed)?;
    Ok(out.pop().expect("one method requested"))
}

/// One result per method, all computed on the same replications.
pub fn run_cells(
    scenario: &Scenario,
    case: Option<Case>,
    config: &TestConfig,
    methods: &[Method],
    reps: usize,
    master_seed: u64,
) -> Result<Vec<McResult>> {
    let decisions = replicate(scenario, config, methods, reps, master_seed)?;
    Ok(methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let rejects = decisions.iter().filter(|d| d[k]).count();
            McResult::new(case, scenario, method, reps, rejects)
        })
        .collect())
}

/// Which cells of the table to run.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSpec {
    pub n: usize,
    pub reps: usize,
    pub bootstrap_draws: usize,
    pub master_seed: u64,
    pub cases: Vec<Case>,
    pub noises: Vec<Noise>,
}

impl TableSpec {
    pub fn full(n: usize, reps: usize, bootstrap_draws: usize, master_seed: u64) -> Self {
        Self {
            n,
            reps,
            bootstrap_draws,
            master_seed,
            cases: Case::ALL.to_vec(),
            noises: vec![Noise::NORMAL, Noise::MIXTURE],
        }
    }
}

/// Plug-in and RMS rejection rates for every (noise, case) pair, in the
/// order noise, case, method.
pub fn run_table(spec: &TableSpec) -> Result<Table> {
    let config = study_config(spec.n, spec.bootstrap_draws);
    let mut cells = Vec::new();
    for &noise in &spec.noises {
        for &case in &spec.cases {
            let scenario = Scenario::new(case, noise, spec.n);
            cells.extend(run_cells(
                &scenario,
                Some(case),
                &config,
                &[Method::Pia, Method::Rms],
                spec.reps,
                spec.master_seed,
            )?);
        }
    }
    Ok(Table {
        n: spec.n,
        reps: spec.reps,
        bootstrap_draws: spec.bootstrap_draws,
        master_seed: spec.master_seed,
        config,
        cells,
    })
}

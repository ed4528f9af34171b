//! Gaussian bootstrap for the plug-in and refined-moment-selection
//! critical values.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{IndexSet, Triple};
use crate::engine::testfn::g0;
use crate::error::{Error, Result};
use crate::linalg::{gaussian_vector_into, psd_sqrt, SymMatrix};
use crate::rng::{stream, Stage};
use crate::smoother::{fhat, sparse_weights, variance_floor, vhat, CovEstimates, Kernel, Sample, SparseWeights};

/// Kernel estimate and studentizer for one triple of the index set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleEstimate {
    pub i: usize,
    pub m: usize,
    pub h: f64,
    pub h_index: usize,
    pub fhat: f64,
    pub vhat: f64,
    pub studentized: f64,
    /// The variance hit the floor; `vhat` is the floor value.
    pub floored: bool,
}

impl TripleEstimate {
    pub fn triple(&self) -> Triple {
        Triple { i: self.i, m: self.m, h: self.h_index }
    }
}

/// Smoothing weights shared by every moment coordinate of a test point,
/// plus per-triple estimates.
#[derive(Debug, Clone)]
pub struct Smoothed {
    pub rows: Vec<SparseWeights>,
    /// Row of `rows` used by each triple, aligned with the index set.
    pub row_of: Vec<usize>,
    pub estimates: Vec<TripleEstimate>,
}

impl Smoothed {
    pub fn new(sample: &Sample, index: &IndexSet, cov: &CovEstimates, kernel: Kernel) -> Self {
        let floor = variance_floor(sample);
        let mut rows: Vec<SparseWeights> = Vec::new();
        let mut row_of = Vec::with_capacity(index.len());
        let mut estimates = Vec::with_capacity(index.len());
        let mut last: Option<(usize, usize)> = None;
        for t in &index.triples {
            // Triples of one (h, i) pair are consecutive.
            if last != Some((t.h, t.i)) {
                rows.push(sparse_weights(sample.x(), kernel, t.i, index.bandwidth(t)));
                last = Some((t.h, t.i));
            }
            let w = rows.last().expect("row pushed above");
            let f = fhat(sample, w, t.m);
            let v = vhat(w, cov, t.m, floor);
            row_of.push(rows.len() - 1);
            estimates.push(TripleEstimate {
                i: t.i,
                m: t.m,
                h: index.bandwidth(t),
                h_index: t.h,
                fhat: f,
                vhat: v.value,
                studentized: f / v.value,
                floored: v.floored,
            });
        }
        Self { rows, row_of, estimates }
    }
}

/// Everything a bootstrap draw needs, fixed for the whole run.
#[derive(Debug, Clone)]
pub struct BootstrapPlan {
    n: usize,
    p: usize,
    roots: Vec<SymMatrix>,
    rows: Vec<SparseWeights>,
    row_of: Vec<usize>,
    moment_of: Vec<usize>,
    inv_v: Vec<f64>,
}

impl BootstrapPlan {
    pub fn new(smoothed: &Smoothed, cov: &CovEstimates) -> Result<Self> {
        let roots = cov.sigmas.iter().map(psd_sqrt).collect::<Result<Vec<_>>>()?;
        let p = roots.first().map_or(1, SymMatrix::dim);
        Ok(Self {
            n: roots.len(),
            p,
            roots,
            rows: smoothed.rows.clone(),
            row_of: smoothed.row_of.clone(),
            moment_of: smoothed.estimates.iter().map(|e| e.m).collect(),
            inv_v: smoothed.estimates.iter().map(|e| 1.0 / e.vhat).collect(),
        })
    }

    /// Number of triples in the full index set.
    pub fn len(&self) -> usize {
        self.inv_v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_v.is_empty()
    }

    /// All triple positions, in canonical order.
    pub fn full_set(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }
}

/// One bootstrap draw: simulate `Ỹ_j ~ N(0, Σ̂_j)` independently and return
/// the largest studentized smoothed value over `subset`.
///
/// An empty subset yields 0.
pub fn simulate_t<R: Rng + ?Sized>(plan: &BootstrapPlan, subset: &[usize], rng: &mut R) -> f64 {
    if subset.is_empty() {
        return 0.0;
    }
    let p = plan.p;
    let mut y = vec![0.0; plan.n * p];
    let mut z = vec![0.0; p];
    for (root, out) in plan.roots.iter().zip(y.chunks_exact_mut(p)) {
        gaussian_vector_into(root, rng, &mut z, out);
    }
    subset
        .iter()
        .map(|&s| {
            let m = plan.moment_of[s];
            let smoothed: f64 = plan.rows[plan.row_of[s]].iter().map(|(j, w)| w * y[j * p + m]).sum();
            smoothed * plan.inv_v[s]
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `draws` bootstrap replications over `subset`, draw `b` on the stream
/// `(seed, stage, b)`. The result does not depend on thread scheduling.
pub fn bootstrap_draws(plan: &BootstrapPlan, subset: &[usize], seed: u64, stage: Stage, draws: usize) -> Vec<f64> {
    (0..draws as u64).into_par_iter().map(|b| simulate_t(plan, subset, &mut stream(seed, stage, b))).collect()
}

/// Critical value at `level` from bootstrap draws.
///
/// With `beta > 0` this is the smallest `c` solving
/// `mean_b g₀((T_b - c) / β) = level`, found by bisection to `1e-9`.
/// With `beta = 0` it is the `⌈level · B⌉`-th order statistic.
pub fn solve_c(draws: &[f64], beta: f64, level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("level must lie in (0, 1), got {level}")));
    }
    if draws.is_empty() {
        return Err(Error::InvalidInput("no bootstrap draws".into()));
    }
    if beta < 0.0 {
        return Err(Error::InvalidConfig(format!("beta must be nonnegative, got {beta}")));
    }
    if beta == 0.0 {
        let mut sorted = draws.to_vec();
        sorted.sort_by(f64::total_cmp);
        let b = sorted.len();
        // The small slack keeps e.g. 0.95 · 100 from rounding up to 96.
        let rank = ((level * b as f64) - 1e-9).ceil().clamp(1.0, b as f64) as usize;
        return Ok(sorted[rank - 1]);
    }
    let acceptance = |c: f64| draws.iter().map(|t| g0((t - c) / beta)).sum::<f64>() / draws.len() as f64;
    let lo0 = draws.iter().copied().fold(f64::INFINITY, f64::min) - beta;
    let hi0 = draws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo0, hi0);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if acceptance(mid) >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Plug-in critical value over the full index set.
pub fn pia_critical(plan: &BootstrapPlan, seed: u64, draws: usize, beta: f64, level: f64) -> Result<(f64, Vec<f64>)> {
    let t = bootstrap_draws(plan, &plan.full_set(), seed, Stage::Pia, draws);
    let c = solve_c(&t, beta, level)?;
    Ok((c, t))
}

/// Triples whose studentized estimate exceeds `-2 (c_{1-γ} + β)`.
pub fn rms_select(estimates: &[TripleEstimate], c_pregamma: f64, beta: f64) -> Vec<usize> {
    let threshold = -2.0 * (c_pregamma + beta);
    estimates.iter().enumerate().filter(|(_, e)| e.studentized > threshold).map(|(s, _)| s).collect()
}

/// Outcome of the two-stage RMS procedure.
#[derive(Debug, Clone)]
pub struct RmsCritical {
    pub c: f64,
    pub c_pregamma: f64,
    pub selected: Vec<usize>,
    pub draws: Vec<f64>,
}

/// RMS critical value at level `1 - α + 2γ`.
///
/// `pia_draws` are the plug-in draws (stream stage [`Stage::Pia`]); the
/// second stage uses fresh [`Stage::Rms`] streams.
pub fn rms_critical(
    plan: &BootstrapPlan,
    estimates: &[TripleEstimate],
    pia_draws: &[f64],
    seed: u64,
    beta: f64,
    alpha: f64,
    gamma: f64,
) -> Result<RmsCritical> {
    if !(gamma > 0.0 && gamma < alpha / 2.0) {
        return Err(Error::InvalidConfig(format!(
            "gamma must lie in (0, alpha/2) = (0, {}), got {gamma}",
            alpha / 2.0
        )));
    }
    let c_pregamma = solve_c(pia_draws, beta, 1.0 - gamma)?;
    let selected = rms_select(estimates, c_pregamma, beta);
    let draws = bootstrap_draws(plan, &selected, seed, Stage::Rms, pia_draws.len());
    let c = solve_c(&draws, beta, 1.0 - alpha + 2.0 * gamma)?;
    Ok(RmsCritical { c, c_pregamma, selected, draws })
}

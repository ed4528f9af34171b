//! Simulation probes of two finite-sample bounds behind the test: the
//! anticoncentration of Gaussian maxima and the Lindeberg-type invariance
//! bound for smooth functions of a maximum of linear forms.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::engine::testfn::{g0, G0_D1_SUP, G0_D2_SUP, G0_D3_SUP};
use crate::error::{Error, Result};
use crate::rng::{stream, Stage};
use crate::smoother::{sparse_weights, Kernel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnticoncentrationEstimate {
    pub m: usize,
    pub reps: usize,
    pub median: f64,
    pub bin_width: f64,
    /// Largest histogram density among bins above the median.
    pub sup_density: f64,
    /// `3 sqrt(log(M + 1))`.
    pub envelope: f64,
    /// Monte Carlo standard error of the top bin's density.
    pub se: f64,
}

impl AnticoncentrationEstimate {
    pub fn within_envelope(&self) -> bool {
        self.sup_density <= self.envelope
    }
}

/// Histogram estimate of `sup_{w > median} f_W(w)` for `W` the maximum of
/// `m` independent standard normals.
///
/// Bins of width `4 · IQR · reps^{-1/3}` start at the empirical median.
pub fn anticoncentration_probe(m: usize, reps: usize, seed: u64) -> Result<AnticoncentrationEstimate> {
    if m == 0 || reps < 4 {
        return Err(Error::InvalidConfig(format!("need m >= 1 and reps >= 4 (m = {m}, reps = {reps})")));
    }
    let mut w: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, Stage::Probe, r);
            (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    w.sort_by(f64::total_cmp);
    let quantile = |q: f64| w[((q * reps as f64).ceil() as usize).clamp(1, reps) - 1];
    let median = quantile(0.5);
    let iqr = quantile(0.75) - quantile(0.25);
    let bin_width = 4.0 * iqr * (reps as f64).powf(-1.0 / 3.0);

    let mut counts: Vec<usize> = Vec::new();
    for &v in w.iter().filter(|&&v| v >= median) {
        let k = ((v - median) / bin_width) as usize;
        if k >= counts.len() {
            counts.resize(k + 1, 0);
        }
        counts[k] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0);
    let scale = reps as f64 * bin_width;
    let prob = top as f64 / reps as f64;
    Ok(AnticoncentrationEstimate {
        m,
        reps,
        median,
        bin_width,
        sup_density: top as f64 / scale,
        envelope: 3.0 * ((m + 1) as f64).ln().sqrt(),
        se: (prob * (1.0 - prob) / reps as f64).sqrt() / bin_width,
    })
}

/// Disturbance family compared against matched Gaussians.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeNoise {
    /// Centred `±1` with equal probability.
    Rademacher,
    /// Standard normal, so the gap is zero in expectation.
    Gaussian,
}

impl ProbeNoise {
    fn abs_third_moment(self) -> f64 {
        match self {
            ProbeNoise::Rademacher => 1.0,
            ProbeNoise::Gaussian => (8.0 / std::f64::consts::PI).sqrt(),
        }
    }

    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            ProbeNoise::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            ProbeNoise::Gaussian => rng.sample(StandardNormal),
        }
    }
}

/// Inputs of the closed-form invariance bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Number of summands (observations).
    pub n: usize,
    /// Number of linear forms per coordinate.
    pub forms: usize,
    /// Number of coordinates.
    pub p: usize,
    /// Largest coefficient of any linear form.
    pub a: f64,
    /// Width of the test function `g(x) = g₀((x - c)/β)`.
    pub beta: f64,
    /// `max E|Z|³`.
    pub third_z: f64,
    /// `max E|U|³`.
    pub third_u: f64,
}

/// Upper bound on `|E g(max f(Z)) - E g(max f(U))|` for nonnegative linear
/// forms and `g = g₀((· - c)/β)`:
/// `(3/6^{1/3}) p a (C(g) n)^{1/3} (‖g′‖ log(Kp))^{2/3} (E|Z|³ + E|U|³)^{1/3}`
/// with `C(g) = ‖g‴‖ + 3‖g″‖ + ‖g′‖`.
pub fn chatterjee_bound(inputs: &BoundInputs) -> f64 {
    let beta = inputs.beta;
    let d1 = G0_D1_SUP / beta;
    let d2 = G0_D2_SUP / beta.powi(2);
    let d3 = G0_D3_SUP / beta.powi(3);
    let c_g = d3 + 3.0 * d2 + d1;
    let p = inputs.p as f64;
    3.0 / 6f64.cbrt()
        * p
        * inputs.a
        * (c_g * inputs.n as f64).cbrt()
        * (d1 * ((inputs.forms * inputs.p) as f64).ln()).powf(2.0 / 3.0)
        * (inputs.third_z + inputs.third_u).cbrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub n: usize,
    pub forms: usize,
    pub beta: f64,
    pub noise: ProbeNoise,
    pub reps: usize,
    /// Centre of the test function (median of the Gaussian maximum).
    pub c: f64,
    /// `|mean g(max f(Z)) - mean g(max f(U))|`.
    pub gap: f64,
    pub gap_se: f64,
    pub bound: f64,
    pub bound_inputs: BoundInputs,
}

impl InvarianceReport {
    pub fn holds(&self) -> bool {
        self.gap <= self.bound
    }
}

/// Studentized kernel-weight forms on an equally spaced design over
/// `(-2, 2)`: test points spread evenly, bandwidths cycling through
/// `0.4 · 0.8^k`, `k = 0, 1, 2`. Coefficients are `w / ‖w‖₂`, the weights
/// divided by the standard deviation of the smoothed unit-variance noise.
pub fn probe_forms(n: usize, forms: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    if n < 2 || forms == 0 {
        return Err(Error::InvalidConfig(format!("need n >= 2 and at least one form (n = {n}, forms = {forms})")));
    }
    let xs: Vec<f64> = (0..n).map(|k| -2.0 + 4.0 * (k as f64 + 0.5) / n as f64).collect();
    let x = DesignMatrix::from_scalars(xs)?;
    Ok((0..forms)
        .map(|k| {
            let i = if forms == 1 { n / 2 } else { k * (n - 1) / (forms - 1) };
            let h = 0.4 * 0.8f64.powi((k % 3) as i32);
            let w = sparse_weights(&x, Kernel::Biweight, i, h);
            let norm = w.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            w.iter().map(|(j, v)| (j, v / norm)).collect()
        })
        .collect())
}

fn max_form(forms: &[Vec<(usize, f64)>], z: &[f64]) -> f64 {
    forms.iter().map(|f| f.iter().map(|&(j, a)| a * z[j]).sum::<f64>()).fold(f64::NEG_INFINITY, f64::max)
}

fn simulate_max(
    forms: &[Vec<(usize, f64)>],
    n: usize,
    noise: ProbeNoise,
    reps: usize,
    seed: u64,
    offset: u64,
) -> Vec<f64> {
    (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, Stage::Probe, offset + r);
            let z: Vec<f64> = (0..n).map(|_| noise.draw(&mut rng)).collect();
            max_form(forms, &z)
        })
        .collect()
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Estimates the gap between `E g(max f(Z))` and `E g(max f(U))` with
/// independent simulations for `Z` and Gaussian `U`, and evaluates the
/// closed-form bound on the same forms.
pub fn invariance_probe(
    n: usize,
    forms: usize,
    beta: f64,
    noise: ProbeNoise,
    reps: usize,
    seed: u64,
) -> Result<InvarianceReport> {
    if beta <= 0.0 {
        return Err(Error::NotApplicable("the invariance bound"));
    }
    if reps < 2 {
        return Err(Error::InvalidConfig("reps must be at least 2".into()));
    }
    let weights = probe_forms(n, forms)?;
    let a = weights.iter().flatten().map(|&(_, v)| v).fold(0.0, f64::max);

    // Streams: [0, reps) pilot, [reps, 2 reps) Gaussian, [2 reps, 3 reps) Z.
    let mut pilot = simulate_max(&weights, n, ProbeNoise::Gaussian, reps, seed, 0);
    pilot.sort_by(f64::total_cmp);
    let c = pilot[reps / 2];

    let g = |t: f64| g0((t - c) / beta);
    let gu: Vec<f64> =
        simulate_max(&weights, n, ProbeNoise::Gaussian, reps, seed, reps as u64).into_iter().map(g).collect();
    let gz: Vec<f64> = simulate_max(&weights, n, noise, reps, seed, 2 * reps as u64).into_iter().map(g).collect();
    let (mu, vu) = mean_var(&gu);
    let (mz, vz) = mean_var(&gz);

    let bound_inputs = BoundInputs {
        n,
        forms,
        p: 1,
        a,
        beta,
        third_z: noise.abs_third_moment(),
        third_u: ProbeNoise::Gaussian.abs_third_moment(),
    };
    Ok(InvarianceReport {
        n,
        forms,
        beta,
        noise,
        reps,
        c,
        gap: (mz - mu).abs(),
        gap_se: ((vu + vz) / reps as f64).sqrt(),
        bound: chatterjee_bound(&bound_inputs),
        bound_inputs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_normal_density_at_median() {
        let est = anticoncentration_probe(1, 200_000, 4).unwrap();
        assert!((est.sup_density - 0.3989).abs() < 0.01, "{est:?}");
        assert!(est.median.abs() < 0.01);
    }

    #[test]
    fn bound_scaling_in_n_and_a() {
        let base = BoundInputs { n: 100, forms: 20, p: 1, a: 0.3, beta: 0.5, third_z: 1.0, third_u: 1.6 };
        let b0 = chatterjee_bound(&base);
        assert_relative_eq!(chatterjee_bound(&BoundInputs { n: 800, ..base }) / b0, 2.0, max_relative = 1e-12);
        assert_relative_eq!(chatterjee_bound(&BoundInputs { a: 0.6, ..base }) / b0, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn forms_are_unit_norm_and_nonnegative() {
        for f in probe_forms(100, 20).unwrap() {
            let norm: f64 = f.iter().map(|(_, v)| v * v).sum::<f64>();
            assert_relative_eq!(norm, 1.0, max_relative = 1e-12);
            assert!(f.iter().all(|&(_, v)| v > 0.0));
        }
    }

    #[test]
    fn gaussian_gap_is_noise_only() {
        let r = invariance_probe(100, 20, 0.5, ProbeNoise::Gaussian, 4000, 3).unwrap();
        assert!(r.gap <= 3.0 * r.gap_se, "{r:?}");
    }

    #[test]
    fn probe_rejects_bad_input() {
        assert!(invariance_probe(100, 20, 0.0, ProbeNoise::Rademacher, 100, 1).is_err());
        assert!(anticoncentration_probe(0, 100, 1).is_err());
    }
}

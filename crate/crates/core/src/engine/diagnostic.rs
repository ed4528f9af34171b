//! Finite-sample size-guarantee diagnostic of the randomized test.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::engine::bootstrap::Smoothed;
use crate::engine::testfn::{G0_D1_SUP, G0_D2_SUP, G0_D3_SUP};
use crate::error::{Error, Result};
use crate::smoother::CovEstimates;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaDiagnostic {
    /// Bound on the size distortion from non-Gaussian disturbances.
    pub delta: f64,
    /// Largest studentized kernel weight `max w_h(X_i, X_j) / V̂_{i,m,h}`.
    pub b: f64,
    /// Third-moment factor, using Gaussian third moments implied by `Σ̂`.
    pub f_hat: f64,
    /// `1.8 p b n^{1/3} (log|S|)^{2/3} F̂ / β^{5/3}` divided by `α`; values at
    /// or above 1 mean the guarantee is not met.
    pub guarantee_ratio: f64,
}

/// `E|Z|³ / σ³` for a centred normal `Z`.
pub fn gaussian_abs_third_moment() -> f64 {
    (8.0 / PI).sqrt()
}

pub fn delta_diagnostic(
    smoothed: &Smoothed,
    cov: &CovEstimates,
    p: usize,
    beta: f64,
    alpha: f64,
) -> Result<DeltaDiagnostic> {
    if beta <= 0.0 {
        return Err(Error::NotApplicable("the size-guarantee diagnostic"));
    }
    let n = cov.sigmas.len() as f64;
    let size = smoothed.estimates.len() as f64;
    let b = smoothed
        .estimates
        .iter()
        .zip(&smoothed.row_of)
        .map(|(e, &row)| smoothed.rows[row].max_weight() / e.vhat)
        .fold(0.0, f64::max);
    let max_var = cov.sigmas.iter().flat_map(|s| (0..s.dim()).map(move |m| s.get(m, m))).fold(0.0, f64::max);
    let third = gaussian_abs_third_moment() * max_var.powf(1.5);
    let f_hat = (third + third).cbrt();

    let pf = p as f64;
    let log_s = size.ln();
    let smoothness = G0_D3_SUP / beta.powi(3) + 3.0 * G0_D2_SUP / beta.powi(2) + G0_D1_SUP / beta;
    let delta = 3.0 / (6f64.cbrt() * beta.powf(2.0 / 3.0))
        * pf
        * b
        * n.cbrt()
        * smoothness.cbrt()
        * (G0_D1_SUP * log_s).powf(2.0 / 3.0)
        * f_hat;
    let guarantee_ratio = 1.8 * pf * b * n.cbrt() * log_s.powf(2.0 / 3.0) * f_hat / beta.powf(5.0 / 3.0) / alpha;
    Ok(DeltaDiagnostic { delta, b, f_hat, guarantee_ratio })
}

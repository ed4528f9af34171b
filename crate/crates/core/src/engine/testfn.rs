//! The smooth test function `g₀` and its rescaled form `g`.

use crate::error::{Error, Result};

/// `sup |g₀′|`, attained at `x = 1/2`.
pub const G0_D1_SUP: f64 = 2.0;
/// `sup |g₀″|`, attained at the knots `1/4` and `3/4`.
pub const G0_D2_SUP: f64 = 8.0;
/// `|g₀‴|` on each of the three cubic pieces.
pub const G0_D3_SUP: f64 = 32.0;

/// Piecewise cubic from 1 down to 0 on `[0, 1]`, twice continuously
/// differentiable, with `|g₀‴| = 32` on every piece.
pub fn g0(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x <= 0.25 {
        1.0 - (16.0 / 3.0) * x.powi(3)
    } else if x <= 0.75 {
        let t = x - 0.25;
        7.0 / 6.0 - x - 4.0 * t * t + (16.0 / 3.0) * t.powi(3)
    } else if x <= 1.0 {
        (16.0 / 3.0) * (1.0 - x).powi(3)
    } else {
        0.0
    }
}

/// Solves `g₀(x) = u` on `[0, 1]` by bisection; `u` is clamped to `[0, 1]`.
///
/// `g₀` is strictly decreasing on `[0, 1]`, so the root is unique.
pub fn g0_inverse(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    if u >= 1.0 {
        return 0.0;
    }
    if u <= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if g0(mid) > u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `g(x) = g₀((x - c) / β)`: the probability of accepting at statistic `x`.
pub fn test_function(c: f64, beta: f64, x: f64) -> Result<f64> {
    if beta <= 0.0 {
        return Err(Error::NotApplicable("the smooth test function"));
    }
    Ok(g0((x - c) / beta))
}

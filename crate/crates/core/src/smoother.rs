//! Kernel smoothing and the nearest-neighbour difference covariance
//! estimator.

use serde::{Deserialize, Serialize};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Observations: design points and the `p` moment evaluations per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    x: DesignMatrix,
    p: usize,
    y: Vec<f64>,
}

impl Sample {
    /// `y` is row-major, `n × p`.
    pub fn new(x: DesignMatrix, p: usize, y: Vec<f64>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidInput("need at least one moment function".into()));
        }
        if y.len() != x.n() * p {
            return Err(Error::InvalidInput(format!(
                "expected {} response values ({} rows x {p}), got {}",
                x.n() * p,
                x.n(),
                y.len()
            )));
        }
        if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite response at row {}, column {}", pos / p, pos % p)));
        }
        Ok(Self { x, p, y })
    }

    pub fn x(&self) -> &DesignMatrix {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn y(&self, j: usize, m: usize) -> f64 {
        self.y[j * self.p + m]
    }

    pub fn y_row(&self, j: usize) -> &[f64] {
        &self.y[j * self.p..(j + 1) * self.p]
    }

    /// Root mean square of all responses; the reference scale for the
    /// variance floor. Falls back to 1 when every response is zero.
    pub fn response_scale(&self) -> f64 {
        let ms = self.y.iter().map(|v| v * v).sum::<f64>() / self.y.len() as f64;
        if ms > 0.0 {
            ms.sqrt()
        } else {
            1.0
        }
    }
}

/// Radial kernels `K(u) = k(‖u‖)`, all vanishing outside the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `1.5 (1 - 4u²)₊`, supported on `‖u‖ ≤ 1/2`.
    #[default]
    Biweight,
    /// `1/2` on `‖u‖ ≤ 1`.
    Rectangular,
    /// `(1 - ‖u‖)₊`.
    Triangular,
    /// `0.75 (1 - u²)₊`.
    Parabolic,
}

impl Kernel {
    pub const ALL: [Kernel; 4] = [Kernel::Biweight, Kernel::Rectangular, Kernel::Triangular, Kernel::Parabolic];

    /// Kernel value at radius `r = ‖u‖ ≥ 0`.
    #[inline]
    pub fn radial(self, r: f64) -> f64 {
        match self {
            Kernel::Biweight => (1.5 * (1.0 - 4.0 * r * r)).max(0.0),
            Kernel::Rectangular => {
                if r <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            Kernel::Triangular => (1.0 - r).max(0.0),
            Kernel::Parabolic => (0.75 * (1.0 - r * r)).max(0.0),
        }
    }

    /// Radius beyond which the kernel is zero.
    pub fn support_radius(self) -> f64 {
        match self {
            Kernel::Biweight => 0.5,
            _ => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Biweight => "biweight",
            Kernel::Rectangular => "rectangular",
            Kernel::Triangular => "triangular",
            Kernel::Parabolic => "parabolic",
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Kernel::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown kernel '{s}'")))
    }
}

pub fn kernel_eval(kernel: Kernel, u: &[f64]) -> f64 {
    kernel.radial(u.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Nonzero Nadaraya–Watson weights of one test point.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseWeights {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseWeights {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn max_weight(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Weights `w_h(X_i, X_j)` for all `j`, stored sparsely.
pub fn sparse_weights(x: &DesignMatrix, kernel: Kernel, i: usize, h: f64) -> SparseWeights {
    let mut indices = Vec::new();
    let mut raw = Vec::new();
    for j in 0..x.n() {
        let k = kernel.radial(x.dist(i, j) / h);
        if k > 0.0 {
            indices.push(j);
            raw.push(k);
        }
    }
    let total = kahan_sum(raw.iter().copied());
    let values = raw.into_iter().map(|k| k / total).collect();
    SparseWeights { indices, values }
}

/// Dense weight vector `w_h(X_i, ·)` of length `n`.
pub fn weights(sample: &Sample, kernel: Kernel, i: usize, h: f64) -> Vec<f64> {
    let sparse = sparse_weights(sample.x(), kernel, i, h);
    let mut dense = vec![0.0; sample.n()];
    for (j, w) in sparse.iter() {
        dense[j] = w;
    }
    dense
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Kernel estimate of `f_m` at the test point the weights belong to.
pub fn fhat(sample: &Sample, weights: &SparseWeights, m: usize) -> f64 {
    weights.iter().map(|(j, w)| w * sample.y(j, m)).sum()
}

/// Per-observation covariance estimates and the window they were built
/// with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovEstimates {
    pub sigmas: Vec<SymMatrix>,
    pub b_n: f64,
}

/// Studentizer `V̂` together with whether the variance floor kicked in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Studentizer {
    pub value: f64,
    pub floored: bool,
}

/// Floor on `V̂²`: `1e-12 ·` (response scale)².
pub fn variance_floor(sample: &Sample) -> f64 {
    1e-12 * sample.response_scale().powi(2)
}

/// `V̂ = sqrt(Σ_j w_j² Σ̂_{j,mm})`, floored at `sqrt(floor)`.
pub fn vhat(weights: &SparseWeights, cov: &CovEstimates, m: usize, floor: f64) -> Studentizer {
    let var: f64 = weights.iter().map(|(j, w)| w * w * cov.sigmas[j].get(m, m)).sum();
    if var < floor {
        Studentizer { value: floor.sqrt(), floored: true }
    } else {
        Studentizer { value: var.sqrt(), floored: false }
    }
}

/// `c_b · sd(X) · (log n / n)^{1/(2+d)}` with `sd` the root-mean
/// per-coordinate sample standard deviation.
pub fn default_bn(sample: &Sample, c_b: f64) -> Result<f64> {
    let x = sample.x();
    let (n, d) = (x.n(), x.d());
    let mut var_sum = 0.0;
    for c in 0..d {
        let mean = (0..n).map(|i| x.row(i)[c]).sum::<f64>() / n as f64;
        var_sum += (0..n).map(|i| (x.row(i)[c] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    }
    let sd = (var_sum / d as f64).sqrt();
    if sd == 0.0 {
        return Err(Error::DegenerateDesign("design has zero variance".into()));
    }
    let nf = n as f64;
    Ok(c_b * sd * (nf.ln() / nf).powf(1.0 / (2.0 + d as f64)))
}

/// Difference partners `j(k)`: each observation, in index order, is paired
/// with its nearest neighbour among the points not already used as a
/// partner (ties to the smallest index).
///
/// Late in the pass the unused set can be empty apart from `k` itself; the
/// exclusion is then dropped and the plain nearest neighbour is used.
pub fn difference_partners(x: &DesignMatrix) -> Vec<usize> {
    let n = x.n();
    let mut used = vec![false; n];
    let mut partners = Vec::with_capacity(n);
    for k in 0..n {
        let nearest = |allow_used: bool| {
            (0..n)
                .filter(|&j| j != k && (allow_used || !used[j]))
                .map(|j| (x.dist(k, j), j))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .map(|(_, j)| j)
        };
        let j = nearest(false).or_else(|| nearest(true)).expect("a design has at least two points");
        used[j] = true;
        partners.push(j);
    }
    partners
}

/// Local average of half the outer products of neighbour differences.
pub fn estimate_sigma(sample: &Sample, b_n: f64) -> Result<CovEstimates> {
    if !(b_n > 0.0 && b_n.is_finite()) {
        return Err(Error::InvalidConfig(format!("b_n must be positive, got {b_n}")));
    }
    let x = sample.x();
    let (n, p) = (sample.n(), sample.p());
    let partners = difference_partners(x);
    let diffs: Vec<f64> = (0..n)
        .flat_map(|k| {
            let j = partners[k];
            (0..p).map(move |m| sample.y(k, m) - sample.y(j, m))
        })
        .collect();

    let sigmas = (0..n)
        .map(|i| {
            let mut acc = vec![0.0; p * p];
            let mut count = 0usize;
            for k in 0..n {
                if x.dist(k, i) <= b_n {
                    count += 1;
                    let dk = &diffs[k * p..(k + 1) * p];
                    for a in 0..p {
                        for b in a..p {
                            acc[a * p + b] += dk[a] * dk[b];
                        }
                    }
                }
            }
            let denom = 2.0 * count as f64;
            SymMatrix::from_upper(p, |a, b| acc[a * p + b] / denom)
        })
        .collect();
    Ok(CovEstimates { sigmas, b_n })
}

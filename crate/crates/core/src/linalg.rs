//! Small symmetric-matrix utilities.
//!
//! Dimensions here are the number of moment functions, so a few units at
//! most. Eigendecompositions use cyclic Jacobi rotations, which are simple,
//! accurate to machine precision, and fast enough at this size.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real symmetric `dim × dim` matrix stored densely in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Builds a matrix from row-major entries, rejecting asymmetric input.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("matrix dimension must be at least 1".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(Error::InvalidInput(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { dim, entries })
    }

    /// Builds a matrix from a function of the upper triangle (`i <= j`).
    pub fn from_upper(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                entries[i * dim + j] = v;
                entries[j * dim + i] = v;
            }
        }
        Self { dim, entries }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_upper(dim, |_, _| 0.0)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_upper(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diag(values: &[f64]) -> Self {
        Self::from_upper(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|v| c * v).collect() }
    }

    /// `self - other`; panics on a dimension mismatch.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        Self { dim: self.dim, entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect() }
    }

    /// Dense product `self · other`, row-major. Not symmetric in general.
    pub fn matmul(&self, other: &Self) -> Vec<f64> {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let p = self.dim;
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            for k in 0..p {
                let a = self.get(i, k);
                for j in 0..p {
                    out[i * p + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Writes `self · z` into `out`.
    #[inline]
    pub fn mul_vec_into(&self, z: &[f64], out: &mut [f64]) {
        let p = self.dim;
        for (i, o) in out.iter_mut().enumerate().take(p) {
            let row = &self.entries[i * p..(i + 1) * p];
            *o = row.iter().zip(z).map(|(a, b)| a * b).sum();
        }
    }
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Row-major `p × p` matrix whose columns are the eigenvectors.
    pub vectors: Vec<f64>,
}

impl SymEigen {
    /// Column `k` of the eigenvector matrix.
    pub fn vector(&self, k: usize) -> Vec<f64> {
        let p = self.values.len();
        (0..p).map(|i| self.vectors[i * p + k]).collect()
    }

    /// `V · diag(f(λ)) · Vᵀ`, symmetrized exactly.
    fn reassemble(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let p = self.values.len();
        let mapped: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        SymMatrix::from_upper(p, |i, j| {
            (0..p).map(|k| self.vectors[i * p + k] * mapped[k] * self.vectors[j * p + k]).sum()
        })
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues (descending) and orthonormal eigenvectors of `a`.
///
/// Each eigenvector is oriented so that its largest-magnitude entry is
/// positive (first such entry on ties).
pub fn sym_eigen(a: &SymMatrix) -> Result<SymEigen> {
    if !a.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let p = a.dim;
    let mut m = a.entries.clone();
    let mut v = SymMatrix::identity(p).entries;

    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            let off: f64 =
                (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).map(|(i, j)| m[i * p + j] * m[i * p + j]).sum();
            if off.sqrt() <= f64::EPSILON * 1e-2 * scale {
                break;
            }
            for i in 0..p {
                for j in (i + 1)..p {
                    rotate(&mut m, &mut v, p, i, j);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| m[y * p + y].total_cmp(&m[x * p + x]));
    let values: Vec<f64> = order.iter().map(|&k| m[k * p + k]).collect();
    let mut vectors = vec![0.0; p * p];
    for (col, &k) in order.iter().enumerate() {
        let mut pivot = 0;
        for i in 1..p {
            if v[i * p + k].abs() > v[pivot * p + k].abs() {
                pivot = i;
            }
        }
        let sign = if v[pivot * p + k] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..p {
            vectors[i * p + col] = sign * v[i * p + k];
        }
    }
    Ok(SymEigen { values, vectors })
}

fn rotate(m: &mut [f64], v: &mut [f64], p: usize, i: usize, j: usize) {
    let aij = m[i * p + j];
    if aij == 0.0 {
        return;
    }
    let aii = m[i * p + i];
    let ajj = m[j * p + j];
    let theta = (ajj - aii) / (2.0 * aij);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..p {
        let mki = m[k * p + i];
        let mkj = m[k * p + j];
        m[k * p + i] = c * mki - s * mkj;
        m[k * p + j] = s * mki + c * mkj;
    }
    for k in 0..p {
        let mik = m[i * p + k];
        let mjk = m[j * p + k];
        m[i * p + k] = c * mik - s * mjk;
        m[j * p + k] = s * mik + c * mjk;
    }
    m[i * p + j] = 0.0;
    m[j * p + i] = 0.0;
    for k in 0..p {
        let vki = v[k * p + i];
        let vkj = v[k * p + j];
        v[k * p + i] = c * vki - s * vkj;
        v[k * p + j] = s * vki + c * vkj;
    }
}

/// Largest absolute eigenvalue.
pub fn spectral_norm(a: &SymMatrix) -> Result<f64> {
    let eig = sym_eigen(a)?;
    Ok(eig.values.iter().fold(0.0_f64, |acc, l| acc.max(l.abs())))
}

/// Symmetric PSD square root.
///
/// Eigenvalues in `[-tol, 0)` with `tol = 1e-10 · ‖A‖` are treated as zero;
/// anything more negative is an error.
pub fn psd_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    let eig = sym_eigen(a)?;
    let norm = eig.values.iter().fold(0.0_f64, |acc, l| acc.max(l.abs()));
    let tolerance = 1e-10 * norm;
    if let Some(&worst) = eig.values.iter().rfind(|&&l| l < -tolerance) {
        return Err(Error::NotPsd { eigenvalue: worst, tolerance });
    }
    Ok(eig.reassemble(|l| l.max(0.0).sqrt()))
}

/// Draws `R · z` with `z` a vector of independent standard normals.
pub fn gaussian_vector<R: Rng + ?Sized>(root: &SymMatrix, rng: &mut R) -> Vec<f64> {
    let mut z = vec![0.0; root.dim()];
    let mut out = vec![0.0; root.dim()];
    gaussian_vector_into(root, rng, &mut z, &mut out);
    out
}

/// Allocation-free form of [`gaussian_vector`]; `z` is scratch space.
#[inline]
pub fn gaussian_vector_into<R: Rng + ?Sized>(root: &SymMatrix, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
    for zi in z.iter_mut() {
        *zi = rng.sample(StandardNormal);
    }
    root.mul_vec_into(z, out);
}

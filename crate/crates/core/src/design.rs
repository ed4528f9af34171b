//! Bandwidth grid, test-point packing, and the index set of the statistic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Design points `X_1, …, X_n` in `ℝ^d`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    n: usize,
    d: usize,
    points: Vec<f64>,
}

impl DesignMatrix {
    pub fn new(d: usize, points: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("design dimension must be at least 1".into()));
        }
        if !points.len().is_multiple_of(d) {
            return Err(Error::InvalidInput(format!("{} coordinates do not form rows of length {d}", points.len())));
        }
        let n = points.len() / d;
        if n < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 design points, got {n}")));
        }
        if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite coordinate at row {}, column {}", pos / d, pos % d)));
        }
        Ok(Self { n, d, points })
    }

    /// One-dimensional design.
    pub fn from_scalars(xs: Vec<f64>) -> Result<Self> {
        Self::new(1, xs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        if self.d == 1 {
            return (self.points[i] - self.points[j]).abs();
        }
        self.row(i).iter().zip(self.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    fn max_pairwise_distance(&self) -> f64 {
        let mut best = 0.0_f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                best = best.max(self.dist(i, j));
            }
        }
        best
    }

    /// Indices sorted lexicographically by coordinates, index as tiebreak.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by(|&a, &b| {
            self.row(a)
                .iter()
                .zip(self.row(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        order
    }
}

/// Half the largest pairwise distance between design points.
pub fn default_h_max(x: &DesignMatrix) -> Result<f64> {
    let diameter = x.max_pairwise_distance();
    if diameter == 0.0 {
        return Err(Error::DegenerateDesign("all design points coincide".into()));
    }
    Ok(diameter / 2.0)
}

/// Smallest `h` at which a ball of radius `h` around a design point holds,
/// on average over the points, at least `k_min` observations (self
/// included).
///
/// The average count is a step function of `h` that jumps at pairwise
/// distances, so the answer is read off the sorted distances exactly
/// instead of bisecting. With `k_min = 1` any positive `h` qualifies and
/// the bisection floor `1e-6 · diameter` is returned.
pub fn default_h_min(x: &DesignMatrix, k_min: usize) -> Result<f64> {
    let n = x.n();
    if k_min == 0 || k_min > n {
        return Err(Error::InvalidConfig(format!("k_min must lie in 1..={n}, got {k_min}")));
    }
    let mut dists: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(x.dist(i, j));
        }
    }
    // Each unordered pair within h adds 2 to the total count of n·avg.
    let needed_pairs = ((k_min - 1) * n).div_ceil(2);
    let diameter = dists.iter().copied().fold(0.0_f64, f64::max);
    if diameter == 0.0 {
        return Err(Error::DegenerateDesign("all design points coincide".into()));
    }
    if needed_pairs == 0 {
        return Ok(1e-6 * diameter);
    }
    let (_, kth, _) = dists.select_nth_unstable_by(needed_pairs - 1, f64::total_cmp);
    Ok(kth.max(1e-6 * diameter))
}

/// Geometric grid `h_max · a^k`, `k = 0, 1, …`, truncated at `h_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthGrid {
    pub h_max: f64,
    pub h_min: f64,
    pub a: f64,
    values: Vec<f64>,
}

impl BandwidthGrid {
    /// Bandwidths in descending order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

// Relative slack so an h_min that lies on the grid up to rounding is kept.
const GRID_SLACK: f64 = 1e-12;

pub fn build_grid(h_max: f64, h_min: f64, a: f64) -> Result<BandwidthGrid> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidConfig(format!("grid ratio a must lie in (0, 1), got {a}")));
    }
    if !(h_min > 0.0 && h_min.is_finite() && h_max.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "bandwidths must be positive and finite (h_min = {h_min}, h_max = {h_max})"
        )));
    }
    if h_min > h_max {
        return Err(Error::InvalidConfig(format!("h_min = {h_min} exceeds h_max = {h_max}")));
    }
    let floor = h_min * (1.0 - GRID_SLACK);
    let values: Vec<f64> = (0..).map(|k| h_max * a.powi(k)).take_while(|&h| h >= floor).collect();
    Ok(BandwidthGrid { h_max, h_min, a, values })
}

/// Greedy packing of design points at bandwidth `h`.
///
/// Points are visited in [`DesignMatrix::canonical_order`]; a point is
/// admitted when it is farther than `separation_factor · h` from every point
/// admitted so far. The result is sorted by index.
pub fn pack_test_points(x: &DesignMatrix, h: f64, separation_factor: f64) -> Vec<usize> {
    let threshold = separation_factor * h;
    let mut admitted: Vec<usize> = Vec::new();
    for i in x.canonical_order() {
        // In one dimension only the last admitted point can conflict.
        let clear = if x.d() == 1 {
            admitted.last().is_none_or(|&j| x.dist(i, j) > threshold)
        } else {
            admitted.iter().all(|&j| x.dist(i, j) > threshold)
        };
        if clear {
            admitted.push(i);
        }
    }
    admitted.sort_unstable();
    admitted
}

/// One element `(i, m, h)` of the index set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    /// Observation index of the test point.
    pub i: usize,
    /// Moment coordinate, zero-based.
    pub m: usize,
    /// Position of the bandwidth in the grid (0 is `h_max`).
    pub h: usize,
}

/// Test-point packs per bandwidth and the flattened triple list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSet {
    pub bandwidths: Vec<f64>,
    pub packs: Vec<Vec<usize>>,
    pub triples: Vec<Triple>,
    pub separation_factor: f64,
}

impl IndexSet {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn bandwidth(&self, t: &Triple) -> f64 {
        self.bandwidths[t.h]
    }
}

/// Packs every bandwidth and lists triples in (h desc, i asc, m asc) order.
pub fn build_index_set(grid: &BandwidthGrid, x: &DesignMatrix, p: usize, separation_factor: f64) -> IndexSet {
    let packs: Vec<Vec<usize>> = grid.values().iter().map(|&h| pack_test_points(x, h, separation_factor)).collect();
    let triples = packs
        .iter()
        .enumerate()
        .flat_map(|(h, pack)| pack.iter().flat_map(move |&i| (0..p).map(move |m| Triple { i, m, h })))
        .collect();
    IndexSet { bandwidths: grid.values().to_vec(), packs, triples, separation_factor }
}

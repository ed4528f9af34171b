//! Adaptive test of conditional moment inequalities.
//!
//! The test smooths each moment function with a kernel estimator over a
//! geometric grid of bandwidths, studentizes every estimate, and compares
//! the largest studentized value against a Gaussian bootstrap critical
//! value (plug-in or refined moment selection).
//!
//! Module map:
//!
//! - [`linalg`]: small symmetric matrices (eigen, PSD square root, norms).
//! - [`design`]: bandwidth grid, test-point packing, and the index set.
//! - [`smoother`]: kernels, weights, point estimates, and the
//!   nearest-neighbour difference covariance estimator.
//! - [`engine`]: statistic, bootstrap critical values, and the decision.
//! - [`mc`]: Monte Carlo harness and probes of the finite-sample bounds.

pub mod design;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod mc;
pub mod rng;
pub mod smoother;

pub use design::{BandwidthGrid, DesignMatrix, IndexSet, Triple};
pub use engine::{AdaptiveTest, DeltaDiagnostic, Method, TestConfig, TestResult, TripleEstimate};
pub use error::{Error, Result};
pub use linalg::SymMatrix;
pub use smoother::{CovEstimates, Kernel, Sample};

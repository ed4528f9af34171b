use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below -{tolerance:e}")]
    NotPsd { eigenvalue: f64, tolerance: f64 },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{0} is undefined for the deterministic test (beta = 0)")]
    NotApplicable(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

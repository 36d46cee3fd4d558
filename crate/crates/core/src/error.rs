use thiserror::Error;

/// A single violated constraint on a solver configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigViolation {
    pub constraint: &'static str,
    pub detail: String,
}

impl std::fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.constraint, self.detail)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("derivative order {requested} not supported (max {supported})")]
    UnsupportedOrder { requested: usize, supported: usize },

    #[error("invalid configuration: {}", format_violations(.0))]
    InvalidConfig(Vec<ConfigViolation>),

    #[error("subproblem solver hit {iterations} inner iterations without a certificate (best ratio {best_ratio:.3e})")]
    MaxInnerExceeded { iterations: usize, best_ratio: f64 },

    #[error("radial root not found: {0}")]
    RadialRoot(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("kappa must exceed 1, got {0}")]
    KappaTooSmall(f64),

    #[error("quartic subroutine requires a smooth problem (h = Zero)")]
    CompositeNotSupported,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),
}

fn format_violations(v: &[ConfigViolation]) -> String {
    v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;

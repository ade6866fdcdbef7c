use thiserror::Error;

/// Errors raised by grid construction, simulation and verification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error(
        "stability rule violated: dt = {dt:e} must be < dx^2/2 = {limit:e}; \
         increase n_t or decrease n_x"
    )]
    Stability { dt: f64, limit: f64 },

    #[error(
        "advection CFL violated: dt*(L+1) = {lhs:e} must be < dx = {dx:e}; \
         increase n_t or lower the truncation level"
    )]
    Cfl { lhs: f64, dx: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "mollifier under-resolved: support radius {radius:e} spans {cells:.2} cells (need >= 8); \
         refine the spatial grid"
    )]
    UnderResolvedMollifier { radius: f64, cells: f64 },

    #[error("domain exhausted at step {step}: |beta| = {beta:e} exceeds x_max = {x_max:e}")]
    DomainExhausted { step: usize, beta: f64, x_max: f64 },

    #[error("blow-up at step {step}, node {node}: value {value:e}")]
    BlowUp { step: usize, node: usize, value: f64 },

    #[error("quadrature did not converge{context}: estimate {estimate:e}, error {error:e}")]
    Quadrature { context: String, estimate: f64, error: f64 },

    #[error("exponent fit needs at least 6 positive points, got {0}")]
    TooFewPoints(usize),

    #[error("degenerate curve: {0}")]
    Degenerate(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("ensemble too small: {got} paths, need at least {need}")]
    TooFewPaths { got: usize, need: usize },

    #[error("invalid scaling function: {0}")]
    InvalidScaling(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// True for numerical failures (blow-up, non-convergence, exhausted domain)
    /// as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BlowUp { .. } | Error::Quadrature { .. } | Error::DomainExhausted { .. } | Error::Degenerate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PsaError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("delay tau_{index} = {value} must be strictly positive")]
    NonpositiveDelay { index: usize, value: f64 },
    #[error("first delay must be exactly zero, got {0}")]
    MissingZeroDelay(f64),
    #[error("invalid perturbation specification: {0}")]
    InvalidPerturbation(String),
    #[error("invalid discretization order N = {0}")]
    InvalidN(usize),
    #[error("point t = {t} lies outside [{lo}, 0]")]
    OutOfInterval { t: f64, lo: f64 },
    #[error("resolvent is singular at lambda = {re} + {im}j")]
    SingularResolvent { re: f64, im: f64 },
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("least-squares matrix is rank deficient (numerical rank {rank} of {cols})")]
    RankDeficient { rank: usize, cols: usize },
    #[error("eigensolver failed to converge on a {0}x{0} matrix")]
    EigensolverFailure(usize),
    #[error("bisection exceeded {0} iterations")]
    MaxIterationsExceeded(usize),
    #[error("no imaginary-axis eigenvalues at the final lower bound sigma = {0}; the imaginary-axis tolerance is too tight")]
    EmptyFrequencyAnomaly(f64),
    #[error("Gauss-Newton did not converge in {0} iterations")]
    GaussNewtonMaxIterations(usize),
    #[error("Gauss-Newton diverged (residual grew three consecutive steps)")]
    Diverged,
    #[error("all {starts} corrector starts failed (first: {first}); try a smaller prediction tolerance or a larger N")]
    AllStartsFailed { starts: usize, first: String },
    #[error("invalid grid region: {0}")]
    InvalidRegion(String),
    #[error("region too small: f >= 1/epsilon on the right edge (max f there = {max_edge_value}); enlarge re_max")]
    RegionTooSmall { max_edge_value: f64 },
    #[error("no grid node lies in the pseudospectrum inside the region")]
    EmptyPseudospectrum,
}

pub type Result<T, E = PsaError> = std::result::Result<T, E>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("sample count {got} does not match grid size {expected}")]
    SampleLength { expected: usize, got: usize },

    #[error("atom center {0} lies outside the grid")]
    AtomOutsideGrid(f64),

    #[error("cannot pair two distributions with each other")]
    DistributionPairing,

    #[error("operation needs pointwise samples but the input carries Dirac atoms")]
    NotSampled,

    #[error("derivative order {order} too high for a grid of {n} nodes")]
    InsufficientResolution { order: u32, n: usize },

    #[error("unsupported operator order {0} (supported: 1..=4)")]
    UnsupportedOrder(u32),

    #[error("unsupported input form: {0}")]
    UnsupportedForm(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("system is not biorthogonal: max |gram - I| = {deviation:.3e} exceeds {tol:.1e}")]
    NotBiorthogonal {
        gram: Vec<Vec<f64>>,
        deviation: f64,
        tol: f64,
    },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("function is not in the null space span (residual {0:.3e})")]
    OutsideNullSpace(f64),

    #[error("matrix is singular or ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("divergent moments: {0}")]
    DivergentMoments(String),

    #[error("membership rejected: {0}")]
    NonMember(String),

    #[error("phi not admissible for X = C0: {0}")]
    PhiNotAdmissible(String),

    #[error("underdetermined null space: {points} data points for a null space of dimension {dim}")]
    Underdetermined { points: usize, dim: usize },

    #[error("invalid data set: {0}")]
    InvalidData(String),

    #[error("singular interpolation system")]
    SingularSystem,

    #[error("solver did not converge within {0} iterations")]
    NonConvergence(usize),

    #[error("internal solver error: {0}")]
    Internal(String),
}

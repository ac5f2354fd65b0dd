use thiserror::Error;

#[derive(Debug, Error)]
pub enum MrError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("descriptor mismatch: {0}")]
    DescriptorMismatch(String),

    #[error("unresolved band: B*2^N = {outer:.4} exceeds 0.9*Nyquist bound {limit:.4} on axes {axes:?}")]
    UnresolvedBand { outer: f64, limit: f64, axes: Vec<usize> },

    #[error("field not decaying: boundary shell {shell:.3e} > 1e-8 * max {max:.3e}")]
    NotDecaying { shell: f64, max: f64 },

    #[error("non-integrable weight exponent {0}")]
    NonIntegrableWeight(f64),

    #[error("singular moment system (condition number {cond:.3e})")]
    SingularMoments { cond: f64 },

    #[error("trace order {j} exceeds top order {m}")]
    OrderTooLarge { j: usize, m: usize },

    #[error("pullback check failed: {0}")]
    Bijectivity(String),

    #[error("vector field degenerates: min N1 = {0:.3e}")]
    Tangential(f64),

    #[error("chart coverage gap at boundary point {0}")]
    CoverageGap(f64),

    #[error("point ({0}, {1}) lies outside the domain")]
    OutsideDomain(f64, f64),

    #[error("linear solver stalled after {iters} iterations (relative residual {residual:.3e})")]
    SolverDiverged { iters: usize, residual: f64 },

    #[error("critical compatibility case: 1-(mu+1)/q = (gamma+1)/(2p)")]
    CriticalCompatibility,

    #[error("inadmissible parameters for {theorem}: {violations}")]
    Inadmissible { theorem: String, violations: String },

    #[error("side condition violated: {0}")]
    SideCondition(String),

    #[error("degenerate family: {0}")]
    DegenerateFamily(String),

    #[error("bad binary field: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MrError>;

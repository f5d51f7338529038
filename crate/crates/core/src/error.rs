use thiserror::Error;

/// Errors raised by the numerical laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("iterated function system violates the open set condition: cells {0} and {1} overlap")]
    OverlapViolation(usize, usize),

    #[error("measure would have {atoms} atoms, above the cap of {cap}")]
    TooManyAtoms { atoms: u128, cap: usize },

    #[error("no scanned ball carries half of the reported Frostman constant")]
    NoWitness,

    #[error("grid box [-{halfwidth}, {halfwidth}] is too small: needs half-width at least {required}")]
    BoxTooSmall { halfwidth: f64, required: f64 },

    #[error("truncated density lost too much mass ({mass} < 1/2); decrease the truncation constant")]
    MassCollapse { mass: f64 },

    #[error("scale {epsilon} is below the resolution floor {floor} of the measure")]
    BelowResolution { epsilon: f64, floor: f64 },

    #[error("degenerate simplex: vertices are not affinely independent (gram determinant {0:e})")]
    DegenerateSimplex(f64),

    #[error("sphere centers are not in general position")]
    DegenerateCenters,

    #[error("sphere intersection is empty (squared radius {0:e})")]
    EmptyIntersection(f64),

    #[error("sphere intersection is tangent (squared radius {0:e})")]
    TangentIntersection(f64),

    #[error("gram matrix is singular (determinant {0:e}); point lies in the span of the centers")]
    SingularGram(f64),

    #[error("newton iteration did not converge within {0} iterations")]
    NewtonNonconvergence(usize),

    #[error("chart boundary reached: |jacobian| = {0:e}")]
    ChartBoundary(f64),

    #[error("graph is disconnected")]
    DisconnectedGraph,

    #[error("degenerate graph: {0}")]
    DegenerateGraph(String),

    #[error("configuration is off the variety (max residual {0:e})")]
    OffVariety(f64),

    #[error("partition is not admissible: {0}")]
    InadmissiblePartition(String),

    #[error("grid does not cover the required region: {0}")]
    BoxCoverage(String),

    #[error("regression needs at least {needed} points spanning {octaves} octaves")]
    InsufficientSpan { needed: usize, octaves: f64 },

    #[error("superlevel normalization failed: sup f = {0}")]
    Normalization(f64),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("frequency grid under-resolved: spacing {spacing} exceeds {limit}")]
    UnderResolved { spacing: f64, limit: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

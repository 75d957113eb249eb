use thiserror::Error;

pub type Result<T> = std::result::Result<T, GlueError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlueError {
    #[error("chart point with modulus {modulus:.3e} exceeds chart radius {radius:.3e}")]
    ChartExceeded { modulus: f64, radius: f64 },
    #[error("tangent step of length {length:.3e} exceeds injectivity gate {gate:.3e}")]
    StepTooLarge { length: f64, gate: f64 },
    #[error("points at distance {distance:.3e} are outside the injectivity gate {gate:.3e}")]
    OutOfInjectivity { distance: f64, gate: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("grid too short: {0}")]
    GridTooShort(String),
    #[error("empty point set")]
    EmptySet,
    #[error("ODE integration rejected: {0}")]
    StepRejected(String),
    #[error("degenerate subspace basis")]
    DegenerateBasis,
    #[error("joint matching violated: residual {residual:.3e}")]
    MatchingViolated { residual: f64 },
    #[error("higher-mode solve received a nonzero zero mode")]
    ModeZeroPresent,
    #[error("transversality failed: cokernel dimension {coker_dim}")]
    TransversalityFailed { coker_dim: usize },
    #[error("approximate inverse is not contractive: ratio {ratio:.3}")]
    NotContractive { ratio: f64 },
    #[error("IFT hypothesis failed: residual {residual:.3e} > h/(4C) = {limit:.3e}")]
    HypothesisFailed { residual: f64, limit: f64 },
    #[error("Newton iteration diverged after {iterations} steps (residual {residual:.3e})")]
    Diverged { iterations: usize, residual: f64 },
    #[error("gamma {0} outside (0, 1/2)")]
    GammaOutOfRange(f64),
    #[error("all window energies vanish")]
    AllZero,
    #[error("point cloud diameter {diameter:.3e} exceeds {limit:.3e}")]
    DiameterTooLarge { diameter: f64, limit: f64 },
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("bound violated: {0}")]
    BoundViolated(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

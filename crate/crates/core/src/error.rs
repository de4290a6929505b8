use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge within {levels} refinement levels on [{a}, {b}]")]
    QuadratureFailed { a: f64, b: f64, levels: u32 },

    #[error("critical point: |grad u| = {grad:.3e} is below 10*h = {limit:.3e}; residual unreliable")]
    CriticalPoint { grad: f64, limit: f64 },

    #[error("time {t} is not before the barrier blow-up time {blowup}")]
    PastBlowup { t: f64, blowup: f64 },

    #[error("mollification radius {delta} is below 2h = {min}")]
    UnderResolved { delta: f64, min: f64 },

    #[error("support overflow: {0}")]
    SupportOverflow(String),

    #[error("CFL violation: dt = {dt:.3e} exceeds the bound {bound:.3e}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("scheme produced a negative value {value:.3e} at node {node}")]
    NegativeValue { node: usize, value: f64 },

    #[error("support reached the boundary collar at t = {time}; enlarge the domain")]
    BoundaryTouched { time: f64 },

    #[error("step budget of {max_steps} exhausted at t = {time}")]
    StepBudgetExhausted { max_steps: usize, time: f64 },

    #[error("insufficient snapshots: {0}")]
    InsufficientSnapshots(String),

    #[error("incompatible grids or snapshot times: {0}")]
    Incompatible(String),

    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    #[error("test function support violation: {0}")]
    SupportViolation(String),

    #[error("time mollifier under-resolved: snapshot spacing {spacing:.3e} exceeds sigma/4 = {limit:.3e}")]
    MollifierUnderResolved { spacing: f64, limit: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("probe error: {0}")]
    Probe(String),

    #[error("empty fit range: {0}")]
    EmptyFit(String),

    #[error("solve failed at p = {p}: {source}")]
    SolveFailed {
        p: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the failure comes from the inputs rather than from the numerics.
    pub fn is_config(&self) -> bool {
        match self {
            Error::InvalidParameter(_)
            | Error::Config(_)
            | Error::Probe(_)
            | Error::UnderResolved { .. }
            | Error::SupportOverflow(_)
            | Error::Incompatible(_)
            | Error::SupportViolation(_)
            | Error::Io(_)
            | Error::Csv(_) => true,
            Error::SolveFailed { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

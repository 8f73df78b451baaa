use thiserror::Error;

/// Errors raised by the triod simulator and its analysis tools.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// `|cos|` of a junction angle reached `1 - eps`: the tension triple no
    /// longer satisfies the strict triangle inequality.
    #[error("degenerate junction angle: cosine {cosine} is within {eps} of +-1")]
    DegenerateAngle { cosine: f64, eps: f64 },

    /// `1 - c1 c2 c3` fell below the guard, the tangential velocity at the
    /// junction is no longer determined.
    #[error("degenerate junction: 1 - c1*c2*c3 = {denominator} below guard {guard}")]
    DegenerateJunction { denominator: f64, guard: f64 },

    #[error("junction Newton solve did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("length of curve {curve} collapsed to {length}")]
    LengthCollapse { curve: usize, length: f64 },

    #[error("step became unstable: max angle update {max_update} rad")]
    Instability { max_update: f64 },

    /// Minimizer of the weighted Fermat functional sits on vertex `P^(j)`
    /// (1-based index).
    #[error("weighted Fermat point coincides with vertex P{0}")]
    VertexOptimal(usize),

    #[error("endpoint triangle violates the 2pi/3 interior-angle condition at vertex P{0}")]
    A2Violation(usize),

    #[error("tension weights make vertex P{0} optimal; no interior Herring junction exists")]
    A2LikeViolation(usize),

    #[error("need at least {needed} records, got {got}")]
    InsufficientRecords { needed: usize, got: usize },

    #[error("log-linear fit needs positive samples, found {value} at t = {t}")]
    NonPositiveSamples { t: f64, value: f64 },

    #[error("eigen solver failure: {0}")]
    SolverFailure(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("at t = {time}: {source}")]
    AtTime { time: f64, source: Box<Error> },
}

impl Error {
    /// Strips any `AtTime` wrapping.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

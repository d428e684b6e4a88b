use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid cycle: {0}")]
    InvalidCycle(String),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("integrand evaluated at singular prevertex {0}")]
    Singularity(usize),
    #[error("edge {0} has an infinite endpoint")]
    DivergentEdge(usize),
    #[error("integration path failure: {0}")]
    Path(String),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("parameter problem failed on {side}: {source}")]
    Side {
        side: String,
        #[source]
        source: Box<Error>,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("configuration ({m},{n}) is obstructed")]
    Obstructed { m: usize, n: usize },
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

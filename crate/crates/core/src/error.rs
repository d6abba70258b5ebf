use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("power series for I_{nu}({z}) not converged after {terms} terms")]
    SeriesNotConverged { nu: f64, z: f64, terms: usize },

    #[error("I_{nu}({z}) overflows f64 (log value {log_value})")]
    Overflow { nu: f64, z: f64, log_value: f64 },

    #[error("quadrature did not reach tolerance {requested:e}: value {value}, error estimate {achieved:e}")]
    QuadratureNotConverged {
        value: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("test function {name} exceeds its declared sup-norm {bound} at y = {y} (|F| = {value})")]
    SupNormViolated {
        name: String,
        bound: f64,
        y: f64,
        value: f64,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_domain(
    name: &'static str,
    value: f64,
    ok: bool,
    expected: &'static str,
) -> Result<()> {
    if ok && !value.is_nan() {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            expected,
        })
    }
}

use thiserror::Error;

/// Errors raised by the analytic and simulation engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A configuration value is outside its valid range.
    #[error("invalid configuration `{parameter}`: {detail}")]
    Config { parameter: String, detail: String },

    /// A function was evaluated outside its mathematical domain.
    #[error("domain error in {function}: {detail}")]
    Domain {
        function: &'static str,
        detail: String,
    },

    /// An adaptive quadrature did not reach the requested tolerance.
    #[error(
        "quadrature for {context} did not converge: value {value:e}, \
         error estimate {achieved_error:e} after {subdivisions} subdivisions"
    )]
    Quadrature {
        context: &'static str,
        value: f64,
        achieved_error: f64,
        subdivisions: usize,
    },

    /// Sampling kept producing unusable realizations.
    #[error("degenerate configuration: {detail} (after {redraws} redraws)")]
    Degenerate { detail: String, redraws: u32 },
}

impl Error {
    pub(crate) fn config(parameter: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Config {
            parameter: parameter.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn domain(function: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            function,
            detail: detail.into(),
        }
    }

    /// True for errors coming out of numerical evaluation rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Quadrature { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

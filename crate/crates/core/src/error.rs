use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the library.
///
/// The variants are grouped by what went wrong rather than by module so that
/// callers (the CLI in particular) can map them onto exit-code classes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition.
    #[error("{context}: {message}")]
    Domain { context: &'static str, message: String },

    /// Shapes of vectors, matrices or grids do not fit together.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// Floating-point precision is insufficient for the requested computation.
    #[error("numerical failure in {context}: {message}")]
    Numerical { context: &'static str, message: String },

    /// The requested accuracy cannot be met with the given constants.
    #[error("infeasible plan: {0}")]
    Infeasible(String),

    /// Not enough pilot data to estimate the multilevel constants.
    #[error("insufficient pilot data: {0}")]
    InsufficientPilot(String),
}

impl Error {
    pub(crate) fn domain(context: &'static str, message: impl Into<String>) -> Self {
        Error::Domain {
            context,
            message: message.into(),
        }
    }

    pub(crate) fn numerical(context: &'static str, message: impl Into<String>) -> Self {
        Error::Numerical {
            context,
            message: message.into(),
        }
    }

    pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::Dimension {
                context,
                expected,
                actual,
            })
        }
    }
}

use thiserror::Error;

/// Errors raised by the channel-statistics routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The symmetric eigensolver failed to converge.
    #[error("eigensolver did not converge (order {order}, aperture {length_wl} wavelengths)")]
    EigenSolve { order: usize, length_wl: f64 },

    /// The Moschopoulos series hit its term cap before the tail bound fell below tolerance.
    #[error("psi series not converged after {q_max} terms (tail bound {tail_bound:e} > {tol:e})")]
    SeriesNotConverged { q_max: usize, tail_bound: f64, tol: f64 },

    /// The closed-form capacity cannot be evaluated accurately in double precision.
    #[error("closed-form capacity outside its numerical regime: {0}")]
    NumericalRegime(String),

    /// Adaptive quadrature could not reach the requested tolerance.
    #[error("quadrature failed to reach tolerance {tol:e} (estimated error {estimate:e})")]
    Quadrature { tol: f64, estimate: f64 },

    /// A Karhunen-Loeve draw was requested from a decomposition without eigenfunctions.
    #[error("spectral decomposition does not retain eigenfunction samples")]
    MissingEigenfunctions,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

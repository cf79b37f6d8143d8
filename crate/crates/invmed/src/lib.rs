//! Reconstruction of two-dimensional inhomogeneous acoustic media from
//! far-field scattering data.
//!
//! The library has three layers:
//!
//! * a forward solver for the Lippmann-Schwinger integral equation of
//!   time-harmonic acoustic scattering (periodized-kernel FFT convolution
//!   plus a matrix-free Krylov solver, [`forward`]),
//! * assembly of the Frechet derivative of the contrast-to-far-field map
//!   ([`jacobian`]),
//! * regularized reconstruction loops: full-data Levenberg-Marquardt
//!   ([`regularize`]) and two sequential Kalman-filter variants
//!   ([`kalman`]).
//!
//! [`harness`] wires these into reproducible desk-scale experiments with
//! CSV/PNG outputs; [`specfun`] and [`grid`] provide the cylinder functions
//! and sampling geometry everything else is built on.

pub mod grid;
pub mod harness;
pub mod jacobian;
pub mod kalman;
pub mod linalg;
pub mod regularize;
pub mod specfun;

pub mod forward;

pub(crate) mod par;

use num_complex::Complex64;

/// Errors shared across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Incompatible shapes or sizes.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A dense factorization or solve failed.
    #[error("linear algebra failure: {0}")]
    Linalg(String),

    /// The iterative solver ran out of iterations. `history` holds the
    /// relative residual after every restart cycle; `direction` identifies
    /// the offending incident direction when the solve came from a sweep.
    #[error("Krylov solver stalled at relative residual {residual:.3e} after {iterations} iterations")]
    SolverStalled {
        residual: f64,
        iterations: usize,
        history: Vec<f64>,
        direction: Option<usize>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Convenience alias used throughout: the scalar field of every operator
/// in the library.
pub type C64 = Complex64;

//! Numerical laboratory for nonlocal p-Laplace operators and their
//! mean-value kernels.
//!
//! The crate evaluates three operator families on smooth scalar fields in
//! dimensions one through three:
//!
//! * the fractional p-Laplacian, a singular integral over all of space,
//!   together with the annular weight and mean-value kernel attached to it
//!   ([`frac_p`]);
//! * gradient-dependent nonlocal operators that integrate second
//!   differences over a spherical cap around the gradient direction, and
//!   the nonlocal infinity-Laplacian driven by a single ray ([`grad_frac`]);
//! * their local counterparts: the p-Laplacian, its normalized form, the
//!   infinity-Laplacian, and the matching sphere means ([`local_ops`]).
//!
//! Every operator comes with the expansion residual that its mean-value
//! characterization predicts, and [`asymptotics`] fits the observed decay
//! orders against the predicted ones on dyadic grids.  All integrals run
//! on Gauss rules with explicit endpoint-singularity handling
//! ([`quadrature`]) and all normalizing constants are closed Gamma-function
//! forms ([`constants`]).
//!
//! Evaluation points, radii, and exponents are validated up front; failures
//! surface as [`Error`] values rather than NaNs.

pub mod asymptotics;
pub mod constants;
pub mod fields;
pub mod frac_p;
pub mod geom;
pub mod grad_frac;
pub mod local_ops;
pub mod quadrature;

/// Error type shared by every module in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Parameters or evaluation points outside an operator's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A mean-value denominator too close to zero to divide by.
    #[error("degenerate weight: {0}")]
    DegenerateWeight(String),

    /// A far-field tail that cannot be bounded by the declared decay.
    #[error("tail estimate failed: {0}")]
    TailDivergent(String),

    /// Near-origin samples inconsistent with the declared expansion model.
    #[error("near-origin model violated: {0}")]
    NearOrigin(String),

    /// An iteration or internal consistency check that did not converge.
    #[error("convergence failure: {0}")]
    Convergence(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// A computed integral value together with the honesty flag of its far
/// field: `tail_truncated` reports that some truncation radius hit the
/// configured cap, so the dropped tail may exceed the usual tolerance.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct Evaluation {
    pub value: f64,
    pub tail_truncated: bool,
}

impl Evaluation {
    /// Merges the flags of two partial results.
    pub fn combine(self, other: Evaluation, value: f64) -> Evaluation {
        Evaluation {
            value,
            tail_truncated: self.tail_truncated || other.tail_truncated,
        }
    }
}

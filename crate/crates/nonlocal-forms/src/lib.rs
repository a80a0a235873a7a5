//! Numerical laboratory for symmetric nonlocal Dirichlet forms.
//!
//! The crate evaluates quadratic forms
//! `E^k_D(u,u) = ∫_D ∫_D (u(y)-u(x))² k(x,y) dy dx` for jump kernels `k`
//! with translation-invariant envelopes `L ≤ k ≤ U`, and provides
//!
//! * built-in kernel families (fractional, masked, thorn, tabulated radial),
//! * checkers for the integral conditions (U0), (U1), (U1'), (L1), (U2)
//!   and the sine-integral condition A'(α), each reporting a verdict and
//!   the best empirical constant,
//! * singular-kernel quadrature for radial integrals and the double form
//!   integral, with a-posteriori error estimates,
//! * cutoff functions, Whitney ball covers, the convolution-form
//!   inequality and comparability scans between `E^k` and the fractional
//!   reference energy `E^α`,
//! * Fourier-side machinery (Lévy multipliers, Plancherel evaluation of
//!   global forms, lower-bound characterization tests),
//! * a piecewise-constant Galerkin solver for the Dirichlet problem
//!   `E(u,φ) = 0` with exterior data, plus weak-Harnack audits and
//!   Hölder-exponent estimation via oscillation decay.
//!
//! Everything is deterministic for a fixed seed and budget; scans are
//! data-parallel but accumulate in a fixed order.

pub mod conditions;
pub mod forms;
pub mod geom;
pub mod kernels;
pub mod profiles;
pub mod quadrature;
pub mod solver;
pub mod spectral;
pub mod testfn;
pub mod whitney;

pub use geom::Ball;
pub use kernels::{frac_constant, Alpha, KernelSpec, ThornParams};
pub use profiles::{Decay, Profile};
pub use quadrature::{FormValue, QuadratureBudget};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("integral diverged under refinement: {0}")]
    Divergent(String),
    #[error("quadrature budget exhausted: {0}")]
    BudgetExhausted(String),
    #[error("kernel evaluated to a non-finite value at {0}")]
    NonFiniteKernel(String),
    #[error("linear solver failed: {0}")]
    Solver(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("kernel spec schema error: {0}")]
    Schema(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

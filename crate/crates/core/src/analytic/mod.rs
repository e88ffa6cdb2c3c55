//! Complex-analytic side of the Legendre family: hypergeometric periods, the
//! maps `T` and `Lambda`, Weierstrass functions, the fiberwise exponential map
//! and its inverse on torus coordinates, and the cusp monodromy.
//!
//! Everything runs in double precision. Tolerances are expressed relative to
//! [`WORKING_EPS`] where they depend on the arithmetic.

mod expmap;
mod hyper;
mod weierstrass;

pub use expmap::{
    affine_difference, monodromy_residuals, exp_fiber, exp_map, monodromy_shift_0, monodromy_shift_1, omega_times_xi, rho_tilde,
    rho_tilde_product, xi_map, xi_map_from, xi_map_product, ComplexFiberPoint, FiberContext,
    TorusCoordinate,
};
pub use hyper::{
    hyper_f, hyper_f_agm, hyper_f_series, in_sigma, j_invariant, periods, sigma_grid, tau_of_lambda,
    PeriodPair, SIGMA_MARGIN,
};
pub use weierstrass::{
    e_values, lambda_of_tau, r_of_tau, weierstrass_p, weierstrass_p_periods, weierstrass_p_prime,
    weierstrass_p_prime_periods, Lattice, MIN_IM_TAU,
};

use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Unit roundoff of the working precision.
pub const WORKING_EPS: f64 = f64::EPSILON;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("lambda = {0} lies outside the domain of this map")]
    DomainError(C64),
    #[error("z = {z} is (numerically) a lattice point for tau = {tau}")]
    PoleError { z: C64, tau: C64 },
    #[error("Im(tau) = {0} is below the supported minimum")]
    LowImaginaryPart(f64),
    #[error("elliptic logarithm iteration did not converge (residual {0:e})")]
    NoConvergence(f64),
    #[error("torus coordinate has odd length {0}")]
    OddLength(usize),
}

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

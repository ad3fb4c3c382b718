//! Quadrature-based moment methods (QMOM and Gaussian EQMOM) for the 1-D
//! Boltzmann equation with BGK and Shakhov relaxation.
//!
//! The crate is layered bottom-up:
//!
//! - [`polykit`]: polynomials, Gaussian moments, the smoothing operator `D_θ`,
//!   real-root extraction and half-Gaussian moments.
//! - [`inversion`]: forward moment maps, QMOM/EQMOM inversion, the forward
//!   Jacobian and its closed-form determinant.
//! - [`closure`]: closure coefficients, the polynomials `g` and `c`, and the
//!   companion coefficient matrix `A(M)`.
//! - [`spectral`]: hyperbolicity audits of `A(M)`.
//! - [`stability`]: source terms and the structural stability checks.
//! - [`solver`]: a first-order kinetic finite-volume Riemann solver and the
//!   free-streaming reference solution.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN-rejecting guards

pub mod closure;
pub mod error;
pub mod inversion;
pub mod linalg;
pub mod polykit;
pub mod solver;
pub mod spectral;
pub mod stability;

pub use error::{Error, Result};

//! Numerical toolkit for the sub-Riemannian geometry of the affine-additive
//! group: the solvable Lie group `R x (half plane)` with multiplication
//! `(a', l' + i t') * (a, l + i t) = (a' + a, l'(l + i t) + i t')`.
//!
//! The crate provides
//!
//! * group operations, the contact form, horizontal frames and the Haar
//!   measure ([`group`]),
//! * horizontal curves, lengths, line integrals and foliations compatible
//!   with the volume ([`curves`]),
//! * quasiconformal diagnostics for contact maps: horizontal derivatives,
//!   Beltrami quotient, distortion, Jacobian and contact residuals
//!   ([`maps`]),
//! * the catalog of linear and radial stretch maps together with the
//!   curve-family scenarios they are extremal for ([`stretch`]),
//! * a 4-modulus engine with a closed-form path and a discrete convex
//!   solver, plus mean-distortion functionals ([`modulus`]),
//! * report builders that re-check the extremality statements end to end
//!   ([`verify`]), and a command line front end ([`cli`]).
//!
//! Most capabilities have a runnable demo under `examples/`; try
//! `cargo run --example foliation_modulus`.

// Validation guards are deliberately written `!(a > b)` so that NaN falls
// into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod curves;
pub mod group;
pub mod maps;
pub mod modulus;
pub mod quad;
pub mod report;
pub mod stretch;
pub mod verify;

use thiserror::Error;

/// Crate-wide error type.
///
/// Numerical validation failures carry the measured quantity so callers can
/// report how far an input is from acceptable.
#[derive(Debug, Error)]
pub enum Error {
    #[error("lambda must be positive, got {0}")]
    LambdaNotPositive(f64),
    #[error("psi must lie in (-pi/2, pi/2), got {0}")]
    PsiOutOfRange(f64),
    #[error("tangent is not horizontal: contact residual {residual:e} exceeds {tol:e}")]
    NonHorizontalTangent { residual: f64, tol: f64 },
    #[error("curve is not horizontal at s = {s}: contact residual {residual:e}")]
    NonHorizontalCurve { s: f64, residual: f64 },
    #[error("zero horizontal velocity at s = {s}")]
    ZeroVelocity { s: f64 },
    #[error("degenerate horizontal derivative: |Z f_I| = {z_abs:e}, |Zbar f_I| = {zbar_abs:e}")]
    DegenerateDerivative { z_abs: f64, zbar_abs: f64 },
    #[error("map is not quasiconformal at the point: |mu| = {0}")]
    NotQuasiconformalAtPoint(f64),
    #[error("invalid scenario parameters: {0}")]
    InvalidParameters(String),
    #[error("perturbed curve leaves the scenario domain: {0}")]
    PerturbationLeavesDomain(String),
    #[error("foliation fails the volume decomposition: relative residual {0:e}")]
    FoliationInvalid(f64),
    #[error("minimal stretching property fails on the fiber at delta = ({0}, {1})")]
    MspViolated(f64, f64),
    #[error("distortion varies along a fiber: spread {0:e}")]
    DistortionNotFiberConstant(f64),
    #[error("empty curve family")]
    EmptyFamily,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

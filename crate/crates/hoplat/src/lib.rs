//! Higher-order polynomial lattice rules over GF(2).
//!
//! This crate constructs rank-1 polynomial lattice point sets whose generating
//! vectors are found by component-by-component (CBC) search against a computable
//! quality criterion, and evaluates the resulting rules: randomization by digital
//! shift, the tent (baker) transformation, worst-case error in a weighted Sobolev
//! space of dominating mixed smoothness, and theoretical error bounds to compare
//! against.
//!
//! Modules, bottom up:
//!
//! * [`f2poly`]: arithmetic in GF(2)\[x\] on bit-packed `u64` polynomials,
//!   irreducibility and primitivity searches, Laurent series digit extraction.
//! * [`points`]: rule parameters, exact dyadic point generation, digital shifts,
//!   tent transform.
//! * [`kernel`]: Walsh functions, the smoothness constants, the per-coordinate
//!   criterion weight function omega and its series oracle, Bernoulli polynomials
//!   and the reproducing kernel.
//! * [`criterion`]: the quality criterion B computed from points, its dual-space
//!   truncated oracle, and the averaging-argument error bounds.
//! * [`cbc`]: slow (per-candidate) and fast (FFT-convolution) CBC construction.
//! * [`qmc`]: randomized integration, kernel-based worst-case error, convergence
//!   studies.
//! * [`format`]: rule files, weight specifications, point set export.

pub mod accum;
pub mod cbc;
pub mod criterion;
pub mod f2poly;
pub mod format;
pub mod kernel;
pub mod points;
pub mod qmc;

use std::fmt;

/// Errors surfaced by rule validation and the numeric routines.
///
/// Programming-contract violations (e.g. mismatched vector lengths inside hot
/// loops) panic instead; `Error` is reserved for conditions reachable from
/// user-supplied parameters and I/O.
#[derive(Debug)]
pub enum Error {
    /// Division or reduction by the zero polynomial.
    DivisionByZero,
    /// A modulus that must be irreducible is not.
    NotIrreducible(f2poly::F2Poly),
    /// Polynomial degree outside the supported range.
    DegreeOutOfRange { degree: u32, max: u32 },
    /// Smoothness parameter outside the supported range (2..=32).
    AlphaUnsupported(u32),
    /// lambda outside (1/(2 alpha), 1].
    LambdaOutOfRange { lambda: f64, alpha: u32 },
    /// A constructed rule failed its theoretical bound check; this signals an
    /// implementation bug, never bad input.
    BoundViolated { value: f64, bound: f64 },
    /// Parameter validation failure with a human-readable reason.
    InvalidParameter(String),
    Io(std::io::Error),
    Json(serde_json::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DivisionByZero => write!(f, "division by the zero polynomial"),
            Error::NotIrreducible(p) => write!(f, "polynomial {} is not irreducible", p),
            Error::DegreeOutOfRange { degree, max } => {
                write!(f, "degree {} exceeds the supported maximum {}", degree, max)
            }
            Error::AlphaUnsupported(a) => {
                write!(f, "smoothness alpha = {} is not supported (need 2 <= alpha <= 32)", a)
            }
            Error::LambdaOutOfRange { lambda, alpha } => write!(
                f,
                "lambda = {} outside the admissible range (1/{}, 1]",
                lambda,
                2 * alpha
            ),
            Error::BoundViolated { value, bound } => write!(
                f,
                "criterion value {} exceeds the guaranteed bound {}; this is a bug",
                value, bound
            ),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {}", msg),
            Error::Io(e) => write!(f, "i/o error: {}", e),
            Error::Json(e) => write!(f, "json error: {}", e),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            Error::Json(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use std::fmt;

/// Crate-wide error type; variants name the failure mode, not the call site.
#[derive(Debug)]
pub enum Error {
    /// An iteration hit its step budget without meeting its residual target.
    NoConvergence { context: &'static str },
    /// Root finding was asked for on a constant polynomial.
    DegreeZero,
    /// |f'| underflowed at a Newton iterate (seed sits on a critical point).
    DerivativeUnderflow,
    /// A boundary sample of the winding contour is suspiciously close to a zero.
    BoundaryZeroSuspected,
    /// V0 - E0 does not have the four simple real roots of a double well.
    NotDoubleWell { reason: String },
    /// |V0'| at a real turning point is below the simpleness guard.
    NearDegenerateTurningPoint { at: f64, dv: f64 },
    /// Nearest-neighbor label transport could not match old and new roots.
    LabelAmbiguity,
    /// A continuation step exceeded the safe fraction of the root separation.
    StepTooLarge,
    /// An analytic-continuation branch choice became inconsistent.
    BranchJump,
    /// The perturbation integral of assumption-strength |dI/de| is ~ 0.
    A7Violation,
    /// Stokes seeding found an unexpected number of direction candidates.
    SeedCountMismatch { expected: usize, found: usize },
    /// Two square-root branches coincide along a traced curve.
    BranchAmbiguity,
    /// A shifted operator is numerically singular (pivot underflow).
    SingularShift,
    /// Winding-count certification disagrees with the claimed root multiset.
    CertificationMismatch { winding: i64, claimed: usize },
    /// FD and WKB spectra in a window have irreconcilable cardinalities.
    MatchCardinalityMismatch { fd: usize, wkb: usize },
    /// Eigenvalue-pair tracking across a parameter step lost its pair.
    PairLost,
    /// Configuration file is missing, malformed, or fails validation.
    Config(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NoConvergence { context } => write!(f, "no convergence in {context}"),
            Error::DegreeZero => write!(f, "polynomial has degree zero"),
            Error::DerivativeUnderflow => write!(f, "derivative underflow at a Newton iterate"),
            Error::BoundaryZeroSuspected => {
                write!(f, "boundary sample too close to a zero of the contour integrand")
            }
            Error::NotDoubleWell { reason } => write!(f, "not a double well: {reason}"),
            Error::NearDegenerateTurningPoint { at, dv } => {
                write!(f, "near-degenerate turning point at {at} (|V0'| = {dv:.3e})")
            }
            Error::LabelAmbiguity => write!(f, "turning-point label transport is ambiguous"),
            Error::StepTooLarge => write!(f, "continuation step too large for root separation"),
            Error::BranchJump => write!(f, "square-root branch continuation jumped sheets"),
            Error::A7Violation => write!(f, "perturbation integral vanishes (W has no effect)"),
            Error::SeedCountMismatch { expected, found } => {
                write!(f, "expected {expected} seed directions, found {found}")
            }
            Error::BranchAmbiguity => write!(f, "square-root branches indistinguishable on curve"),
            Error::SingularShift => write!(f, "shifted operator is numerically singular"),
            Error::CertificationMismatch { winding, claimed } => {
                write!(f, "winding count {winding} does not certify {claimed} claimed roots")
            }
            Error::MatchCardinalityMismatch { fd, wkb } => {
                write!(f, "cannot match {fd} FD eigenvalues against {wkb} WKB roots")
            }
            Error::PairLost => write!(f, "eigenvalue pair lost during continuation"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use core::fmt;

/// Errors raised by model construction, energy evaluation and minimization.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A model parameter is outside its admissible range.
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    /// `1/theta` is not an integer, so no commensurate supercell exists.
    IncommensurateTheta { theta: f64, inverse: f64 },
    /// The grid does not span the moire cell of the parameters it is used with.
    GridMismatch { domain_length: f64, expected: f64 },
    /// Field, gradient or initial point has the wrong number of entries.
    DimensionMismatch { expected: usize, found: usize },
    /// Neighbouring atoms in one layer moved at least half a lattice spacing
    /// relative to each other.
    ChainCrossing {
        layer: u8,
        index: usize,
        separation: f64,
    },
    /// The Cauchy-Born stiffness is not positive.
    DegenerateStiffness { kappa_tilde: f64 },
    /// A pair potential failed its construction checks.
    InvalidPotential { reason: &'static str, at: f64 },
    /// The objective returned NaN or infinity at a point that had to be finite.
    NonFiniteObjective { value: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter {
                name,
                value,
                reason,
            } => write!(f, "invalid parameter {name} = {value}: {reason}"),
            Error::IncommensurateTheta { theta, inverse } => write!(
                f,
                "theta = {theta} is incommensurate: 1/theta = {inverse} is not an integer"
            ),
            Error::GridMismatch {
                domain_length,
                expected,
            } => write!(
                f,
                "grid spans {domain_length} but the moire cell has length {expected}"
            ),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "expected {expected} entries, found {found}")
            }
            Error::ChainCrossing {
                layer,
                index,
                separation,
            } => write!(
                f,
                "layer {layer} atoms {index} and {} are {separation} lattice spacings apart",
                index + 1
            ),
            Error::DegenerateStiffness { kappa_tilde } => {
                write!(f, "Cauchy-Born stiffness {kappa_tilde} is not positive")
            }
            Error::InvalidPotential { reason, at } => {
                write!(f, "pair potential rejected at z = {at}: {reason}")
            }
            Error::NonFiniteObjective { value } => {
                write!(f, "objective evaluated to non-finite value {value}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

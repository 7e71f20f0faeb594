use thiserror::Error;

/// Position of a syntax problem in the ODE source text (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at {at}: {message}")]
    Syntax { at: Location, message: String },

    #[error("unknown token {token:?} at {at}")]
    UnknownToken { at: Location, token: String },

    #[error("derivative order {order} at {at} exceeds the supported maximum of 9")]
    DerivativeOrder { at: Location, order: usize },

    #[error("empty ODE text")]
    EmptyInput,

    #[error("parameter `{0}` is not bound")]
    UnboundParameter(String),

    #[error("negative power of a derivative (order {order}) cannot be cleared")]
    NegativeDerivativePower { order: u8 },

    #[error("negative power of a sum is not a differential polynomial")]
    NonMonomialNegativePower,

    #[error("equation is identically zero")]
    IdenticallyZero,

    #[error("equation reduces to the nonzero constant {0}; it has no solutions")]
    IdenticallyConstant(String),

    #[error("inverting a series that is identically zero")]
    ZeroSeriesInversion,

    #[error("series truncation insufficient: residual known through index {have}, need {need}")]
    TruncationInsufficient { have: i64, need: i64 },

    #[error("degenerate family: resonance polynomial is identically zero")]
    DegenerateFamily,

    #[error("leading coefficient is zero or does not solve the leading-order equation (|residual| = {0:e})")]
    BadLeadingCoefficient(f64),

    #[error("singular linear step at non-resonant order {index}")]
    SingularStep { index: i64 },

    #[error("not Laurent (branch order {0}); elliptic construction undefined")]
    NotLaurent(u32),

    #[error("no periodic candidate: {0}")]
    NoPeriodicCandidate(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Pinney quadratic form vanishes at t = {t}")]
    PinneyDomain { t: f64 },

    #[error("singular input: {0}")]
    SingularInput(String),

    #[error("degenerate Moebius coefficients: ad - bc = 0")]
    DegenerateMobius,

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("trajectories do not share sample times")]
    MismatchedGrids,

    #[error("exponent unresolved: {0}")]
    ExponentUnresolved(String),
}

pub type Result<T> = std::result::Result<T, Error>;

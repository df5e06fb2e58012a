use thiserror::Error;

use crate::tree::BoundaryBall;

/// Errors raised by scalar arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("prime mismatch: {0} vs {1}")]
    PrimeMismatch(u32, u32),
    #[error("quadratic extension mismatch")]
    ExtensionMismatch,
    #[error("division by zero")]
    DivisionByZero,
    #[error("cancellation left {surviving} digit(s), floor is {floor}")]
    Cancellation { surviving: u32, floor: u32 },
    #[error("frobenius is only defined on unramified extensions")]
    RamifiedUnsupported,
    #[error("{0} is a square in Q_p, not a valid extension descriptor")]
    SquareDescriptor(i64),
    #[error("unramified quadratic extensions require an odd prime")]
    EvenPrimeUnramified,
    #[error("malformed scalar record: {0}")]
    Malformed(String),
}

/// Errors from projective geometry and the tree.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error(transparent)]
    Arith(#[from] ArithError),
    #[error("element is not hyperbolic")]
    NotHyperbolic,
    #[error("pole: evaluation point coincides with a divisor point")]
    Pole,
    #[error("point is rational over Q_p; reduction is undefined")]
    RationalPoint,
    #[error("point reduces to an edge midpoint (ramified distance)")]
    RamifiedMidpoint,
    #[error("singular matrix")]
    Singular,
    #[error("need {needed} digits of a coordinate, only {available} known")]
    PrecisionExhausted { needed: i64, available: i64 },
}

/// A failed ping-pong check, with the offending data.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificateViolation {
    #[error("generator {0} is not hyperbolic")]
    NotHyperbolic(usize),
    #[error("balls {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("generator {generator} maps the complement of its repelling ball to {image:?}, not inside its attracting ball")]
    Inclusion { generator: usize, image: BoundaryBall },
    #[error("expected {expected} balls, got {got}")]
    BallCount { expected: usize, got: usize },
    #[error("geometry failure: {0}")]
    Geometry(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroupError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("certification failed: {0}")]
    Certificate(#[from] CertificateViolation),
    #[error("unsupported group shape: {0}")]
    UnsupportedGroupShape(String),
    #[error("coset action is not transitive")]
    NotTransitive,
    #[error("coset action is malformed: {0}")]
    BadCosetAction(String),
    #[error("place index {0} out of range")]
    BadPlace(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("fundamental domain not closed at depth {0}")]
    DepthInsufficient(usize),
    #[error("measure lattice rank {got}, expected {expected}")]
    RankMismatch { expected: usize, got: usize },
    #[error("ball not resolved within depth {0}")]
    BallTooDeep(usize),
    #[error("expected one ball per place ({expected}), got {got}")]
    PlaceCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("only {stable} digits stabilized, {required} required")]
    NonStabilized { stable: u32, required: u32 },
    #[error("cycle point {0} lies inside the limit cover")]
    PointInLimitCover(String),
    #[error("cycle term has {got} places, group has {expected}")]
    PlaceCount { expected: usize, got: usize },
    #[error("value is not an elementary tensor")]
    NonElementary,
    #[error("fubini mismatch at basis index {index}: {digits} digits agree")]
    FubiniMismatch { index: usize, digits: u32 },
}

impl From<ArithError> for IntegrationError {
    fn from(e: ArithError) -> Self {
        IntegrationError::Geom(GeomError::Arith(e))
    }
}

impl From<ArithError> for MeasureError {
    fn from(e: ArithError) -> Self {
        MeasureError::Geom(GeomError::Arith(e))
    }
}

impl From<ArithError> for GroupError {
    fn from(e: ArithError) -> Self {
        GroupError::Geom(GeomError::Arith(e))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JacobianError {
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error("value is not an elementary tensor")]
    NonElementary,
    #[error("character is not primitive")]
    NonPrimitiveCharacter,
    #[error("period valuation matrix is singular")]
    DegenerateLattice,
    #[error("unit parts agree to full precision ({0} digits); exactness not certified")]
    PrecisionInsufficient(u32),
    #[error("period must have positive valuation")]
    NonPositivePeriod,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

impl From<ArithError> for JacobianError {
    fn from(e: ArithError) -> Self {
        JacobianError::Integration(e.into())
    }
}

impl From<MeasureError> for JacobianError {
    fn from(e: MeasureError) -> Self {
        JacobianError::Integration(e.into())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeckeError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Jacobian(#[from] JacobianError),
    #[error("conjugated generator {generator} is not in the target group within word length {bound}")]
    NotASubgroup { generator: usize, bound: usize },
    #[error("word bound {0} exhausted")]
    BoundExhausted(usize),
    #[error("subgroup has infinite index")]
    InfiniteIndex,
    #[error("image point {0} hits the limit cover")]
    PointCollision(String),
    #[error("morphism data mismatch: {0}")]
    Mismatch(String),
}

impl From<IntegrationError> for HeckeError {
    fn from(e: IntegrationError) -> Self {
        HeckeError::Jacobian(e.into())
    }
}

impl From<GroupError> for JacobianError {
    fn from(e: GroupError) -> Self {
        JacobianError::Integration(e.into())
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

impl From<GeomError> for JacobianError {
    fn from(e: GeomError) -> Self {
        JacobianError::Integration(e.into())
    }
}

//! Error types shared across the library.

use thiserror::Error;

/// Errors produced by parsing, jet evaluation, and the geometry engine.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),

    #[error("exponent of `^` must be a constant")]
    NonConstantExponent,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("jet order {requested} exceeds configured maximum {max}")]
    OrderTooLarge { requested: usize, max: usize },

    #[error("multi-index of order {index_order} exceeds jet order {jet_order}")]
    IndexOutOfOrder {
        index_order: usize,
        jet_order: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate immersion: Jacobian rank deficient (sigma_min/sigma_max = {0:.3e})")]
    DegenerateImmersion(f64),

    #[error("finite-difference stencil leaves the domain box")]
    StencilOutsideDomain,

    #[error("umbilic point: traceless second fundamental form vanishes")]
    UmbilicPoint,

    #[error("shape operators do not satisfy DDVV equality: {0}")]
    NotEquality(String),

    #[error("expected a surface (m = 2), got m = {0}")]
    NotASurface(usize),

    #[error("base is not contained in the unit sphere (max |1 - |u|^2| = {0:.3e})")]
    NotOnSphere(f64),

    #[error("base does not lie in the open upper half-space")]
    NotInUpperHalfSpace,

    #[error("inversion center lies on the image of the sampled domain")]
    CenterOnImage,

    #[error("projection pole lies on the image of the sampled domain")]
    PoleOnImage,

    #[error("unknown catalog surface `{0}`")]
    UnknownName(String),

    #[error("gauge alignment failure: {0}")]
    GaugeAlignmentFailure(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use alloc::vec::Vec;

/// Errors produced by the detection core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid shape {0:?}: every dimension must be at least 1")]
    InvalidShape(Vec<usize>),

    #[error("data length {len} does not match shape product {expected}")]
    DataLength { len: usize, expected: usize },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("unfolding mode {mode} out of range 1..={max}")]
    ModeOutOfRange { mode: usize, max: usize },

    #[error("matrix of {rows}x{cols} cannot fold into the requested shape (expected {expected_rows}x{expected_cols})")]
    FoldMismatch {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("singular value decomposition did not converge")]
    SvdNoConvergence,

    #[error("cannot factorize {0}: value must be at least 2")]
    Factorize(usize),

    #[error("patch {patch_h}x{patch_w} does not fit in image {height}x{width}")]
    PatchTooLarge {
        patch_h: usize,
        patch_w: usize,
        height: usize,
        width: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    #[error("solver diverged at iteration {iteration}: {reason}")]
    Diverged {
        iteration: usize,
        reason: &'static str,
    },

    #[error("annotation box lies outside the image")]
    AnnotationOutOfBounds,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: &'static str) -> Error {
    Error::InvalidParameter { name, reason }
}

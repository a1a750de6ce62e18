//! Small infrared target detection with a double-weighted multi-granularity
//! patch tensor.
//!
//! An image is cut into overlapping windows whose spatial axes are split
//! into their prime factors, producing a high-order patch tensor. An ADMM
//! solver separates that tensor into a background that is low-rank in every
//! tensor-train unfolding (with automatically balanced mode weights) and a
//! sparse target term whose penalty is shaped by a steering-kernel local
//! structure prior. The target image is then segmented with an adaptive
//! threshold.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// `!(x > 0.0)` deliberately also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod image;
pub mod metrics;
pub mod mgipt;
pub mod pipeline;
pub mod prior;
pub mod solver;
pub mod svd;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use image::Image;
pub use mgipt::{prime_factorize, PatchModel};
pub use pipeline::{detect, segment, DetectConfig, Detection, DetectionReport, SegmentConfig};
pub use prior::{PriorMaps, SteeringConfig};
pub use solver::{
    admm_solve, auto_weights, soft_shrink, svt, Admm, PsiMode, Solution, SolverConfig,
};
pub use tensor::{Matrix, Tensor};

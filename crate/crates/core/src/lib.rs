//! Pure algorithms for H&E stain normalization and the surrounding
//! preprocessing and evaluation pipeline.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. File formats,
//! directory scanning, batch scheduling and the command line live in the
//! `stainforge` crate.
//!
//! * [`color`]: RGB to optical density conversion and tissue masking.
//! * [`acd`]: adaptive color deconvolution (stain separation, objective,
//!   gradient and fit).
//! * [`normalize`]: template extraction and recombination.
//! * [`augment`]: seeded affine augmentation with nearest-neighbour sampling.
//! * [`split`]: stratified train/validation/test splits.
//! * [`metrics`]: confusion matrix, derived rates, ROC and AUC.
#![no_std]
// `!(x < limit)` checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod acd;
pub mod augment;
pub mod color;
mod error;
pub mod image;
pub mod linalg;
pub mod metrics;
pub mod normalize;
pub mod split;
#[cfg(any(test, feature = "synth"))]
pub mod synth;

pub use crate::error::{Error, Result};
pub use crate::image::{OdImage, RgbImage, TissueMask};
pub use crate::split::{Label, Magnification};

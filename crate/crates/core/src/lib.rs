//! Semi-supervised medical image segmentation with scaling-up, multi-class
//! object mixing and meta pseudo labels.
//!
//! The crate is organised bottom-up:
//!
//! - [`image`], [`rng`], [`preprocess`]: grid types, the counter-based random
//!   stream and the standard normalize/resize/rotate-flip ops.
//! - [`augment`]: class masks, donor jitter, multi-class mixing, 2x2
//!   scaling-up concatenation and the combined pipeline.
//! - [`net`]: a small convolutional per-pixel classifier with exact gradients.
//! - [`mpl`]: the teacher/student trainer with consistency and feedback terms.
//! - [`metrics`]: Dice, Hausdorff and HD95 with per-class aggregation.
//! - [`data`]: synthetic cardiac-like phantoms, splits and PNG manifests.
//! - [`cli`]: the `sm2c` command line front end.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod augment;
pub mod cli;
pub mod data;
pub mod error;
pub mod image;
mod io_util;
pub mod metrics;
pub mod mpl;
pub mod net;
pub mod preprocess;
pub mod rng;
mod transform;

pub use error::{Error, Result};
pub use image::{BinaryMask, Image, LabelMap};
pub use rng::RngState;
pub use transform::Interp;

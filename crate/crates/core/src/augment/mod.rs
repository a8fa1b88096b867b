//! Object-mixing augmentation: class masks, affine jitter of donor objects,
//! multi-class pasting, 2x2 scaling-up concatenation, and the full pipeline
//! that chains them.

mod affine;
mod extra;
mod mix;
mod pipeline;

pub use affine::{jitter_donor, AffineParams, JitterRanges, MixDonor};
pub use extra::{extra_augment, Cutout, Deformation, IntensityShift, Technic};
pub use mix::{compose_mask, extract_class_mask, multi_class_mix, scaling_up_concat};
pub use pipeline::{replay, sm2c, sm2c_traced, DonorDraw, Mixed, Sm2cConfig, Sm2cTrace, TileTrace};

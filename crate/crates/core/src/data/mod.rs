//! Synthetic cardiac-like phantoms, dataset splits and the PNG + JSON-lines
//! on-disk format.

mod manifest;
mod phantom;
pub mod png;
mod split;

pub use manifest::{load_manifest, save_manifest, ManifestRecord, MANIFEST_FILE};
pub use phantom::{gen_phantom, PhantomSpec, Structure};
pub use split::{generate_dataset, make_splits, split_digest, Sample, SplitCounts, SplitDataset};

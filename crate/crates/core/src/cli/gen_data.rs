use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};

use super::{read_text, to_json};
use crate::data::{generate_dataset, save_manifest, split_digest, PhantomSpec, SplitCounts};
use crate::error::{Error, Result};
use crate::io_util::write_atomic;

pub const DATASET_SPEC_FILE: &str = "phantom_spec.json";
pub const DATASET_SPLITS_FILE: &str = "splits.json";

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 10)]
    pub labeled: usize,
    #[arg(long, default_value_t = 200)]
    pub unlabeled: usize,
    #[arg(long, default_value_t = 20)]
    pub validation: usize,
    #[arg(long, default_value_t = 50)]
    pub test: usize,
    #[arg(long)]
    pub image_size: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// PhantomSpec as JSON; individual flags override its fields.
    #[arg(long)]
    pub spec: Option<std::path::PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitSummary {
    seed: u64,
    counts: SplitCounts,
    digest: String,
}

pub(super) fn run(args: &GenDataArgs, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut spec = match &args.spec {
        Some(p) => serde_json::from_str(&read_text(p)?).map_err(|e| Error::format(p, e.to_string()))?,
        None => PhantomSpec::default(),
    };
    if let Some(n) = args.image_size {
        spec.image_size = n;
    }
    if let Some(s) = args.noise {
        spec.noise_sigma = s;
    }
    spec.validate()?;
    let seed = seed.unwrap_or(0);
    let counts = SplitCounts::new(args.labeled, args.unlabeled, args.validation, args.test);
    let ds = generate_dataset(&spec, counts, seed)?;
    let manifest = save_manifest(&ds, out)?;
    write_atomic(&out.join(DATASET_SPEC_FILE), to_json(&spec).as_bytes())?;
    let summary = SplitSummary {
        seed,
        counts,
        digest: split_digest(&ds),
    };
    write_atomic(&out.join(DATASET_SPLITS_FILE), to_json(&summary).as_bytes())?;
    println!(
        "wrote {} samples ({} labeled, {} unlabeled, {} validation, {} test) to {}",
        counts.total(),
        counts.labeled,
        counts.unlabeled,
        counts.validation,
        counts.test,
        manifest.display()
    );
    Ok(())
}

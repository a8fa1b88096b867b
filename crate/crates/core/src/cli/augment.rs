use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use super::{load_dataset, read_text, to_json};
use crate::augment::{replay, sm2c_traced, Mixed, Sm2cConfig, Sm2cTrace};
use crate::data::png::{write_image_png, write_label_png};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::image::{Image, LabelMap};
use crate::io_util::write_atomic;
use crate::mpl::parse_parts;
use crate::rng::RngState;

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Dataset directory or manifest file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Split to draw labeled tiles from.
    #[arg(long, default_value = "labeled")]
    pub split: String,
    /// Number of mixed outputs.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 4)]
    pub sigma: usize,
    /// Enabled parts, e.g. `1,2,3`.
    #[arg(long, default_value = "1,2,3")]
    pub parts: String,
    /// Disable donor jitter (part 3) regardless of `--parts`.
    #[arg(long)]
    pub no_jitter: bool,
    /// Re-render the outputs recorded in a sidecar instead of drawing new ones.
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

/// Everything needed to reproduce one mixed output exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSidecar {
    pub seed: u64,
    pub index: usize,
    pub manifest: String,
    pub split: String,
    pub sample_ids: Vec<String>,
    pub sigma: usize,
    pub concat_enabled: bool,
    pub mix_enabled: bool,
    pub jitter_enabled: bool,
    pub config: Sm2cConfig,
    pub trace: Sm2cTrace,
    pub outputs: Vec<(String, String)>,
}

fn write_outputs(mixed: &Mixed, out: &Path, stem: &str) -> Result<Vec<(String, String)>> {
    let pairs = mixed.pairs();
    let mut names = Vec::new();
    for (t, (img, lbl)) in pairs.iter().enumerate() {
        let suffix = if pairs.len() == 1 {
            String::new()
        } else {
            format!("_tile{t}")
        };
        let image = format!("{stem}{suffix}_image.png");
        let label = format!("{stem}{suffix}_label.png");
        write_image_png(img, &out.join(&image))?;
        write_label_png(lbl, &out.join(&label))?;
        names.push((image, label));
    }
    Ok(names)
}

fn batch_of(samples: &[&Sample]) -> Result<Vec<(Image, LabelMap)>> {
    samples
        .iter()
        .map(|s| Ok((s.image.clone(), s.require_label()?.clone())))
        .collect()
}

fn split_samples<'a>(ds: &'a crate::data::SplitDataset, split: &str) -> Result<&'a [Sample]> {
    ds.splits()
        .into_iter()
        .find(|(name, _)| *name == split)
        .map(|(_, s)| s)
        .ok_or_else(|| Error::invalid(format!("unknown split {split:?}")))
}

fn replay_sidecar(path: &Path, out: &Path) -> Result<()> {
    let sidecar: AugmentSidecar =
        serde_json::from_str(&read_text(path)?).map_err(|e| Error::format(path, e.to_string()))?;
    let ds = load_dataset(Path::new(&sidecar.manifest))?;
    let pool = split_samples(&ds, &sidecar.split)?;
    let chosen = sidecar
        .sample_ids
        .iter()
        .map(|id| {
            pool.iter()
                .find(|s| &s.id == id)
                .ok_or_else(|| Error::invalid(format!("sample {id} not found in split {}", sidecar.split)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mixed = replay(&batch_of(&chosen)?, &sidecar.config, &sidecar.trace)?;
    let names = write_outputs(&mixed, out, &format!("replay_{:03}", sidecar.index))?;
    println!("replayed {} into {} file pair(s)", path.display(), names.len());
    Ok(())
}

pub(super) fn run(args: &AugmentArgs, seed: Option<u64>, out: &Path) -> Result<()> {
    if let Some(path) = &args.replay {
        return replay_sidecar(path, out);
    }
    let data = args
        .data
        .as_ref()
        .ok_or_else(|| Error::invalid("--data is required unless --replay is given"))?;
    let mut parts = parse_parts(&args.parts)?;
    if args.no_jitter {
        parts.retain(|&p| p != 3);
    }
    let cfg = Sm2cConfig::from_parts(&parts, args.sigma)?;
    let ds = load_dataset(data)?;
    let pool = split_samples(&ds, &args.split)?;
    if pool.len() < cfg.k {
        return Err(Error::invalid(format!(
            "split {:?} has {} labeled samples; mixing needs at least {}",
            args.split,
            pool.len(),
            cfg.k
        )));
    }
    let seed = seed.unwrap_or(0);
    let root = RngState::new(seed);
    for index in 0..args.count {
        let mut rng = root.split(index as u64);
        let chosen: Vec<&Sample> = rng
            .choose_distinct(pool.len(), cfg.k)
            .into_iter()
            .map(|i| &pool[i])
            .collect();
        let (mixed, trace) = sm2c_traced(&batch_of(&chosen)?, &cfg, &mut rng)?;
        let stem = format!("mix_{index:03}");
        let outputs = write_outputs(&mixed, out, &stem)?;
        let sidecar = AugmentSidecar {
            seed,
            index,
            manifest: std::fs::canonicalize(data)
                .unwrap_or_else(|_| data.clone())
                .display()
                .to_string(),
            split: args.split.clone(),
            sample_ids: chosen.iter().map(|s| s.id.clone()).collect(),
            sigma: cfg.sigma,
            concat_enabled: cfg.concat_enabled,
            mix_enabled: cfg.mix_enabled,
            jitter_enabled: cfg.jitter_enabled,
            config: cfg.clone(),
            trace,
            outputs,
        };
        write_atomic(&out.join(format!("{stem}.json")), to_json(&sidecar).as_bytes())?;
    }
    println!("wrote {} mixed output(s) to {}", args.count, out.display());
    Ok(())
}

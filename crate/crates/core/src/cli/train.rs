use std::path::{Path, PathBuf};

use clap::Args;

use super::{load_dataset, resolve_config, TrainFlags};
use crate::error::Result;
use crate::mpl::train_to_dir;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory or manifest file.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
}

pub(super) fn run(args: &TrainArgs, seed: Option<u64>, config: Option<&Path>, out: &Path) -> Result<()> {
    let cfg = resolve_config(seed, config, &args.flags)?;
    let ds = load_dataset(&args.data)?;
    let (output, paths) = train_to_dir(&cfg, &ds, out)?;
    let last_val = output.log.iter().rev().find_map(|r| r.val_dice);
    println!(
        "trained {} iterations (seed {}); student checkpoint {}",
        cfg.total_iters,
        cfg.seed,
        paths.student.display()
    );
    if let Some(d) = last_val {
        println!("final validation Dice {:.4}", d);
    }
    Ok(())
}

//! Command line front end: dataset generation, augmentation preview,
//! training, evaluation, ablation sweeps and gradient checks.
//!
//! Every command is deterministic under `--seed`. Outputs go under
//! `--out-dir`; input paths are taken as given.

mod ablate;
mod augment;
mod eval;
mod gen_data;
mod gradcheck;
mod train;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::mpl::{parse_parts, TrainConfig};

pub use ablate::{ablation_arms, run_ablation, AblationArm, AblationReport, AblationRow, ABLATION_REPORT};
pub use augment::AugmentSidecar;
pub use eval::{evaluate_split, EvalReport, TableColumn, EVAL_REPORT};
pub use gen_data::{DATASET_SPEC_FILE, DATASET_SPLITS_FILE};
pub use gradcheck::{feedback_cosines, run_checks, CheckReport, CheckResult, GRADCHECK_REPORT};

#[derive(Debug, Parser)]
#[command(
    name = "sm2c",
    version,
    about = "Scaling-up multi-class mixing and meta pseudo label training"
)]
pub struct Cli {
    /// Seed for every random draw of the command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Training config file with one `key = value` per line.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory that receives all outputs.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a phantom dataset with splits, PNGs and a manifest.
    GenData(gen_data::GenDataArgs),
    /// Write mixed image/label pairs with replay sidecars.
    Augment(augment::AugmentArgs),
    /// Train teacher and student networks.
    Train(train::TrainArgs),
    /// Score a checkpoint on a dataset split.
    Eval(eval::EvalArgs),
    /// Run the part-toggle matrix and the sigma sweep on one dataset.
    Ablate(ablate::AblateArgs),
    /// Check analytic gradients and the feedback estimate against finite differences.
    Gradcheck(gradcheck::GradcheckArgs),
}

/// Training options shared by `train` and `ablate`. Each flag overrides the
/// config file, which overrides the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    /// Enabled augmentation parts, e.g. `1,2,3` or `none`.
    #[arg(long)]
    pub parts: Option<String>,
    /// Object groups per tile (1 to 4).
    #[arg(long)]
    pub sigma: Option<usize>,
    /// Extra augmentation technic (1 deformation, 2 cutout, 3 intensity).
    #[arg(long)]
    pub technic: Option<u8>,
    /// `concat` or `big_batch`.
    #[arg(long)]
    pub scaling_mode: Option<String>,
    /// Train the teacher on labeled data only.
    #[arg(long)]
    pub labeled_only: bool,
    #[arg(long)]
    pub iters: Option<usize>,
    /// `approx`, `exact_fd` or `off`.
    #[arg(long)]
    pub feedback_mode: Option<String>,
    /// Any config key, as `key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl TrainFlags {
    fn apply(&self, cfg: &mut TrainConfig) -> Result<()> {
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects key=value, got {kv:?}")))?;
            cfg.set(k.trim(), v)?;
        }
        if let Some(p) = &self.parts {
            cfg.set_parts(&parse_parts(p)?)?;
        }
        if let Some(s) = self.sigma {
            cfg.sm2c.sigma = s;
        }
        if let Some(t) = self.technic {
            cfg.set("technic", &t.to_string())?;
        }
        if let Some(m) = &self.scaling_mode {
            cfg.set("scaling_mode", m)?;
        }
        if self.labeled_only {
            cfg.labeled_only = true;
        }
        if let Some(n) = self.iters {
            cfg.total_iters = n;
        }
        if let Some(m) = &self.feedback_mode {
            cfg.set("feedback_mode", m)?;
        }
        Ok(())
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Resolves the training configuration: defaults, then the config file,
/// then `--seed` and the command's flags.
pub fn resolve_config(cli_seed: Option<u64>, config: Option<&Path>, flags: &TrainFlags) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = config {
        cfg.apply_text(&read_text(path)?)?;
    }
    if let Some(seed) = cli_seed {
        cfg.seed = seed;
    }
    flags.apply(&mut cfg)?;
    cfg.validate()?;
    Ok(cfg)
}

pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::GenData(a) => gen_data::run(a, cli.seed, out),
        Command::Augment(a) => augment::run(a, cli.seed, out),
        Command::Train(a) => train::run(a, cli.seed, cli.config.as_deref(), out),
        Command::Eval(a) => eval::run(a, out),
        Command::Ablate(a) => ablate::run(a, cli.seed, cli.config.as_deref(), out),
        Command::Gradcheck(a) => gradcheck::run(a, cli.seed, out),
    }
}

/// Parses `std::env::args`, runs the command and returns the process exit
/// code: 0 on success, 1 for invalid input or configuration, 2 for numeric
/// failures and 3 for failed checks.
pub fn main_with_exit_code() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Loads a dataset from a directory holding a manifest or from the manifest
/// file itself.
pub fn load_dataset(path: &Path) -> Result<crate::data::SplitDataset> {
    if path.is_dir() {
        crate::data::load_manifest(&path.join(crate::data::MANIFEST_FILE))
    } else {
        crate::data::load_manifest(path)
    }
}

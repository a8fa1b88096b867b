use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::eval::{evaluate_split, EvalReport, TableColumn};
use super::{load_dataset, resolve_config, to_json, TrainFlags};
use crate::data::{split_digest, SplitDataset};
use crate::error::{Error, Result};
use crate::io_util::write_atomic;
use crate::mpl::{train_to_dir, TrainConfig, TRAIN_LOG};

pub const ABLATION_REPORT: &str = "ablation.json";

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Dataset directory or manifest file.
    #[arg(long)]
    pub data: PathBuf,
    /// `all`, `parts` or `sigma`.
    #[arg(long, default_value = "all")]
    pub arms: String,
    #[command(flatten)]
    pub flags: TrainFlags,
}

/// One configuration of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationArm {
    /// `parts` or `sigma`.
    pub table: String,
    pub name: String,
    pub parts: Vec<u8>,
    pub sigma: usize,
}

/// The part-toggle matrix (baseline, 1, 2, 1+2, 2+3, 1+2+3) and the sigma
/// sweep 1..=4 with all parts on. Arms without mixing use sigma 1.
pub fn ablation_arms(which: &str, base_sigma: usize) -> Result<Vec<AblationArm>> {
    let part_sets: [&[u8]; 6] = [&[], &[1], &[2], &[1, 2], &[2, 3], &[1, 2, 3]];
    let parts = part_sets.iter().map(|p| AblationArm {
        table: "parts".into(),
        name: if p.is_empty() {
            "parts_none".into()
        } else {
            format!("parts_{}", p.iter().map(u8::to_string).collect::<Vec<_>>().join("_"))
        },
        parts: p.to_vec(),
        sigma: if p.contains(&2) { base_sigma } else { 1 },
    });
    let sigmas = (1..=4).map(|s| AblationArm {
        table: "sigma".into(),
        name: format!("sigma_{s}"),
        parts: vec![1, 2, 3],
        sigma: s,
    });
    match which {
        "all" => Ok(parts.chain(sigmas).collect()),
        "parts" => Ok(parts.collect()),
        "sigma" => Ok(sigmas.collect()),
        other => Err(Error::Config(format!("--arms {other:?}: expected all, parts or sigma"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub arm: AblationArm,
    pub split_digest: String,
    /// SHA-256 of the arm's iteration log.
    pub log_digest: String,
    /// Earlier arm with an identical configuration whose results were reused.
    pub reused_from: Option<String>,
    pub table: Vec<TableColumn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seed: u64,
    pub total_iters: usize,
    pub split_digest: String,
    pub shared_splits: bool,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        for table in ["parts", "sigma"] {
            let rows: Vec<&AblationRow> = self.rows.iter().filter(|r| r.arm.table == table).collect();
            if rows.is_empty() {
                continue;
            }
            let names: Vec<&str> = rows[0].table.iter().map(|c| c.name.as_str()).collect();
            out.push_str(&format!("{:<14}", if table == "parts" { "parts" } else { "sigma" }));
            for n in &names {
                out.push_str(&format!("| {:>12} {:>7} ", format!("{n} DSC"), "HD95"));
            }
            out.push('\n');
            for r in rows {
                let label = if table == "parts" {
                    if r.arm.parts.is_empty() {
                        "baseline".to_string()
                    } else {
                        r.arm.parts.iter().map(u8::to_string).collect::<Vec<_>>().join("+")
                    }
                } else {
                    r.arm.sigma.to_string()
                };
                out.push_str(&format!("{label:<14}"));
                for c in &r.table {
                    out.push_str(&format!("| {:>12.2} {:>7.2} ", 100.0 * c.dsc.mean, c.hd95.mean));
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Trains and scores every arm on one dataset. Arm outputs go to
/// `out/<arm name>/`.
pub fn run_ablation(base: &TrainConfig, ds: &SplitDataset, arms: &[AblationArm], out: &Path) -> Result<AblationReport> {
    let digest = split_digest(ds);
    let mut rows: Vec<AblationRow> = Vec::new();
    let mut done: Vec<(TrainConfig, usize)> = Vec::new();
    for arm in arms {
        let mut cfg = base.clone();
        cfg.set_parts(&arm.parts)?;
        cfg.sm2c.sigma = arm.sigma;
        cfg.validate()?;
        if let Some(&(_, i)) = done.iter().find(|(c, _)| *c == cfg) {
            let mut row = rows[i].clone();
            row.arm = arm.clone();
            row.reused_from = Some(rows[i].arm.name.clone());
            rows.push(row);
            continue;
        }
        let dir = out.join(&arm.name);
        let (output, _) = train_to_dir(&cfg, ds, &dir)?;
        let log = std::fs::read(dir.join(TRAIN_LOG)).map_err(|e| Error::io(dir.join(TRAIN_LOG), e))?;
        let records = evaluate_split(Some(&output.student), &ds.test, ds.num_classes)?;
        let report = EvalReport::from_records(Some(dir.display().to_string()), "test", records)?;
        write_atomic(&dir.join(super::EVAL_REPORT), to_json(&report).as_bytes())?;
        done.push((cfg, rows.len()));
        rows.push(AblationRow {
            arm: arm.clone(),
            split_digest: split_digest(ds),
            log_digest: hex(&log),
            reused_from: None,
            table: report.table,
        });
    }
    Ok(AblationReport {
        seed: base.seed,
        total_iters: base.total_iters,
        shared_splits: rows.iter().all(|r| r.split_digest == digest),
        split_digest: digest,
        rows,
    })
}

pub(super) fn run(args: &AblateArgs, seed: Option<u64>, config: Option<&Path>, out: &Path) -> Result<()> {
    let base = resolve_config(seed, config, &args.flags)?;
    if base.labeled_only {
        return Err(Error::Config(
            "ablation arms need the semi-supervised trainer; drop --labeled-only".into(),
        ));
    }
    let arms = ablation_arms(&args.arms, base.sm2c.sigma)?;
    let ds = load_dataset(&args.data)?;
    let report = run_ablation(&base, &ds, &arms, out)?;
    write_atomic(&out.join(ABLATION_REPORT), to_json(&report).as_bytes())?;
    let table = report.render_table();
    write_atomic(&out.join("ablation.txt"), table.as_bytes())?;
    print!("{table}");
    Ok(())
}

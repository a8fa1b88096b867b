use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use super::{load_dataset, to_json};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::io_util::write_atomic;
use crate::metrics::{aggregate, evaluate_labels, Aggregate, MeanStd, MetricsRecord};
use crate::net::{load_checkpoint, predict_hard, NetParams};

pub const EVAL_REPORT: &str = "eval.json";

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset directory or manifest file.
    #[arg(long)]
    pub data: PathBuf,
    /// Network checkpoint to score.
    #[arg(long, required_unless_present = "ground_truth")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Score the ground truth against itself instead of a checkpoint.
    #[arg(long)]
    pub ground_truth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableColumn {
    pub name: String,
    pub dsc: MeanStd,
    pub hd95: MeanStd,
}

/// Table-shaped report: per-class and mean DSC and HD95 with standard
/// deviations, plus the full-HD column and per-sample records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub checkpoint: Option<String>,
    pub split: String,
    pub num_samples: usize,
    pub table: Vec<TableColumn>,
    pub hd: BTreeMap<String, MeanStd>,
    pub degenerate: BTreeMap<String, usize>,
    pub records: Vec<MetricsRecord>,
}

impl EvalReport {
    pub fn from_records(checkpoint: Option<String>, split: &str, records: Vec<MetricsRecord>) -> Result<Self> {
        let agg: Aggregate = aggregate(&records)?;
        let cols = agg.classes.iter().chain(std::iter::once(&agg.mean));
        Ok(Self {
            checkpoint,
            split: split.to_string(),
            num_samples: agg.num_samples,
            table: cols
                .clone()
                .map(|c| TableColumn {
                    name: c.name.clone(),
                    dsc: c.dsc,
                    hd95: c.hd95,
                })
                .collect(),
            hd: cols.clone().map(|c| (c.name.clone(), c.hd)).collect(),
            degenerate: cols.map(|c| (c.name.clone(), c.degenerate_count)).collect(),
            records,
        })
    }

    /// The "Mean" column.
    pub fn mean(&self) -> &TableColumn {
        self.table.last().expect("table has a mean column")
    }

    pub fn render_table(&self) -> String {
        let mut head = String::from("| metric ");
        let mut dsc = String::from("| DSC(%) ");
        let mut hd95 = String::from("| HD95   ");
        for c in &self.table {
            head.push_str(&format!("| {:>14} ", c.name));
            dsc.push_str(&format!(
                "| {:>14} ",
                format!("{:.2}({:.2})", 100.0 * c.dsc.mean, c.dsc.std)
            ));
            hd95.push_str(&format!("| {:>14} ", format!("{:.2}({:.2})", c.hd95.mean, c.hd95.std)));
        }
        format!("{head}|\n{dsc}|\n{hd95}|\n")
    }
}

/// Scores `params` (or the ground truth itself when `params` is `None`) on
/// labeled samples.
pub fn evaluate_split(params: Option<&NetParams>, samples: &[Sample], num_classes: u8) -> Result<Vec<MetricsRecord>> {
    if let Some(p) = params {
        if p.arch.classes() != num_classes as usize {
            return Err(Error::invalid(format!(
                "checkpoint predicts {} classes but the dataset has {}",
                p.arch.classes(),
                num_classes
            )));
        }
    }
    samples
        .iter()
        .map(|s| {
            let truth = s.require_label()?;
            let pred = match params {
                Some(p) => predict_hard(p, &s.image)?,
                None => truth.clone(),
            };
            evaluate_labels(&pred, truth, s.image.spacing(), &s.id)
        })
        .collect()
}

pub(super) fn run(args: &EvalArgs, out: &Path) -> Result<()> {
    let ds = load_dataset(&args.data)?;
    let samples = ds
        .splits()
        .into_iter()
        .find(|(n, _)| *n == args.split)
        .map(|(_, s)| s)
        .ok_or_else(|| Error::invalid(format!("unknown split {:?}", args.split)))?;
    if samples.is_empty() {
        return Err(Error::invalid(format!("split {:?} is empty", args.split)));
    }
    let params = match (&args.checkpoint, args.ground_truth) {
        (_, true) => None,
        (Some(p), false) => Some(load_checkpoint(p)?),
        (None, false) => return Err(Error::invalid("--checkpoint is required")),
    };
    let records = evaluate_split(params.as_ref(), samples, ds.num_classes)?;
    let source = if args.ground_truth {
        None
    } else {
        args.checkpoint.as_ref().map(|p| p.display().to_string())
    };
    let report = EvalReport::from_records(source, &args.split, records)?;
    write_atomic(&out.join(EVAL_REPORT), to_json(&report).as_bytes())?;
    let table = report.render_table();
    write_atomic(&out.join("eval.txt"), table.as_bytes())?;
    print!("{table}");
    Ok(())
}

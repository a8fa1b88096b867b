use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::{extra_augment, Mixed};
use crate::data::{Sample, SplitDataset};
use crate::error::{Error, Result};
use crate::image::{Image, LabelMap};
use crate::io_util::write_atomic;
use crate::metrics::dice;
use crate::net::{load_checkpoint, poly_lr, predict_hard, save_checkpoint, sgd_step, Architecture, NetParams, Role};
use crate::preprocess::{standard_augment, StandardAugment};
use crate::rng::RngState;

use super::config::{FeedbackMode, TrainConfig};
use super::losses::{
    consistency_loss_on, feedback_with, student_update, teacher_supervised_loss, LabeledBatch, PseudoBatch,
};

/// Per-iteration losses. Terms that the configuration does not compute are
/// absent rather than zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    #[serde(rename = "L_S_u", default, skip_serializing_if = "Option::is_none")]
    pub l_s_u: Option<f64>,
    #[serde(rename = "L_S_l", default, skip_serializing_if = "Option::is_none")]
    pub l_s_l: Option<f64>,
    #[serde(rename = "L_T_l")]
    pub l_t_l: f64,
    #[serde(rename = "L_T_u", default, skip_serializing_if = "Option::is_none")]
    pub l_t_u: Option<f64>,
    #[serde(rename = "L_T_feedback", default, skip_serializing_if = "Option::is_none")]
    pub l_t_feedback: Option<f64>,
    #[serde(rename = "L_T_total")]
    pub l_t_total: f64,
}

impl LossBreakdown {
    fn finalize(mut self) -> Self {
        self.l_t_total = self.l_t_l + self.l_t_u.unwrap_or(0.0) + self.l_t_feedback.unwrap_or(0.0);
        self
    }

    fn first_non_finite(&self) -> Option<&'static str> {
        [
            ("L_S_u", self.l_s_u),
            ("L_S_l", self.l_s_l),
            ("L_T_l", Some(self.l_t_l)),
            ("L_T_u", self.l_t_u),
            ("L_T_feedback", self.l_t_feedback),
            ("L_T_total", Some(self.l_t_total)),
        ]
        .into_iter()
        .find(|(_, v)| v.is_some_and(|v| !v.is_finite()))
        .map(|(n, _)| n)
    }
}

/// One line of the iteration log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub iter: usize,
    pub lr_s: f64,
    pub lr_t: f64,
    pub omega: f64,
    #[serde(flatten)]
    pub losses: LossBreakdown,
    /// Mean foreground Dice of the evaluated network on the validation split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_dice: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl LogRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("log record serializes")
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// The network that is evaluated: the student, or the teacher itself in
    /// labeled-only mode.
    pub student: NetParams,
    pub teacher: NetParams,
    pub log: Vec<LogRecord>,
}

const STREAM_TEACHER_INIT: u64 = 1;
const STREAM_STUDENT_INIT: u64 = 2;
const STREAM_LABELED_PICK: u64 = 3;
const STREAM_UNLABELED_PICK: u64 = 4;
const STREAM_LABELED_AUG: u64 = 5;
const STREAM_UNLABELED_AUG: u64 = 6;
const STREAM_MIX: u64 = 7;

/// Mean over samples of the mean foreground-class Dice.
pub fn mean_dice(params: &NetParams, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples to score"));
    }
    let mut total = 0.0;
    for s in samples {
        let truth = s.require_label()?;
        let pred = predict_hard(params, &s.image)?;
        let c = truth.num_classes();
        let mut per = 0.0;
        for k in 1..c {
            per += dice(&pred.class_mask(k), &truth.class_mask(k))?;
        }
        total += per / (c - 1).max(1) as f64;
    }
    Ok(total / samples.len() as f64)
}

fn pick(n: usize, k: usize, rng: &mut RngState) -> Vec<usize> {
    if k <= n {
        rng.choose_distinct(n, k)
    } else {
        (0..k).map(|_| rng.below(n)).collect()
    }
}

fn initial_params(cfg: &TrainConfig, classes: usize, root: &RngState) -> Result<(NetParams, NetParams)> {
    let arch = Architecture::with_widths(cfg.width1, cfg.width2, classes);
    arch.validate()?;
    if let Some(path) = &cfg.warm_start {
        let p = load_checkpoint(path)?;
        if p.arch != arch {
            return Err(Error::Config(format!(
                "warm-start checkpoint {} does not match the configured architecture",
                path.display()
            )));
        }
        return Ok((p.clone().with_role(Role::Teacher), p.with_role(Role::Student)));
    }
    let teacher = NetParams::init(arch.clone(), Role::Teacher, &mut root.split(STREAM_TEACHER_INIT));
    let student = NetParams::init(arch, Role::Student, &mut root.split(STREAM_STUDENT_INIT));
    Ok((teacher, student))
}

fn labeled_batch(cfg: &TrainConfig, ds: &SplitDataset, t: u64, root: &RngState) -> Result<(Vec<Image>, Vec<LabelMap>)> {
    let mut pick_rng = root.split(STREAM_LABELED_PICK).split(t);
    let mut aug_rng = root.split(STREAM_LABELED_AUG).split(t);
    let mut images = Vec::with_capacity(cfg.batch_labeled);
    let mut labels = Vec::with_capacity(cfg.batch_labeled);
    for i in pick(ds.labeled.len(), cfg.batch_labeled, &mut pick_rng) {
        let s = &ds.labeled[i];
        let y = s.require_label()?;
        let (x, y) = if cfg.standard_aug {
            standard_augment(&s.image, y, &mut aug_rng)?
        } else {
            (s.image.clone(), y.clone())
        };
        images.push(x);
        labels.push(y);
    }
    Ok((images, labels))
}

fn unlabeled_batch(cfg: &TrainConfig, ds: &SplitDataset, t: u64, root: &RngState) -> Result<Vec<Image>> {
    let mut pick_rng = root.split(STREAM_UNLABELED_PICK).split(t);
    let mut aug_rng = root.split(STREAM_UNLABELED_AUG).split(t);
    pick(ds.unlabeled.len(), cfg.unlabeled_per_iter(), &mut pick_rng)
        .into_iter()
        .map(|i| {
            let img = &ds.unlabeled[i].image;
            if cfg.standard_aug {
                let blank = LabelMap::background(img.height(), img.width(), ds.num_classes);
                Ok(StandardAugment::sample(&mut aug_rng).apply(img, &blank)?.0)
            } else {
                Ok(img.clone())
            }
        })
        .collect()
}

fn omega_at(cfg: &TrainConfig, t: usize) -> f64 {
    let ramp = cfg.omega_ramp * cfg.total_iters as f64;
    if ramp > 0.0 {
        cfg.omega * (t as f64 / ramp).min(1.0)
    } else {
        cfg.omega
    }
}

fn check_dataset(cfg: &TrainConfig, ds: &SplitDataset) -> Result<()> {
    if ds.labeled.is_empty() {
        return Err(Error::invalid("labeled split is empty"));
    }
    if ds.validation.is_empty() && cfg.val_interval > 0 {
        return Err(Error::invalid("validation split is empty"));
    }
    if !cfg.labeled_only && ds.unlabeled.is_empty() {
        return Err(Error::invalid("unlabeled split is empty"));
    }
    Ok(())
}

/// Runs training, appending one record per logging interval to `log`. On a
/// non-finite loss a diagnostic record is appended and a numeric error is
/// returned.
pub fn train_with_log(
    cfg: &TrainConfig,
    ds: &SplitDataset,
    log: &mut Vec<LogRecord>,
) -> Result<(NetParams, NetParams)> {
    cfg.validate()?;
    check_dataset(cfg, ds)?;
    let root = RngState::new(cfg.seed);
    let (mut teacher, mut student) = initial_params(cfg, ds.num_classes as usize, &root)?;
    let mix_cfg = cfg.effective_sm2c();
    let total = cfg.total_iters;

    for t in 0..total {
        let lr_s = poly_lr(t, total, cfg.eta_s, cfg.lr_power)?;
        let lr_t = poly_lr(t, total, cfg.eta_t, cfg.lr_power)?;
        let omega = omega_at(cfg, t);
        let (x_l, y_l) = labeled_batch(cfg, ds, t as u64, &root)?;
        let (l_t_l, mut g_t) = teacher_supervised_loss(&teacher, &x_l, &y_l)?;
        let mut losses = LossBreakdown {
            l_t_l,
            ..LossBreakdown::default()
        };

        if !cfg.labeled_only {
            let x_u = unlabeled_batch(cfg, ds, t as u64, &root)?;
            let pl_u = x_u
                .iter()
                .map(|x| predict_hard(&teacher, x))
                .collect::<Result<Vec<_>>>()?;

            let update = student_update(&student, &x_u, &pl_u, lr_s)?;
            losses.l_s_u = Some(update.loss);

            let mut mix_rng = root.split(STREAM_MIX).split(t as u64);
            let mut pairs: Vec<(Image, LabelMap)> = x_u.iter().cloned().zip(pl_u.iter().cloned()).collect();
            if let Some(technic) = cfg.technic {
                for p in &mut pairs {
                    *p = extra_augment(&p.0, &p.1, technic.id(), &mut mix_rng)?;
                }
            }
            let mut l_t_u = 0.0;
            let groups = pairs.len() / mix_cfg.k;
            for group in pairs.chunks(mix_cfg.k) {
                let mixed: Mixed = crate::augment::sm2c(group, &mix_cfg, &mut mix_rng)?;
                let (l, g) = consistency_loss_on(&teacher, &mixed, omega)?;
                l_t_u += l / groups as f64;
                g_t.add_scaled(&g, 1.0 / groups as f64);
            }
            losses.l_t_u = Some(l_t_u);

            if cfg.feedback_mode != FeedbackMode::Off {
                let fb = feedback_with(
                    &teacher,
                    &student,
                    &update.params,
                    LabeledBatch {
                        images: &x_l,
                        labels: &y_l,
                    },
                    PseudoBatch {
                        images: &x_u,
                        labels: &pl_u,
                    },
                    &update.grad,
                    lr_s,
                    cfg.feedback_mode,
                )?;
                losses.l_t_feedback = Some(fb.loss());
                g_t.add_scaled(&fb.grad, 1.0);
            }
            student = update.params;
        }

        let losses = losses.finalize();
        let last = t + 1 == total;
        let log_now = t % cfg.log_interval == 0 || last;
        let mut record = LogRecord {
            iter: t,
            lr_s,
            lr_t,
            omega,
            losses,
            val_dice: None,
            error: None,
        };
        let bad = record
            .losses
            .first_non_finite()
            .map(str::to_string)
            .or_else(|| (!g_t.is_finite()).then(|| "teacher gradient".to_string()));
        if let Some(what) = bad {
            let msg = format!("{what} is not finite at iteration {t}");
            record.error = Some(msg.clone());
            log.push(record);
            return Err(Error::Numeric(msg));
        }
        teacher = sgd_step(&teacher, &g_t, lr_t)?;

        if cfg.val_interval > 0 && ((t + 1) % cfg.val_interval == 0 || last) {
            let evaluated = if cfg.labeled_only { &teacher } else { &student };
            record.val_dice = Some(mean_dice(evaluated, &ds.validation)?);
        }
        if log_now || record.val_dice.is_some() {
            log.push(record);
        }
    }
    if cfg.labeled_only {
        student = teacher.clone().with_role(Role::Student);
    }
    Ok((student, teacher))
}

/// Trains with [`train_with_log`] and returns everything in memory.
pub fn train(cfg: &TrainConfig, ds: &SplitDataset) -> Result<TrainOutput> {
    let mut log = Vec::new();
    let (student, teacher) = train_with_log(cfg, ds, &mut log)?;
    Ok(TrainOutput { student, teacher, log })
}

pub const STUDENT_CHECKPOINT: &str = "student.ckpt";
pub const TEACHER_CHECKPOINT: &str = "teacher.ckpt";
pub const TRAIN_LOG: &str = "train_log.jsonl";
pub const CONFIG_FILE: &str = "config.txt";

/// Paths written by [`train_to_dir`].
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub student: PathBuf,
    pub teacher: PathBuf,
    pub log: PathBuf,
    pub config: PathBuf,
}

impl RunArtifacts {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            student: dir.join(STUDENT_CHECKPOINT),
            teacher: dir.join(TEACHER_CHECKPOINT),
            log: dir.join(TRAIN_LOG),
            config: dir.join(CONFIG_FILE),
        }
    }
}

fn render_log(log: &[LogRecord]) -> String {
    log.iter().map(|r| r.to_json() + "\n").collect()
}

/// Trains and writes the config, log and both checkpoints under `dir`. The
/// log is written even when training aborts.
pub fn train_to_dir(cfg: &TrainConfig, ds: &SplitDataset, dir: &Path) -> Result<(TrainOutput, RunArtifacts)> {
    let paths = RunArtifacts::in_dir(dir);
    write_atomic(&paths.config, cfg.to_text().as_bytes())?;
    let mut log = Vec::new();
    let result = train_with_log(cfg, ds, &mut log);
    write_atomic(&paths.log, render_log(&log).as_bytes())?;
    let (student, teacher) = result?;
    save_checkpoint(&student, &paths.student)?;
    save_checkpoint(&teacher, &paths.teacher)?;
    Ok((TrainOutput { student, teacher, log }, paths))
}

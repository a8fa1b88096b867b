use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::augment::{Sm2cConfig, Technic};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    /// First-order estimate `h * grad CE(pl, teacher)`.
    Approx,
    /// Central differences through an actual student step; oracle use only.
    ExactFd,
    Off,
}

impl FeedbackMode {
    pub fn name(self) -> &'static str {
        match self {
            FeedbackMode::Approx => "approx",
            FeedbackMode::ExactFd => "exact_fd",
            FeedbackMode::Off => "off",
        }
    }
}

impl std::str::FromStr for FeedbackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "approx" => Ok(FeedbackMode::Approx),
            "exact_fd" => Ok(FeedbackMode::ExactFd),
            "off" => Ok(FeedbackMode::Off),
            _ => Err(Error::Config(format!(
                "feedback_mode {s:?}: expected approx, exact_fd or off"
            ))),
        }
    }
}

/// How the teacher's consistency branch enlarges its input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    /// Mixed tiles are stitched into one image of twice the side.
    Concat,
    /// No stitching; the unlabeled batch is four times larger instead.
    BigBatch,
}

impl ScalingMode {
    pub fn name(self) -> &'static str {
        match self {
            ScalingMode::Concat => "concat",
            ScalingMode::BigBatch => "big_batch",
        }
    }
}

impl std::str::FromStr for ScalingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concat" => Ok(ScalingMode::Concat),
            "big_batch" => Ok(ScalingMode::BigBatch),
            _ => Err(Error::Config(format!(
                "scaling_mode {s:?}: expected concat or big_batch"
            ))),
        }
    }
}

/// Every knob of a training run. Text form is one `key = value` per line;
/// see [`TrainConfig::KEYS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub total_iters: usize,
    pub eta_s: f64,
    pub eta_t: f64,
    pub lr_power: f64,
    pub omega: f64,
    /// Fraction of the run over which omega ramps linearly from 0; 0 keeps
    /// it constant.
    pub omega_ramp: f64,
    pub batch_labeled: usize,
    pub batch_unlabeled: usize,
    pub sm2c: Sm2cConfig,
    pub technic: Option<Technic>,
    pub feedback_mode: FeedbackMode,
    pub labeled_only: bool,
    pub warm_start: Option<PathBuf>,
    pub scaling_mode: ScalingMode,
    /// Rotation/flip on every sampled image before anything else.
    pub standard_aug: bool,
    pub width1: usize,
    pub width2: usize,
    pub log_interval: usize,
    /// 0 disables validation during training.
    pub val_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            total_iters: 2000,
            eta_s: 0.05,
            eta_t: 0.05,
            lr_power: 0.9,
            omega: 1.0,
            omega_ramp: 0.0,
            batch_labeled: 4,
            batch_unlabeled: 4,
            sm2c: Sm2cConfig::default(),
            technic: None,
            feedback_mode: FeedbackMode::Approx,
            labeled_only: false,
            warm_start: None,
            scaling_mode: ScalingMode::Concat,
            standard_aug: true,
            width1: 8,
            width2: 16,
            log_interval: 10,
            val_interval: 200,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

/// Parses `"1,2,3"` (or `"none"`) into part numbers.
pub fn parse_parts(value: &str) -> Result<Vec<u8>> {
    if value == "none" || value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|p| parse::<u8>("parts", p.trim())).collect()
}

impl TrainConfig {
    pub const KEYS: [&'static str; 27] = [
        "seed",
        "total_iters",
        "eta_s",
        "eta_t",
        "lr_power",
        "omega",
        "omega_ramp",
        "batch_labeled",
        "batch_unlabeled",
        "parts",
        "sigma",
        "class_subset_max",
        "jitter_scale_min",
        "jitter_scale_max",
        "jitter_rotation",
        "jitter_translate",
        "jitter_flip_prob",
        "technic",
        "feedback_mode",
        "labeled_only",
        "warm_start",
        "scaling_mode",
        "standard_aug",
        "width1",
        "width2",
        "log_interval",
        "val_interval",
    ];

    /// Enabled augmentation parts (1 concat, 2 mix, 3 jitter).
    pub fn parts(&self) -> Vec<u8> {
        let s = &self.sm2c;
        [(1, s.concat_enabled), (2, s.mix_enabled), (3, s.jitter_enabled)]
            .into_iter()
            .filter_map(|(p, on)| on.then_some(p))
            .collect()
    }

    pub fn set_parts(&mut self, parts: &[u8]) -> Result<()> {
        if let Some(p) = parts.iter().find(|p| !(1..=3).contains(*p)) {
            return Err(Error::Config(format!("unknown part {p}; expected 1, 2 or 3")));
        }
        self.sm2c.concat_enabled = parts.contains(&1);
        self.sm2c.mix_enabled = parts.contains(&2);
        self.sm2c.jitter_enabled = parts.contains(&3);
        Ok(())
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "seed" => self.seed = parse(key, value)?,
            "total_iters" => self.total_iters = parse(key, value)?,
            "eta_s" => self.eta_s = parse(key, value)?,
            "eta_t" => self.eta_t = parse(key, value)?,
            "lr_power" => self.lr_power = parse(key, value)?,
            "omega" => self.omega = parse(key, value)?,
            "omega_ramp" => self.omega_ramp = parse(key, value)?,
            "batch_labeled" => self.batch_labeled = parse(key, value)?,
            "batch_unlabeled" => self.batch_unlabeled = parse(key, value)?,
            "parts" => self.set_parts(&parse_parts(value)?)?,
            "sigma" => self.sm2c.sigma = parse(key, value)?,
            "class_subset_max" => self.sm2c.class_subset_max = parse(key, value)?,
            "jitter_scale_min" => self.sm2c.jitter.scale.0 = parse(key, value)?,
            "jitter_scale_max" => self.sm2c.jitter.scale.1 = parse(key, value)?,
            "jitter_rotation" => {
                let r: f64 = parse(key, value)?;
                self.sm2c.jitter.rotation = (-r, r);
            }
            "jitter_translate" => self.sm2c.jitter.translate_frac = parse(key, value)?,
            "jitter_flip_prob" => self.sm2c.jitter.flip_prob = parse(key, value)?,
            "technic" => {
                self.technic = match value {
                    "none" | "0" => None,
                    v => Some(Technic::from_id(parse(key, v)?).map_err(|e| Error::Config(e.to_string()))?),
                }
            }
            "feedback_mode" => self.feedback_mode = value.parse()?,
            "labeled_only" => self.labeled_only = parse_bool(key, value)?,
            "warm_start" => {
                self.warm_start = match value {
                    "none" | "" => None,
                    v => Some(PathBuf::from(v)),
                }
            }
            "scaling_mode" => self.scaling_mode = value.parse()?,
            "standard_aug" => self.standard_aug = parse_bool(key, value)?,
            "width1" => self.width1 = parse(key, value)?,
            "width2" => self.width2 = parse(key, value)?,
            "log_interval" => self.log_interval = parse(key, value)?,
            "val_interval" => self.val_interval = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file on top of `self`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    fn value_of(&self, key: &str) -> String {
        let j = &self.sm2c.jitter;
        match key {
            "seed" => self.seed.to_string(),
            "total_iters" => self.total_iters.to_string(),
            "eta_s" => self.eta_s.to_string(),
            "eta_t" => self.eta_t.to_string(),
            "lr_power" => self.lr_power.to_string(),
            "omega" => self.omega.to_string(),
            "omega_ramp" => self.omega_ramp.to_string(),
            "batch_labeled" => self.batch_labeled.to_string(),
            "batch_unlabeled" => self.batch_unlabeled.to_string(),
            "parts" => {
                let p = self.parts();
                if p.is_empty() {
                    "none".into()
                } else {
                    p.iter().map(u8::to_string).collect::<Vec<_>>().join(",")
                }
            }
            "sigma" => self.sm2c.sigma.to_string(),
            "class_subset_max" => self.sm2c.class_subset_max.to_string(),
            "jitter_scale_min" => j.scale.0.to_string(),
            "jitter_scale_max" => j.scale.1.to_string(),
            "jitter_rotation" => j.rotation.1.to_string(),
            "jitter_translate" => j.translate_frac.to_string(),
            "jitter_flip_prob" => j.flip_prob.to_string(),
            "technic" => self.technic.map_or("none".into(), |t| t.id().to_string()),
            "feedback_mode" => self.feedback_mode.name().into(),
            "labeled_only" => self.labeled_only.to_string(),
            "warm_start" => self
                .warm_start
                .as_ref()
                .map_or("none".into(), |p| p.display().to_string()),
            "scaling_mode" => self.scaling_mode.name().into(),
            "standard_aug" => self.standard_aug.to_string(),
            "width1" => self.width1.to_string(),
            "width2" => self.width2.to_string(),
            "log_interval" => self.log_interval.to_string(),
            "val_interval" => self.val_interval.to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    /// Text form accepted by [`TrainConfig::from_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            let _ = writeln!(out, "{key} = {}", self.value_of(key));
        }
        out
    }

    /// The augmentation config the consistency branch actually runs.
    pub fn effective_sm2c(&self) -> Sm2cConfig {
        let mut s = self.sm2c.clone();
        if self.scaling_mode == ScalingMode::BigBatch {
            s.concat_enabled = false;
        }
        s
    }

    /// Unlabeled images drawn per iteration.
    pub fn unlabeled_per_iter(&self) -> usize {
        match self.scaling_mode {
            ScalingMode::Concat => self.batch_unlabeled,
            ScalingMode::BigBatch => self.batch_unlabeled * self.sm2c.k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.total_iters == 0 {
            return cfg("total_iters must be positive".into());
        }
        for (name, v) in [("eta_s", self.eta_s), ("eta_t", self.eta_t), ("omega", self.omega)] {
            if !(v.is_finite() && v >= 0.0) {
                return cfg(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.lr_power.is_finite() && self.lr_power >= 0.0) {
            return cfg(format!("lr_power must be >= 0, got {}", self.lr_power));
        }
        if !(0.0..=1.0).contains(&self.omega_ramp) {
            return cfg(format!("omega_ramp must be in [0, 1], got {}", self.omega_ramp));
        }
        if self.batch_labeled == 0 || self.batch_unlabeled == 0 {
            return cfg("batch sizes must be at least 1".into());
        }
        if self.width1 == 0 || self.width2 == 0 {
            return cfg("layer widths must be positive".into());
        }
        if self.log_interval == 0 {
            return cfg("log_interval must be positive".into());
        }
        self.sm2c.validate()?;
        if !self.labeled_only && !self.batch_unlabeled.is_multiple_of(self.sm2c.k) {
            return cfg(format!(
                "batch_unlabeled {} must be a multiple of K = {}",
                self.batch_unlabeled, self.sm2c.k
            ));
        }
        Ok(())
    }
}

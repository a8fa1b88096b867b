use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ensure_same_dims, BinaryMask, Image, LabelMap};
use crate::rng::RngState;

use super::affine::{jitter_donor, AffineParams, JitterRanges, MixDonor};
use super::mix::{compose_mask, extract_class_mask, multi_class_mix, scaling_up_concat};

/// Pipeline configuration. The three toggles correspond to scaling-up
/// concatenation (part 1), multi-class mixing (part 2) and donor jitter
/// (part 3).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sm2cConfig {
    pub k: usize,
    /// Object groups per tile, counting the tile's own: `sigma - 1` donors
    /// are pasted onto each tile.
    pub sigma: usize,
    pub concat_enabled: bool,
    pub mix_enabled: bool,
    pub jitter_enabled: bool,
    pub jitter: JitterRanges,
    pub class_subset_max: usize,
}

impl Default for Sm2cConfig {
    fn default() -> Self {
        Self {
            k: 4,
            sigma: 4,
            concat_enabled: true,
            mix_enabled: true,
            jitter_enabled: true,
            jitter: JitterRanges::default(),
            class_subset_max: 3,
        }
    }
}

impl Sm2cConfig {
    /// Only concatenation; no donors are drawn.
    pub fn concat_only() -> Self {
        Self {
            sigma: 1,
            mix_enabled: false,
            jitter_enabled: false,
            ..Self::default()
        }
    }

    /// Builds a configuration from the set of enabled parts (1, 2, 3).
    pub fn from_parts(parts: &[u8], sigma: usize) -> Result<Self> {
        if let Some(p) = parts.iter().find(|p| !(1..=3).contains(*p)) {
            return Err(Error::Config(format!("unknown part {p}; expected 1, 2 or 3")));
        }
        let cfg = Self {
            concat_enabled: parts.contains(&1),
            mix_enabled: parts.contains(&2),
            jitter_enabled: parts.contains(&3),
            sigma,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k != 4 {
            return Err(Error::Config(format!("only K = 4 is supported, got {}", self.k)));
        }
        if !(1..=self.k).contains(&self.sigma) {
            return Err(Error::Config(format!(
                "sigma must be in 1..={}, got {}",
                self.k, self.sigma
            )));
        }
        if !self.mix_enabled && self.sigma > 1 {
            return Err(Error::Config(format!(
                "sigma = {} requires multi-class mixing (part 2)",
                self.sigma
            )));
        }
        if self.jitter_enabled && !self.mix_enabled {
            return Err(Error::Config("jitter (part 3) requires mixing (part 2)".into()));
        }
        if self.class_subset_max == 0 {
            return Err(Error::Config("class_subset_max must be at least 1".into()));
        }
        self.jitter.validate()
    }

    /// Donors pasted onto each tile.
    pub fn donors_per_tile(&self) -> usize {
        if self.mix_enabled {
            self.sigma - 1
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DonorDraw {
    /// Index of the donor tile in the batch.
    pub source: usize,
    /// Selected foreground classes, ascending.
    pub classes: Vec<u8>,
    pub affine: Option<AffineParams>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TileTrace {
    pub donors: Vec<DonorDraw>,
}

/// Every random draw made by one pipeline call; enough to replay it exactly.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Sm2cTrace {
    pub tiles: Vec<TileTrace>,
}

impl Sm2cTrace {
    /// Composed paste region of each tile.
    pub fn composed_masks(&self, batch: &[(Image, LabelMap)]) -> Result<Vec<BinaryMask>> {
        self.tiles
            .iter()
            .zip(batch)
            .map(|(tile, (img, _))| {
                let donors = build_donors(batch, tile)?;
                if donors.is_empty() {
                    Ok(BinaryMask::empty(img.height(), img.width()))
                } else {
                    compose_mask(&donors)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mixed {
    /// One `(2H, 2W)` pair.
    Concatenated(Image, LabelMap),
    /// `K` separate `(H, W)` pairs, emitted when concatenation is disabled.
    Tiles(Vec<(Image, LabelMap)>),
}

impl Mixed {
    pub fn pairs(&self) -> Vec<(&Image, &LabelMap)> {
        match self {
            Mixed::Concatenated(i, l) => vec![(i, l)],
            Mixed::Tiles(t) => t.iter().map(|(i, l)| (i, l)).collect(),
        }
    }

    pub fn into_pairs(self) -> Vec<(Image, LabelMap)> {
        match self {
            Mixed::Concatenated(i, l) => vec![(i, l)],
            Mixed::Tiles(t) => t,
        }
    }
}

fn check_batch(batch: &[(Image, LabelMap)], cfg: &Sm2cConfig) -> Result<()> {
    if batch.len() != cfg.k {
        return Err(Error::invalid(format!(
            "batch has {} tiles, configuration expects {}",
            batch.len(),
            cfg.k
        )));
    }
    let dims = batch[0].0.dims();
    let classes = batch[0].1.num_classes();
    for (img, lbl) in batch {
        ensure_same_dims("batch tile", dims, img.dims())?;
        ensure_same_dims("batch label", dims, lbl.dims())?;
        if lbl.num_classes() != classes {
            return Err(Error::invalid("batch labels disagree on class count"));
        }
    }
    Ok(())
}

fn build_donors(batch: &[(Image, LabelMap)], tile: &TileTrace) -> Result<Vec<MixDonor>> {
    tile.donors
        .iter()
        .map(|d| {
            let (img, lbl) = batch
                .get(d.source)
                .ok_or_else(|| Error::invalid(format!("donor index {} out of range", d.source)))?;
            let mask = extract_class_mask(lbl, &d.classes)?;
            let donor = MixDonor::new(
                img.clone(),
                lbl.clone(),
                mask,
                d.affine.unwrap_or(AffineParams::IDENTITY),
            )?;
            match d.affine {
                Some(_) => jitter_donor(&donor),
                None => Ok(donor),
            }
        })
        .collect()
}

fn draw_trace(batch: &[(Image, LabelMap)], cfg: &Sm2cConfig, rng: &mut RngState) -> Sm2cTrace {
    let (h, w) = batch[0].0.dims();
    let foreground = batch[0].1.num_classes().saturating_sub(1) as usize;
    let max_subset = cfg.class_subset_max.min(foreground);
    let tiles = (0..cfg.k)
        .map(|n| {
            let others: Vec<usize> = (0..cfg.k).filter(|&k| k != n).collect();
            let picks = rng.choose_distinct(others.len(), cfg.donors_per_tile());
            let donors = picks
                .into_iter()
                .map(|p| {
                    let classes = if max_subset == 0 {
                        Vec::new()
                    } else {
                        let size = 1 + rng.below(max_subset);
                        let mut c: Vec<u8> = rng
                            .choose_distinct(foreground, size)
                            .into_iter()
                            .map(|i| i as u8 + 1)
                            .collect();
                        c.sort_unstable();
                        c
                    };
                    let affine = cfg.jitter_enabled.then(|| cfg.jitter.sample(h, w, rng));
                    DonorDraw {
                        source: others[p],
                        classes,
                        affine,
                    }
                })
                .collect();
            TileTrace { donors }
        })
        .collect();
    Sm2cTrace { tiles }
}

/// Recomputes the pipeline output from a recorded trace.
pub fn replay(batch: &[(Image, LabelMap)], cfg: &Sm2cConfig, trace: &Sm2cTrace) -> Result<Mixed> {
    cfg.validate()?;
    check_batch(batch, cfg)?;
    if trace.tiles.len() != cfg.k {
        return Err(Error::invalid("trace does not match batch size"));
    }
    let tiles = batch
        .iter()
        .zip(&trace.tiles)
        .map(|((img, lbl), tile)| {
            let donors = build_donors(batch, tile)?;
            multi_class_mix(img, lbl, &donors)
        })
        .collect::<Result<Vec<_>>>()?;
    if cfg.concat_enabled {
        let (i, l) = scaling_up_concat(&tiles)?;
        Ok(Mixed::Concatenated(i, l))
    } else {
        Ok(Mixed::Tiles(tiles))
    }
}

/// Runs the pipeline and returns the draws alongside the output.
pub fn sm2c_traced(batch: &[(Image, LabelMap)], cfg: &Sm2cConfig, rng: &mut RngState) -> Result<(Mixed, Sm2cTrace)> {
    cfg.validate()?;
    check_batch(batch, cfg)?;
    let trace = draw_trace(batch, cfg, rng);
    let mixed = replay(batch, cfg, &trace)?;
    Ok((mixed, trace))
}

/// Scaling-up mix with multi-class: for every tile, paste class-selected
/// (and optionally jittered) objects from `sigma - 1` other tiles, then
/// concatenate the four mixed tiles 2x2.
pub fn sm2c(batch: &[(Image, LabelMap)], cfg: &Sm2cConfig, rng: &mut RngState) -> Result<Mixed> {
    sm2c_traced(batch, cfg, rng).map(|(m, _)| m)
}

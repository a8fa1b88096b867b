//! The three optional add-on augmentations evaluated on top of the mixing
//! pipeline: pair deformation, cutout, and intensity perturbation.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{clamp01, ensure_same_dims, Image, LabelMap};
use crate::rng::RngState;
use crate::transform::{warp_image, warp_labels, Affine, Interp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Technic {
    Deformation = 1,
    Cutout = 2,
    IntensityShift = 3,
}

impl Technic {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Technic::Deformation),
            2 => Ok(Technic::Cutout),
            3 => Ok(Technic::IntensityShift),
            other => Err(Error::invalid(format!("unknown technic {other}; expected 1, 2 or 3"))),
        }
    }

    pub fn id(self) -> u8 {
        self as u8
    }
}

/// Random anisotropic scale, rotation and shear applied to the pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deformation {
    pub scale_x: f64,
    pub scale_y: f64,
    pub rotation: f64,
    pub shear: f64,
}

impl Deformation {
    pub fn sample(rng: &mut RngState) -> Self {
        Self {
            scale_x: rng.uniform(0.9, 1.1),
            scale_y: rng.uniform(0.9, 1.1),
            rotation: rng.uniform(-10.0, 10.0),
            shear: rng.uniform(-0.15, 0.15),
        }
    }

    pub fn apply(&self, img: &Image, lbl: &LabelMap) -> Result<(Image, LabelMap)> {
        ensure_same_dims("deformation", img.dims(), lbl.dims())?;
        let t = Affine::new(self.scale_x, self.scale_y, self.rotation, false, self.shear, [0.0, 0.0]);
        Ok((warp_image(img, &t, Interp::Bilinear), warp_labels(lbl, &t)))
    }
}

/// Zeroes one axis-aligned rectangle of the image; the label is untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cutout {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Cutout {
    pub fn sample(h: usize, w: usize, rng: &mut RngState) -> Self {
        let ch = (h / 8).max(1) + rng.below((h / 3).saturating_sub(h / 8).max(1));
        let cw = (w / 8).max(1) + rng.below((w / 3).saturating_sub(w / 8).max(1));
        let ch = ch.min(h);
        let cw = cw.min(w);
        Self {
            top: rng.below(h - ch + 1),
            left: rng.below(w - cw + 1),
            height: ch,
            width: cw,
        }
    }

    pub fn apply(&self, img: &Image) -> Image {
        let mut out = img.clone();
        let (h, w) = img.dims();
        for r in self.top..(self.top + self.height).min(h) {
            for c in self.left..(self.left + self.width).min(w) {
                out.set(r, c, 0.0);
            }
        }
        out
    }
}

/// Gamma curve followed by additive Gaussian noise, clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityShift {
    pub gamma: f64,
    pub noise_sigma: f64,
}

impl IntensityShift {
    pub const DEFAULT_NOISE: f64 = 0.05;

    pub fn sample(rng: &mut RngState) -> Self {
        Self {
            gamma: rng.uniform(0.7, 1.5),
            noise_sigma: Self::DEFAULT_NOISE,
        }
    }

    pub fn apply(&self, img: &Image, rng: &mut RngState) -> Result<Image> {
        if !(self.gamma > 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("gamma must be positive and noise sigma non-negative"));
        }
        let mut out = img.clone();
        let noise = (self.noise_sigma > 0.0).then(|| Normal::new(0.0, self.noise_sigma).expect("valid sigma"));
        for v in out.data_mut() {
            let mut x = v.powf(self.gamma);
            if let Some(n) = &noise {
                x += n.sample(rng);
            }
            *v = clamp01(x);
        }
        Ok(out)
    }
}

/// Applies add-on technic `technic` (1, 2 or 3) with freshly drawn parameters.
pub fn extra_augment(img: &Image, lbl: &LabelMap, technic: u8, rng: &mut RngState) -> Result<(Image, LabelMap)> {
    let technic = Technic::from_id(technic)?;
    ensure_same_dims("extra augment", img.dims(), lbl.dims())?;
    match technic {
        Technic::Deformation => Deformation::sample(rng).apply(img, lbl),
        Technic::Cutout => {
            let cut = Cutout::sample(img.height(), img.width(), rng);
            Ok((cut.apply(img), lbl.clone()))
        }
        Technic::IntensityShift => {
            let shift = IntensityShift::sample(rng);
            Ok((shift.apply(img, rng)?, lbl.clone()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> (Image, LabelMap) {
        let img = Image::from_fn(16, 12, |r, c| 0.05 + 0.9 * ((r * 12 + c) % 17) as f64 / 17.0);
        let lbl = LabelMap::new(16, 12, (0..192).map(|i| (i % 3) as u8).collect(), 3).unwrap();
        (img, lbl)
    }

    #[test]
    fn unknown_technic() {
        let (i, l) = pair();
        assert!(extra_augment(&i, &l, 4, &mut RngState::new(0)).is_err());
        assert!(extra_augment(&i, &l, 0, &mut RngState::new(0)).is_err());
    }

    #[test]
    fn empty_cutout_is_identity() {
        let (i, _) = pair();
        let cut = Cutout {
            top: 3,
            left: 2,
            height: 0,
            width: 5,
        };
        assert_eq!(cut.apply(&i), i);
    }

    #[test]
    fn cutout_zeroes_one_rectangle() {
        let (i, l) = pair();
        for seed in 0..50 {
            let (o, ol) = extra_augment(&i, &l, 2, &mut RngState::new(seed)).unwrap();
            assert_eq!(ol, l);
            let changed: Vec<(usize, usize)> = (0..16)
                .flat_map(|r| (0..12).map(move |c| (r, c)))
                .filter(|&(r, c)| o.get(r, c) != i.get(r, c))
                .collect();
            assert!(!changed.is_empty());
            assert!(changed.iter().all(|&(r, c)| o.get(r, c) == 0.0));
            let r0 = changed.iter().map(|p| p.0).min().unwrap();
            let r1 = changed.iter().map(|p| p.0).max().unwrap();
            let c0 = changed.iter().map(|p| p.1).min().unwrap();
            let c1 = changed.iter().map(|p| p.1).max().unwrap();
            assert_eq!(changed.len(), (r1 - r0 + 1) * (c1 - c0 + 1));
        }
    }

    #[test]
    fn neutral_intensity_shift() {
        let (i, _) = pair();
        let s = IntensityShift {
            gamma: 1.0,
            noise_sigma: 0.0,
        };
        assert_eq!(s.apply(&i, &mut RngState::new(1)).unwrap(), i);
    }

    #[test]
    fn intensity_shift_keeps_range_and_label() {
        let (i, l) = pair();
        let (o, ol) = extra_augment(&i, &l, 3, &mut RngState::new(8)).unwrap();
        assert_eq!(ol, l);
        assert!(o.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_ne!(o, i);
    }

    #[test]
    fn deformation_moves_pair_together() {
        let (i, l) = pair();
        let (o, ol) = extra_augment(&i, &l, 1, &mut RngState::new(5)).unwrap();
        assert_eq!(o.dims(), i.dims());
        assert_eq!(ol.dims(), l.dims());
        assert!(ol.classes_present().is_subset(&l.classes_present()));
    }
}

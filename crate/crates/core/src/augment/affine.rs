use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ensure_same_dims, BinaryMask, Image, LabelMap};
use crate::rng::RngState;
use crate::transform::{warp_image, warp_labels, warp_mask, Affine, Interp};

/// Object deformation: size and length-width (via the two scale factors),
/// rotation, flipping and translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub scale_x: f64,
    pub scale_y: f64,
    pub rotation: f64,
    pub flip: bool,
    pub translate_x: f64,
    pub translate_y: f64,
}

impl AffineParams {
    pub const IDENTITY: Self = Self {
        scale_x: 1.0,
        scale_y: 1.0,
        rotation: 0.0,
        flip: false,
        translate_x: 0.0,
        translate_y: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, s) in [("scale_x", self.scale_x), ("scale_y", self.scale_y)] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {s}")));
            }
        }
        if !(self.rotation.is_finite() && self.translate_x.is_finite() && self.translate_y.is_finite()) {
            return Err(Error::invalid("affine parameters must be finite"));
        }
        Ok(())
    }

    pub(crate) fn to_affine(self) -> Affine {
        Affine::new(
            self.scale_x,
            self.scale_y,
            self.rotation,
            self.flip,
            0.0,
            [self.translate_x, self.translate_y],
        )
    }
}

/// Sampling ranges for donor jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterRanges {
    pub scale: (f64, f64),
    pub rotation: (f64, f64),
    /// Maximum translation as a fraction of the image side.
    pub translate_frac: f64,
    pub flip_prob: f64,
}

impl Default for JitterRanges {
    fn default() -> Self {
        Self {
            scale: (0.7, 1.3),
            rotation: (-30.0, 30.0),
            translate_frac: 0.25,
            flip_prob: 0.5,
        }
    }
}

impl JitterRanges {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.scale;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::Config(format!("jitter scale range ({lo}, {hi}) is invalid")));
        }
        if self.rotation.0 > self.rotation.1 {
            return Err(Error::Config("jitter rotation range is reversed".into()));
        }
        if !(0.0..=1.0).contains(&self.translate_frac) || !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::Config(
                "jitter translate/flip fractions must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn sample(&self, height: usize, width: usize, rng: &mut RngState) -> AffineParams {
        let scale_x = rng.uniform(self.scale.0, self.scale.1);
        let scale_y = rng.uniform(self.scale.0, self.scale.1);
        let rotation = rng.uniform(self.rotation.0, self.rotation.1);
        let flip = rng.bernoulli(self.flip_prob);
        let tx = self.translate_frac * width as f64;
        let ty = self.translate_frac * height as f64;
        let translate_x = rng.uniform(-tx, tx);
        let translate_y = rng.uniform(-ty, ty);
        AffineParams {
            scale_x,
            scale_y,
            rotation,
            flip,
            translate_x,
            translate_y,
        }
    }
}

/// A donor object group: the source tile, its labels, the selected-class mask
/// and the deformation to apply before pasting.
#[derive(Debug, Clone, PartialEq)]
pub struct MixDonor {
    pub image: Image,
    pub label: LabelMap,
    pub mask: BinaryMask,
    pub affine: AffineParams,
}

impl MixDonor {
    pub fn new(image: Image, label: LabelMap, mask: BinaryMask, affine: AffineParams) -> Result<Self> {
        ensure_same_dims("donor label", image.dims(), label.dims())?;
        ensure_same_dims("donor mask", image.dims(), mask.dims())?;
        Ok(Self {
            image,
            label,
            mask,
            affine,
        })
    }
}

/// Applies the donor's affine jointly to image, label and mask with nearest
/// resampling, so every pasted pixel is a verbatim copy of a donor pixel.
/// The returned donor carries the identity transform.
pub fn jitter_donor(donor: &MixDonor) -> Result<MixDonor> {
    donor.affine.validate()?;
    ensure_same_dims("donor label", donor.image.dims(), donor.label.dims())?;
    ensure_same_dims("donor mask", donor.image.dims(), donor.mask.dims())?;
    let t = donor.affine.to_affine();
    Ok(MixDonor {
        image: warp_image(&donor.image, &t, Interp::Nearest),
        label: warp_labels(&donor.label, &t),
        mask: warp_mask(&donor.mask, &t),
        affine: AffineParams::IDENTITY,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn donor_with(mask: &[u8], affine: AffineParams) -> MixDonor {
        let image = Image::new(2, 2, vec![0.9, 0.1, 0.2, 0.3]).unwrap();
        let label = LabelMap::new(2, 2, vec![1, 0, 0, 0], 2).unwrap();
        MixDonor::new(image, label, BinaryMask::from_bytes(2, 2, mask).unwrap(), affine).unwrap()
    }

    #[test]
    fn identity_keeps_donor() {
        let d = donor_with(&[1, 0, 0, 0], AffineParams::IDENTITY);
        assert_eq!(jitter_donor(&d).unwrap(), d);
    }

    #[test]
    fn flip_and_shift() {
        let flip = AffineParams {
            flip: true,
            ..AffineParams::IDENTITY
        };
        let j = jitter_donor(&donor_with(&[1, 0, 0, 0], flip)).unwrap();
        assert_eq!(j.mask.to_bytes(), vec![0, 1, 0, 0]);
        assert_eq!(j.label.data(), &[0, 1, 0, 0]);
        assert_eq!(j.image.data(), &[0.1, 0.9, 0.3, 0.2]);

        let shift = AffineParams {
            translate_x: 1.0,
            ..AffineParams::IDENTITY
        };
        let j = jitter_donor(&donor_with(&[1, 0, 0, 0], shift)).unwrap();
        assert_eq!(j.mask.to_bytes(), vec![0, 1, 0, 0]);
        assert_eq!(j.image.data(), &[0.0, 0.9, 0.0, 0.2]);
        assert_eq!(j.label.data(), &[0, 1, 0, 0]);
    }

    #[test]
    fn rejects_nonpositive_scale() {
        let bad = AffineParams {
            scale_x: 0.0,
            ..AffineParams::IDENTITY
        };
        assert!(jitter_donor(&donor_with(&[1, 0, 0, 0], bad)).is_err());
    }

    #[test]
    fn sampled_params_respect_ranges() {
        let ranges = JitterRanges::default();
        let mut rng = RngState::new(4);
        for _ in 0..500 {
            let p = ranges.sample(64, 32, &mut rng);
            assert!((0.7..=1.3).contains(&p.scale_x) && (0.7..=1.3).contains(&p.scale_y));
            assert!(p.rotation.abs() <= 30.0);
            assert!(p.translate_x.abs() <= 8.0 && p.translate_y.abs() <= 16.0);
        }
    }
}

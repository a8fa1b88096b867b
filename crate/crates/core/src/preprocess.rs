//! Standard preprocessing: min-max normalization, resizing and the
//! rotate/flip augmentation applied to every training pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{ensure_same_dims, Image, LabelMap};
use crate::rng::RngState;
use crate::transform::{warp_image, warp_labels, Affine, Interp};

/// Maximum absolute rotation drawn by [`standard_augment`], in degrees.
pub const MAX_ROTATION_DEG: f64 = 20.0;

/// Min-max normalizes a raw `height x width` grid into `[0, 1]`.
/// A constant grid maps to all zeros.
pub fn normalize_intensity(height: usize, width: usize, raw: &[f64]) -> Result<Image> {
    if raw.is_empty() || height == 0 || width == 0 {
        return Err(Error::invalid("cannot normalize an empty grid"));
    }
    if raw.len() != height * width {
        return Err(Error::invalid(format!(
            "grid {height}x{width} needs {} values, got {}",
            height * width,
            raw.len()
        )));
    }
    if let Some(v) = raw.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite raw value {v}")));
    }
    let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let range = hi - lo;
    let data = if range > 0.0 {
        raw.iter().map(|&v| ((v - lo) / range).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; raw.len()]
    };
    Image::new(height, width, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResizeMode {
    Nearest,
    Bilinear,
}

/// Resizes an image. Nearest maps output index `i` to `floor(i * in / out)`;
/// bilinear samples with corner-aligned coordinates.
pub fn resize(img: &Image, out_h: usize, out_w: usize, mode: ResizeMode) -> Result<Image> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid(format!(
            "resize target {out_h}x{out_w} has a zero dimension"
        )));
    }
    let (h, w) = img.dims();
    let src = img.data();
    let mut out = Image::zeros(out_h, out_w).with_spacing(img.spacing());
    let dst = out.data_mut();
    match mode {
        ResizeMode::Nearest => {
            for r in 0..out_h {
                let sr = r * h / out_h;
                for c in 0..out_w {
                    dst[r * out_w + c] = src[sr * w + c * w / out_w];
                }
            }
        }
        ResizeMode::Bilinear => {
            let coord = |i: usize, n_in: usize, n_out: usize| -> (usize, usize, f64) {
                if n_out == 1 || n_in == 1 {
                    return (0, 0, 0.0);
                }
                let s = i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
                let i0 = (s.floor() as usize).min(n_in - 1);
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, s - i0 as f64)
            };
            for r in 0..out_h {
                let (r0, r1, tr) = coord(r, h, out_h);
                for c in 0..out_w {
                    let (c0, c1, tc) = coord(c, w, out_w);
                    let top = src[r0 * w + c0] * (1.0 - tc) + src[r0 * w + c1] * tc;
                    let bot = src[r1 * w + c0] * (1.0 - tc) + src[r1 * w + c1] * tc;
                    dst[r * out_w + c] = (top * (1.0 - tr) + bot * tr).clamp(0.0, 1.0);
                }
            }
        }
    }
    Ok(out)
}

/// One draw of the rotate/flip augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardAugment {
    pub rotation_deg: f64,
    pub flip: bool,
}

impl StandardAugment {
    pub const IDENTITY: Self = Self {
        rotation_deg: 0.0,
        flip: false,
    };

    pub fn sample(rng: &mut RngState) -> Self {
        let rotation_deg = rng.uniform(-MAX_ROTATION_DEG, MAX_ROTATION_DEG);
        let flip = rng.bernoulli(0.5);
        Self { rotation_deg, flip }
    }

    fn affine(&self) -> Affine {
        Affine::new(1.0, 1.0, self.rotation_deg, self.flip, 0.0, [0.0, 0.0])
    }

    /// Applies the draw jointly; `image_interp` selects the image resampler
    /// (labels are always nearest).
    pub fn apply_with(&self, img: &Image, lbl: &LabelMap, image_interp: Interp) -> Result<(Image, LabelMap)> {
        ensure_same_dims("standard augment", img.dims(), lbl.dims())?;
        let t = self.affine();
        Ok((warp_image(img, &t, image_interp), warp_labels(lbl, &t)))
    }

    pub fn apply(&self, img: &Image, lbl: &LabelMap) -> Result<(Image, LabelMap)> {
        self.apply_with(img, lbl, Interp::Bilinear)
    }
}

/// Random rotation in `[-20, 20]` degrees and horizontal flip with
/// probability 0.5, applied identically to image (bilinear) and label
/// (nearest).
pub fn standard_augment(img: &Image, lbl: &LabelMap, rng: &mut RngState) -> Result<(Image, LabelMap)> {
    ensure_same_dims("standard augment", img.dims(), lbl.dims())?;
    StandardAugment::sample(rng).apply(img, lbl)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        let img = normalize_intensity(2, 2, &[0.0, 128.0, 255.0, 64.0]).unwrap();
        let expect = [0.0, 128.0 / 255.0, 1.0, 64.0 / 255.0];
        for (a, b) in img.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((img.data()[1] - 0.50196).abs() < 1e-5);
        assert!((img.data()[3] - 0.25098).abs() < 1e-5);

        let flat = normalize_intensity(2, 2, &[5.0; 4]).unwrap();
        assert_eq!(flat.data(), &[0.0; 4]);

        let unit = [0.0, 1.0, 0.5, 0.25];
        assert_eq!(normalize_intensity(2, 2, &unit).unwrap().data(), &unit);

        assert!(normalize_intensity(0, 0, &[]).is_err());
    }

    #[test]
    fn normalize_is_idempotent() {
        let raw: Vec<f64> = (0..30).map(|i| ((i * 37) % 11) as f64 * 3.7 + 2.0).collect();
        let once = normalize_intensity(5, 6, &raw).unwrap();
        let twice = normalize_intensity(5, 6, once.data()).unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn resize_nearest_blocks() {
        let img = Image::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let out = resize(&img, 4, 4, ResizeMode::Nearest).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(out.get(r, c), img.get(r / 2, c / 2));
            }
        }
        assert_eq!(resize(&img, 2, 2, ResizeMode::Nearest).unwrap(), img);
        assert!(resize(&img, 0, 3, ResizeMode::Nearest).is_err());
    }

    #[test]
    fn resize_bilinear_corner_aligned() {
        let img = Image::new(1, 2, vec![0.0, 1.0]).unwrap();
        let out = resize(&img, 1, 3, ResizeMode::Bilinear).unwrap();
        assert_eq!(out.data(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn resize_bilinear_stays_in_range() {
        let img = Image::from_fn(5, 7, |r, c| 0.2 + 0.1 * (((r * 3 + c) % 5) as f64));
        let out = resize(&img, 13, 4, ResizeMode::Bilinear).unwrap();
        let (lo, hi) = (0.2, 0.6);
        assert!(out.data().iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
    }

    #[test]
    fn standard_augment_identity_and_flip() {
        let img = Image::from_fn(4, 5, |r, c| (r * 5 + c) as f64 / 20.0);
        let lbl = LabelMap::new(4, 5, (0..20).map(|i| (i % 3) as u8).collect(), 3).unwrap();
        let (i2, l2) = StandardAugment::IDENTITY.apply(&img, &lbl).unwrap();
        assert_eq!(i2, img);
        assert_eq!(l2, lbl);

        let flip = StandardAugment {
            rotation_deg: 0.0,
            flip: true,
        };
        let (i3, l3) = flip.apply(&img, &lbl).unwrap();
        for r in 0..4 {
            for c in 0..5 {
                assert_eq!(i3.get(r, c), img.get(r, 4 - c));
                assert_eq!(l3.get(r, c), lbl.get(r, 4 - c));
            }
        }
    }

    #[test]
    fn standard_augment_is_seeded() {
        let img = Image::from_fn(9, 9, |r, c| ((r + 2 * c) % 7) as f64 / 7.0);
        let lbl = LabelMap::new(9, 9, (0..81).map(|i| (i % 4) as u8).collect(), 4).unwrap();
        let a = standard_augment(&img, &lbl, &mut RngState::new(3)).unwrap();
        let b = standard_augment(&img, &lbl, &mut RngState::new(3)).unwrap();
        assert_eq!(a, b);
        let bad = LabelMap::background(8, 9, 4);
        assert!(standard_augment(&img, &bad, &mut RngState::new(3)).is_err());
    }

    #[test]
    fn rotation_draws_are_bounded() {
        let mut rng = RngState::new(11);
        for _ in 0..1000 {
            let d = StandardAugment::sample(&mut rng);
            assert!(d.rotation_deg.abs() <= MAX_ROTATION_DEG);
        }
    }
}

//! Short-axis cardiac phantom: a bright disc ("LV"), a darker ring around it
//! ("Myo") and a crescent hugging one side of the ring ("RV"), on a dark
//! background. Structures can be dropped per slice to mimic basal/apical
//! slices where a class is genuinely absent.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{clamp01, Image, LabelMap};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Structure {
    Crescent,
    Ring,
    Disc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub image_size: usize,
    /// 2 (disc), 3 (ring, disc) or 4 (crescent, ring, disc), plus background.
    pub num_classes: u8,
    /// Maximum center offset from the image center, as a fraction of the side.
    pub center_jitter: f64,
    /// Disc radius range, fraction of the side.
    pub disc_radius: (f64, f64),
    /// Ring thickness range, fraction of the side.
    pub ring_thickness: (f64, f64),
    /// Crescent circle radius as a multiple of the ring's outer radius.
    pub crescent_scale: (f64, f64),
    /// Intensity band per class, background first.
    pub intensity_bands: Vec<(f64, f64)>,
    /// Per-image gain applied to foreground intensities, drawn from this range.
    pub contrast: (f64, f64),
    /// Background clutter blobs per image.
    pub clutter_blobs: usize,
    /// Intensity band of clutter blobs.
    pub clutter_band: (f64, f64),
    pub noise_sigma: f64,
    /// Probability of dropping each class (index 0, background, is ignored).
    pub class_dropout: Vec<f64>,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            image_size: 64,
            num_classes: 4,
            center_jitter: 0.12,
            disc_radius: (0.08, 0.14),
            ring_thickness: (0.035, 0.06),
            crescent_scale: (1.25, 1.6),
            intensity_bands: vec![(0.0, 0.12), (0.55, 0.68), (0.26, 0.4), (0.78, 0.95)],
            contrast: (1.0, 1.0),
            clutter_blobs: 0,
            clutter_band: (0.45, 0.52),
            noise_sigma: 0.05,
            class_dropout: vec![0.0, 0.1, 0.05, 0.05],
        }
    }
}

impl PhantomSpec {
    pub fn structures(&self) -> &'static [Structure] {
        const ALL: [Structure; 3] = [Structure::Crescent, Structure::Ring, Structure::Disc];
        &ALL[4 - self.num_classes as usize..]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.image_size < 8 {
            return bad(format!("image size {} is below 8", self.image_size));
        }
        if !(2..=4).contains(&self.num_classes) {
            return bad(format!("num_classes {} must be 2, 3 or 4", self.num_classes));
        }
        let pos_range = |(lo, hi): (f64, f64)| lo > 0.0 && hi >= lo;
        if !pos_range(self.disc_radius) || !pos_range(self.ring_thickness) {
            return bad("disc radius and ring thickness ranges must be positive".into());
        }
        if !(self.crescent_scale.0 > 1.0 && self.crescent_scale.1 >= self.crescent_scale.0) {
            return bad("crescent scale must exceed 1 so it extends past the ring".into());
        }
        if self.intensity_bands.len() != self.num_classes as usize
            || self.class_dropout.len() != self.num_classes as usize
        {
            return bad("need one intensity band and dropout probability per class".into());
        }
        let band_ok = |(lo, hi): (f64, f64)| (0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi) && lo <= hi;
        if !self.intensity_bands.iter().all(|&b| band_ok(b)) || !band_ok(self.clutter_band) {
            return bad("intensity bands must lie within [0, 1]".into());
        }
        if !self.class_dropout.iter().all(|p| (0.0..=1.0).contains(p)) {
            return bad("dropout probabilities must be in [0, 1]".into());
        }
        if !(self.contrast.0 > 0.0 && self.contrast.1 >= self.contrast.0) {
            return bad("contrast range must be positive".into());
        }
        if !(self.noise_sigma >= 0.0) || !(0.0..0.5).contains(&self.center_jitter) {
            return bad("noise sigma must be >= 0 and center jitter in [0, 0.5)".into());
        }
        Ok(())
    }

    fn class_of(&self, s: Structure) -> u8 {
        let idx = self
            .structures()
            .iter()
            .position(|&x| x == s)
            .expect("structure in use");
        idx as u8 + 1
    }
}

/// Draws one phantom slice and its exact label map. Labels follow the
/// geometry before noise; dropped classes vanish from both image and label.
pub fn gen_phantom(spec: &PhantomSpec, rng: &mut RngState) -> Result<(Image, LabelMap)> {
    spec.validate()?;
    let n = spec.image_size;
    let side = n as f64;
    let mid = (side - 1.0) / 2.0;
    let cx = mid + rng.uniform(-spec.center_jitter, spec.center_jitter) * side;
    let cy = mid + rng.uniform(-spec.center_jitter, spec.center_jitter) * side;
    let r_disc = rng.uniform(spec.disc_radius.0, spec.disc_radius.1) * side;
    let r_ring = r_disc + rng.uniform(spec.ring_thickness.0, spec.ring_thickness.1) * side;
    let r_cres = r_ring * rng.uniform(spec.crescent_scale.0, spec.crescent_scale.1);
    let angle = rng.uniform(0.0, std::f64::consts::TAU);
    let (ccx, ccy) = (cx + 0.9 * r_ring * angle.cos(), cy + 0.9 * r_ring * angle.sin());

    let kept: Vec<bool> = (0..spec.num_classes as usize)
        .map(|c| c == 0 || !rng.bernoulli(spec.class_dropout[c]))
        .collect();
    let gain = rng.uniform(spec.contrast.0, spec.contrast.1);
    let base: Vec<f64> = spec
        .intensity_bands
        .iter()
        .enumerate()
        .map(|(c, &(lo, hi))| {
            let v = rng.uniform(lo, hi);
            if c == 0 {
                v
            } else {
                clamp01(v * gain)
            }
        })
        .collect();
    let blobs: Vec<(f64, f64, f64, f64)> = (0..spec.clutter_blobs)
        .map(|_| {
            let r = rng.uniform(0.03, 0.07) * side;
            (
                rng.uniform(0.0, side),
                rng.uniform(0.0, side),
                r,
                rng.uniform(spec.clutter_band.0, spec.clutter_band.1),
            )
        })
        .collect();

    let has = |s: Structure| spec.structures().contains(&s);
    let mut labels = vec![0u8; n * n];
    let mut pixels = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let (x, y) = (c as f64, r as f64);
            let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
            let dc = ((x - ccx).powi(2) + (y - ccy).powi(2)).sqrt();
            let structure = if d < r_disc && has(Structure::Disc) {
                Some(Structure::Disc)
            } else if d < r_ring && has(Structure::Ring) {
                Some(Structure::Ring)
            } else if dc < r_cres && d >= r_ring + 1.0 && has(Structure::Crescent) {
                Some(Structure::Crescent)
            } else {
                None
            };
            let class = structure
                .map(|s| spec.class_of(s))
                .filter(|&k| kept[k as usize])
                .unwrap_or(0);
            labels[r * n + c] = class;
            pixels[r * n + c] = if class == 0 {
                blobs
                    .iter()
                    .rev()
                    .find(|b| ((x - b.0).powi(2) + (y - b.1).powi(2)).sqrt() < b.2)
                    .filter(|_| structure.is_none())
                    .map_or(base[0], |b| b.3)
            } else {
                base[class as usize]
            };
        }
    }
    if spec.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sigma).expect("valid sigma");
        for v in &mut pixels {
            *v = clamp01(*v + noise.sample(rng));
        }
    }
    Ok((
        Image::new(n, n, pixels)?,
        LabelMap::new(n, n, labels, spec.num_classes)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_classes_without_dropout() {
        let spec = PhantomSpec {
            class_dropout: vec![0.0; 4],
            ..PhantomSpec::default()
        };
        for seed in 0..20 {
            let (_, l) = gen_phantom(&spec, &mut RngState::new(seed)).unwrap();
            assert_eq!(l.classes_present().len(), 4, "seed {seed}");
        }
    }

    #[test]
    fn noiseless_bands_match_labels() {
        let spec = PhantomSpec {
            noise_sigma: 0.0,
            ..PhantomSpec::default()
        };
        for seed in 0..20 {
            let (img, lbl) = gen_phantom(&spec, &mut RngState::new(seed)).unwrap();
            for (c, &(lo, hi)) in spec.intensity_bands.iter().enumerate() {
                let in_band: Vec<bool> = img.data().iter().map(|v| (lo..=hi).contains(v)).collect();
                let labeled: Vec<bool> = lbl.data().iter().map(|&k| k as usize == c).collect();
                assert_eq!(in_band, labeled, "class {c} seed {seed}");
            }
        }
    }

    #[test]
    fn seeded() {
        let spec = PhantomSpec::default();
        let a = gen_phantom(&spec, &mut RngState::new(4)).unwrap();
        let b = gen_phantom(&spec, &mut RngState::new(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_dropout_removes_class() {
        let spec = PhantomSpec {
            class_dropout: vec![0.0, 1.0, 0.0, 0.0],
            ..PhantomSpec::default()
        };
        let (_, l) = gen_phantom(&spec, &mut RngState::new(2)).unwrap();
        assert!(!l.classes_present().contains(&1));
    }

    #[test]
    fn fewer_classes() {
        let spec = PhantomSpec {
            num_classes: 2,
            intensity_bands: vec![(0.0, 0.1), (0.8, 0.9)],
            class_dropout: vec![0.0, 0.0],
            ..PhantomSpec::default()
        };
        let (_, l) = gen_phantom(&spec, &mut RngState::new(1)).unwrap();
        assert_eq!(l.classes_present().into_iter().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn rejects_bad_spec() {
        let spec = PhantomSpec {
            disc_radius: (-0.1, 0.2),
            ..PhantomSpec::default()
        };
        assert!(gen_phantom(&spec, &mut RngState::new(0)).is_err());
        let spec = PhantomSpec {
            intensity_bands: vec![(0.0, 1.2); 4],
            ..PhantomSpec::default()
        };
        assert!(gen_phantom(&spec, &mut RngState::new(0)).is_err());
    }
}

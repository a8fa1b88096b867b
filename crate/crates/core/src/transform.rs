//! Inverse-mapped affine resampling shared by the preprocessing, jitter and
//! deformation ops.
//!
//! Coordinates are pixel centers measured from the grid center, `x` to the
//! right and `y` downwards. A transform maps source points to destination
//! points; resampling walks destination pixels and pulls from the inverse
//! image. Pixels whose nearest source index falls outside the grid are filled
//! (intensity 0, class 0, mask 0) under both interpolation modes, so image and
//! label share the same support.

use crate::image::{clamp01, BinaryMask, Image, LabelMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    Nearest,
    Bilinear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Affine {
    /// Destination-to-source linear part.
    inv: [[f64; 2]; 2],
    translate: [f64; 2],
}

impl Affine {
    /// Forward map `p' = R(rotation) * Shear(shear) * diag(sx, sy) * Flip * p + t`.
    pub(crate) fn new(
        scale_x: f64,
        scale_y: f64,
        rotation_deg: f64,
        flip: bool,
        shear: f64,
        translate: [f64; 2],
    ) -> Self {
        let (s, c) = rotation_deg.to_radians().sin_cos();
        let f = if flip { -1.0 } else { 1.0 };
        // R * [[1, shear], [0, 1]] * diag(sx * f, sy)
        let rs = [[c, c * shear - s], [s, s * shear + c]];
        let m = [
            [rs[0][0] * scale_x * f, rs[0][1] * scale_y],
            [rs[1][0] * scale_x * f, rs[1][1] * scale_y],
        ];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        assert!(det != 0.0 && det.is_finite(), "singular affine map");
        let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
        Self { inv, translate }
    }

    #[cfg(test)]
    pub(crate) fn identity() -> Self {
        Self::new(1.0, 1.0, 0.0, false, 0.0, [0.0, 0.0])
    }

    /// Source `(row, col)` for destination pixel `(r, c)` of an `h x w` grid.
    fn source(&self, h: usize, w: usize, r: usize, c: usize) -> (f64, f64) {
        let cx = (w as f64 - 1.0) / 2.0;
        let cy = (h as f64 - 1.0) / 2.0;
        let dx = c as f64 - cx - self.translate[0];
        let dy = r as f64 - cy - self.translate[1];
        let sx = self.inv[0][0] * dx + self.inv[0][1] * dy;
        let sy = self.inv[1][0] * dx + self.inv[1][1] * dy;
        (sy + cy, sx + cx)
    }

    fn nearest(&self, h: usize, w: usize, r: usize, c: usize) -> Option<usize> {
        let (sr, sc) = self.source(h, w, r, c);
        let (rr, cc) = (sr.round(), sc.round());
        if rr < 0.0 || cc < 0.0 || rr > (h - 1) as f64 || cc > (w - 1) as f64 {
            None
        } else {
            Some(rr as usize * w + cc as usize)
        }
    }
}

pub(crate) fn warp_image(img: &Image, t: &Affine, interp: Interp) -> Image {
    let (h, w) = img.dims();
    let src = img.data();
    let mut out = Image::zeros(h, w).with_spacing(img.spacing());
    let dst = out.data_mut();
    for r in 0..h {
        for c in 0..w {
            let Some(ni) = t.nearest(h, w, r, c) else {
                continue;
            };
            dst[r * w + c] = match interp {
                Interp::Nearest => src[ni],
                Interp::Bilinear => {
                    let (sr, sc) = t.source(h, w, r, c);
                    bilinear(src, h, w, sr, sc)
                }
            };
        }
    }
    out
}

fn bilinear(src: &[f64], h: usize, w: usize, sr: f64, sc: f64) -> f64 {
    let r0f = sr.floor();
    let c0f = sc.floor();
    let tr = sr - r0f;
    let tc = sc - c0f;
    let clampi = |v: f64, n: usize| (v.max(0.0) as usize).min(n - 1);
    let r0 = clampi(r0f, h);
    let r1 = clampi(r0f + 1.0, h);
    let c0 = clampi(c0f, w);
    let c1 = clampi(c0f + 1.0, w);
    let top = src[r0 * w + c0] * (1.0 - tc) + src[r0 * w + c1] * tc;
    let bot = src[r1 * w + c0] * (1.0 - tc) + src[r1 * w + c1] * tc;
    clamp01(top * (1.0 - tr) + bot * tr)
}

pub(crate) fn warp_labels(lbl: &LabelMap, t: &Affine) -> LabelMap {
    let (h, w) = lbl.dims();
    let src = lbl.data();
    let mut out = LabelMap::background(h, w, lbl.num_classes());
    let dst = out.data_mut();
    for r in 0..h {
        for c in 0..w {
            if let Some(ni) = t.nearest(h, w, r, c) {
                dst[r * w + c] = src[ni];
            }
        }
    }
    out
}

pub(crate) fn warp_mask(mask: &BinaryMask, t: &Affine) -> BinaryMask {
    let (h, w) = mask.dims();
    let mut out = BinaryMask::empty(h, w);
    for r in 0..h {
        for c in 0..w {
            if let Some(ni) = t.nearest(h, w, r, c) {
                out.set(r, c, mask.data()[ni]);
            }
        }
    }
    out
}

use crate::error::{Error, Result};
use crate::image::{ensure_same_dims, BinaryMask, Image, LabelMap};

use super::affine::MixDonor;

/// Mask of pixels whose class is in `classes`.
pub fn extract_class_mask(lbl: &LabelMap, classes: &[u8]) -> Result<BinaryMask> {
    let mut member = [false; 256];
    for &c in classes {
        if c >= lbl.num_classes() {
            return Err(Error::invalid(format!(
                "class {c} is out of range for {} classes",
                lbl.num_classes()
            )));
        }
        member[c as usize] = true;
    }
    let data = lbl.data().iter().map(|&v| member[v as usize]).collect();
    BinaryMask::new(lbl.height(), lbl.width(), data)
}

/// Union of donor masks; this is the region of the recipient that gets
/// overwritten by [`multi_class_mix`].
pub fn compose_mask(donors: &[MixDonor]) -> Result<BinaryMask> {
    let first = donors.first().ok_or_else(|| Error::invalid("no donors to compose"))?;
    let (h, w) = first.mask.dims();
    let mut m = BinaryMask::empty(h, w);
    for d in donors {
        ensure_same_dims("composed mask", (h, w), d.mask.dims())?;
        for (i, &v) in d.mask.data().iter().enumerate() {
            if v {
                m.set(i / w, i % w, true);
            }
        }
    }
    Ok(m)
}

/// Pastes donor objects onto the recipient in list order. Where masks
/// overlap the later donor wins; image and label share the paste geometry.
/// Donors are pasted as given, so jitter them first if required.
pub fn multi_class_mix(
    recipient_img: &Image,
    recipient_lbl: &LabelMap,
    donors: &[MixDonor],
) -> Result<(Image, LabelMap)> {
    let dims = recipient_img.dims();
    ensure_same_dims("recipient label", dims, recipient_lbl.dims())?;
    for d in donors {
        ensure_same_dims("donor image", dims, d.image.dims())?;
        ensure_same_dims("donor label", dims, d.label.dims())?;
        ensure_same_dims("donor mask", dims, d.mask.dims())?;
        if d.label.num_classes() != recipient_lbl.num_classes() {
            return Err(Error::invalid("donor and recipient disagree on class count"));
        }
    }
    let mut img = recipient_img.clone();
    let mut lbl = recipient_lbl.clone();
    for d in donors {
        let (di, dl) = (d.image.data(), d.label.data());
        for (i, &on) in d.mask.data().iter().enumerate() {
            if on {
                img.data_mut()[i] = di[i];
                lbl.data_mut()[i] = dl[i];
            }
        }
    }
    Ok((img, lbl))
}

/// Places four equally sized tiles on a 2x2 grid: top-left, top-right,
/// bottom-left, bottom-right.
pub fn scaling_up_concat(tiles: &[(Image, LabelMap)]) -> Result<(Image, LabelMap)> {
    if tiles.len() != 4 {
        return Err(Error::invalid(format!(
            "scaling-up concat needs 4 tiles, got {}",
            tiles.len()
        )));
    }
    let (h, w) = tiles[0].0.dims();
    let classes = tiles[0].1.num_classes();
    for (img, lbl) in tiles {
        ensure_same_dims("concat tile", (h, w), img.dims())?;
        ensure_same_dims("concat tile label", (h, w), lbl.dims())?;
        if lbl.num_classes() != classes {
            return Err(Error::invalid("concat tiles disagree on class count"));
        }
    }
    let (oh, ow) = (2 * h, 2 * w);
    let mut img = Image::zeros(oh, ow).with_spacing(tiles[0].0.spacing());
    let mut lbl = LabelMap::background(oh, ow, classes);
    for (t, (ti, tl)) in tiles.iter().enumerate() {
        let (r0, c0) = ((t / 2) * h, (t % 2) * w);
        for r in 0..h {
            let src = r * w..(r + 1) * w;
            let dst = (r0 + r) * ow + c0..(r0 + r) * ow + c0 + w;
            img.data_mut()[dst.clone()].copy_from_slice(&ti.data()[src.clone()]);
            lbl.data_mut()[dst].copy_from_slice(&tl.data()[src]);
        }
    }
    Ok((img, lbl))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::AffineParams;

    fn lbl(data: &[u8], c: u8) -> LabelMap {
        LabelMap::new(2, 2, data.to_vec(), c).unwrap()
    }

    #[test]
    fn class_mask_examples() {
        let l = lbl(&[0, 1, 2, 1], 3);
        assert_eq!(extract_class_mask(&l, &[1]).unwrap().to_bytes(), vec![0, 1, 0, 1]);
        assert!(extract_class_mask(&l, &[]).unwrap().is_empty());
        assert_eq!(extract_class_mask(&l, &[1, 2]).unwrap().to_bytes(), vec![0, 1, 1, 1]);
        assert!(extract_class_mask(&l, &[3]).is_err());
    }

    fn donor(img: &[f64], l: &[u8], mask: &[u8]) -> MixDonor {
        MixDonor::new(
            Image::new(2, 2, img.to_vec()).unwrap(),
            lbl(l, 3),
            BinaryMask::from_bytes(2, 2, mask).unwrap(),
            AffineParams::IDENTITY,
        )
        .unwrap()
    }

    #[test]
    fn mix_examples() {
        let ri = Image::new(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let rl = lbl(&[0, 1, 0, 1], 3);

        let none = donor(&[0.9; 4], &[2; 4], &[0; 4]);
        assert_eq!(multi_class_mix(&ri, &rl, &[none]).unwrap(), (ri.clone(), rl.clone()));

        let all = donor(&[0.9, 0.8, 0.7, 0.6], &[2, 2, 1, 0], &[1; 4]);
        let (i, l) = multi_class_mix(&ri, &rl, std::slice::from_ref(&all)).unwrap();
        assert_eq!((i, l), (all.image.clone(), all.label.clone()));

        let part = donor(&[0.9, 0.8, 0.7, 0.6], &[2, 2, 2, 2], &[1, 0, 0, 1]);
        let (i, l) = multi_class_mix(&ri, &rl, &[part]).unwrap();
        assert_eq!(i.data(), &[0.9, 0.2, 0.3, 0.6]);
        assert_eq!(l.data(), &[2, 1, 0, 2]);
    }

    #[test]
    fn later_donor_wins() {
        let ri = Image::zeros(2, 2);
        let rl = lbl(&[0; 4], 3);
        let a = donor(&[0.5; 4], &[1; 4], &[1, 1, 0, 0]);
        let b = donor(&[0.7; 4], &[2; 4], &[0, 1, 1, 0]);
        let (i, l) = multi_class_mix(&ri, &rl, &[a.clone(), b.clone()]).unwrap();
        assert_eq!(i.data(), &[0.5, 0.7, 0.7, 0.0]);
        assert_eq!(l.data(), &[1, 2, 2, 0]);
        assert_eq!(compose_mask(&[a, b]).unwrap().to_bytes(), vec![1, 1, 1, 0]);
    }

    #[test]
    fn concat_layout() {
        let tiles: Vec<_> = (0..4)
            .map(|t| {
                (
                    Image::new(1, 1, vec![t as f64 / 4.0]).unwrap(),
                    LabelMap::new(1, 1, vec![t as u8], 4).unwrap(),
                )
            })
            .collect();
        let (i, l) = scaling_up_concat(&tiles).unwrap();
        assert_eq!(i.data(), &[0.0, 0.25, 0.5, 0.75]);
        assert_eq!(l.data(), &[0, 1, 2, 3]);
        assert!(scaling_up_concat(&tiles[..3]).is_err());
    }

    #[test]
    fn concat_rejects_mismatch() {
        let mut tiles: Vec<_> = (0..4)
            .map(|_| (Image::zeros(2, 2), LabelMap::background(2, 2, 2)))
            .collect();
        tiles[3] = (Image::zeros(2, 3), LabelMap::background(2, 3, 2));
        assert!(scaling_up_concat(&tiles).is_err());
    }
}

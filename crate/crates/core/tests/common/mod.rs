//! Independent reference implementations shared by the integration tests and
//! the acceptance suite. Nothing here calls into the library's algorithms; it
//! only reads the public data types.

#![allow(dead_code)]

use std::collections::HashSet;

use sm2c::augment::{Mixed, Sm2cConfig, Sm2cTrace};
use sm2c::net::NetParams;
use sm2c::{BinaryMask, Image, LabelMap, RngState};

/// A labelled tile made of a few random axis-aligned blobs over a noisy
/// background, so every foreground class tends to be present.
pub fn random_tile(h: usize, w: usize, classes: u8, rng: &mut RngState) -> (Image, LabelMap) {
    let mut lbl = vec![0u8; h * w];
    for _ in 0..rng.below(5) + 1 {
        let class = 1 + rng.below(classes as usize - 1) as u8;
        let (r0, c0) = (rng.below(h), rng.below(w));
        let (rh, rw) = (1 + rng.below(h / 2 + 1), 1 + rng.below(w / 2 + 1));
        for r in r0..(r0 + rh).min(h) {
            for c in c0..(c0 + rw).min(w) {
                lbl[r * w + c] = class;
            }
        }
    }
    let img: Vec<f64> = lbl
        .iter()
        .map(|&l| (0.2 * l as f64 + 0.1 * rng.next_f64()).min(1.0))
        .collect();
    (
        Image::new(h, w, img).unwrap(),
        LabelMap::new(h, w, lbl, classes).unwrap(),
    )
}

pub fn random_batch(h: usize, w: usize, classes: u8, rng: &mut RngState) -> Vec<(Image, LabelMap)> {
    (0..4).map(|_| random_tile(h, w, classes, rng)).collect()
}

pub fn random_mask(h: usize, w: usize, density: f64, rng: &mut RngState) -> BinaryMask {
    BinaryMask::new(h, w, (0..h * w).map(|_| rng.next_f64() < density).collect()).unwrap()
}

/// Mixes one tile by hand: donors pasted in order wherever their label is in
/// the selected class set. Only valid for traces without affine jitter.
pub fn reference_tile(batch: &[(Image, LabelMap)], trace: &Sm2cTrace, n: usize) -> (Vec<f64>, Vec<u8>) {
    let mut img = batch[n].0.data().to_vec();
    let mut lbl = batch[n].1.data().to_vec();
    for d in &trace.tiles[n].donors {
        assert!(d.affine.is_none(), "reference mixing needs jitter off");
        let (di, dl) = (&batch[d.source].0, &batch[d.source].1);
        for i in 0..img.len() {
            if d.classes.contains(&dl.data()[i]) {
                img[i] = di.data()[i];
                lbl[i] = dl.data()[i];
            }
        }
    }
    (img, lbl)
}

/// Places four tiles 2x2 in row-major order.
pub fn reference_concat(tiles: &[(Vec<f64>, Vec<u8>)], h: usize, w: usize) -> (Vec<f64>, Vec<u8>) {
    let mut img = vec![0.0; 4 * h * w];
    let mut lbl = vec![0u8; 4 * h * w];
    for r in 0..2 * h {
        for c in 0..2 * w {
            let t = (r / h) * 2 + c / w;
            let src = (r % h) * w + c % w;
            img[r * 2 * w + c] = tiles[t].0[src];
            lbl[r * 2 * w + c] = tiles[t].1[src];
        }
    }
    (img, lbl)
}

/// Splits an output back into per-tile pixel vectors.
pub fn output_tiles(mixed: &Mixed, h: usize, w: usize) -> Vec<(Vec<f64>, Vec<u8>)> {
    match mixed {
        Mixed::Tiles(t) => t.iter().map(|(i, l)| (i.data().to_vec(), l.data().to_vec())).collect(),
        Mixed::Concatenated(img, lbl) => (0..4)
            .map(|t| {
                let (r0, c0) = ((t / 2) * h, (t % 2) * w);
                let mut ti = Vec::with_capacity(h * w);
                let mut tl = Vec::with_capacity(h * w);
                for r in 0..h {
                    for c in 0..w {
                        ti.push(img.get(r0 + r, c0 + c));
                        tl.push(lbl.get(r0 + r, c0 + c));
                    }
                }
                (ti, tl)
            })
            .collect(),
    }
}

/// Checks every law of one pipeline call. Returns a description of the first
/// violation.
pub fn check_sm2c_laws(
    batch: &[(Image, LabelMap)],
    cfg: &Sm2cConfig,
    mixed: &Mixed,
    trace: &Sm2cTrace,
) -> Result<(), String> {
    let (h, w) = batch[0].0.dims();
    let foreground = batch[0].1.num_classes() as usize - 1;
    match (mixed, cfg.concat_enabled) {
        (Mixed::Concatenated(img, lbl), true) => {
            if img.dims() != (2 * h, 2 * w) || lbl.dims() != (2 * h, 2 * w) {
                return Err(format!("shape law: got {:?} for {h}x{w} tiles", img.dims()));
            }
        }
        (Mixed::Tiles(t), false) => {
            if t.len() != 4 || t.iter().any(|(i, l)| i.dims() != (h, w) || l.dims() != (h, w)) {
                return Err("tile output shape".into());
            }
        }
        _ => return Err("output variant does not match the concat toggle".into()),
    }
    if trace.tiles.len() != 4 {
        return Err("trace must have one entry per tile".into());
    }
    let masks = trace.composed_masks(batch).map_err(|e| e.to_string())?;
    let outs = output_tiles(mixed, h, w);
    for (n, tile) in trace.tiles.iter().enumerate() {
        let expected_donors = if cfg.mix_enabled { cfg.sigma - 1 } else { 0 };
        if tile.donors.len() != expected_donors {
            return Err(format!(
                "tile {n}: {} donors, expected {expected_donors}",
                tile.donors.len()
            ));
        }
        let sources: HashSet<usize> = tile.donors.iter().map(|d| d.source).collect();
        if sources.len() != tile.donors.len() || sources.contains(&n) || sources.iter().any(|&s| s >= 4) {
            return Err(format!("tile {n}: donors must be distinct other tiles"));
        }
        let mut allowed = HashSet::new();
        for d in &tile.donors {
            let k = d.classes.len();
            if k == 0 || k > cfg.class_subset_max.min(foreground) {
                return Err(format!("tile {n}: class subset size {k}"));
            }
            if d.classes.iter().any(|&c| c == 0 || c as usize > foreground) {
                return Err(format!(
                    "tile {n}: subset {:?} contains background or out-of-range",
                    d.classes
                ));
            }
            if d.affine.is_some() != cfg.jitter_enabled {
                return Err(format!("tile {n}: jitter draw does not match the toggle"));
            }
            allowed.extend(d.classes.iter().copied());
        }
        let mask = &masks[n];
        if mask.to_bytes().iter().any(|&b| b > 1) {
            return Err("mask binarity".into());
        }
        let (oi, ol) = &outs[n];
        let (ri, rl) = (batch[n].0.data(), batch[n].1.data());
        // Every (intensity, label) pair a donor could contribute.
        let donor_pairs: HashSet<(u64, u8)> = tile
            .donors
            .iter()
            .flat_map(|d| {
                let (di, dl) = (&batch[d.source].0, &batch[d.source].1);
                di.data()
                    .iter()
                    .zip(dl.data())
                    .filter(|(_, l)| d.classes.contains(l))
                    .map(|(v, &l)| (v.to_bits(), l))
                    .collect::<Vec<_>>()
            })
            .collect();
        for i in 0..h * w {
            if !mask.data()[i] {
                if oi[i].to_bits() != ri[i].to_bits() || ol[i] != rl[i] {
                    return Err(format!("tile {n} pixel {i}: changed outside the paste mask"));
                }
            } else {
                if !allowed.contains(&ol[i]) {
                    return Err(format!("tile {n} pixel {i}: pasted label {} not in subsets", ol[i]));
                }
                if !donor_pairs.contains(&(oi[i].to_bits(), ol[i])) {
                    return Err(format!("tile {n} pixel {i}: image/label pair not from any donor"));
                }
            }
        }
        if !cfg.jitter_enabled {
            let (ei, el) = reference_tile(batch, trace, n);
            if ei.iter().zip(oi).any(|(a, b)| a.to_bits() != b.to_bits()) || &el != ol {
                return Err(format!("tile {n}: provenance differs from reference mixing"));
            }
        }
    }
    Ok(())
}

pub fn brute_dice(p: &BinaryMask, g: &BinaryMask) -> f64 {
    let inter = p.data().iter().zip(g.data()).filter(|(a, b)| **a && **b).count();
    let total = p.count() + g.count();
    if total == 0 {
        1.0
    } else {
        2.0 * inter as f64 / total as f64
    }
}

/// Hausdorff distance and the 95th percentile (linear interpolation between
/// order statistics) of the pooled point-to-set distances of both masks.
pub fn brute_hausdorff(p: &BinaryMask, g: &BinaryMask, spacing: f64) -> (f64, f64) {
    let (pp, gp) = (p.points(), g.points());
    let (h, w) = p.dims();
    match (pp.is_empty(), gp.is_empty()) {
        (true, true) => return (0.0, 0.0),
        (true, false) | (false, true) => {
            let diag = ((h * h + w * w) as f64).sqrt() * spacing;
            return (diag, diag);
        }
        _ => {}
    }
    let nearest = |a: (usize, usize), set: &[(usize, usize)]| {
        set.iter()
            .map(|b| {
                let dr = a.0 as f64 - b.0 as f64;
                let dc = a.1 as f64 - b.1 as f64;
                (dr * dr + dc * dc).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let mut d: Vec<f64> = pp
        .iter()
        .map(|&a| nearest(a, &gp) * spacing)
        .chain(gp.iter().map(|&b| nearest(b, &pp) * spacing))
        .collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = 0.95 * (d.len() - 1) as f64;
    let (lo, hi) = (rank.floor() as usize, rank.ceil() as usize);
    let hd95 = d[lo] + (d[hi] - d[lo]) * (rank - lo as f64);
    (*d.last().unwrap(), hd95)
}

/// Straightforward per-pixel evaluation of the network: zero-padded
/// convolutions with weights stored `[ky][kx][in][out]` followed by biases.
pub fn reference_logits(params: &NetParams, img: &Image) -> Vec<f64> {
    let (h, w) = img.dims();
    let mut act: Vec<f64> = img.data().to_vec();
    let mut offset = 0;
    for layer in &params.arch.layers {
        let (k, ci, co) = (layer.kernel, layer.in_ch, layer.out_ch);
        let weights = &params.values[offset..offset + k * k * ci * co];
        let bias = &params.values[offset + k * k * ci * co..offset + layer.param_count()];
        offset += layer.param_count();
        let pad = (k / 2) as isize;
        let mut out = vec![0.0; h * w * co];
        for r in 0..h as isize {
            for c in 0..w as isize {
                for o in 0..co {
                    let mut s = bias[o];
                    for ky in 0..k as isize {
                        for kx in 0..k as isize {
                            let (rr, cc) = (r + ky - pad, c + kx - pad);
                            if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                                continue;
                            }
                            for i in 0..ci {
                                let wi = ((ky as usize * k + kx as usize) * ci + i) * co + o;
                                s += weights[wi] * act[(rr as usize * w + cc as usize) * ci + i];
                            }
                        }
                    }
                    out[(r as usize * w + c as usize) * co + o] = if layer.relu { s.max(0.0) } else { s };
                }
            }
        }
        act = out;
    }
    act
}

/// Mean per-pixel cross-entropy of the reference logits.
pub fn reference_ce(params: &NetParams, img: &Image, target: &LabelMap) -> f64 {
    let logits = reference_logits(params, img);
    let c = params.arch.classes();
    let n = target.data().len();
    let mut total = 0.0;
    for (p, &t) in target.data().iter().enumerate() {
        let z = &logits[p * c..(p + 1) * c];
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - z[t as usize];
    }
    total / n as f64
}

/// Central-difference derivative of `f` at `x` along coordinate `i`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    p[i] = x[i] + h;
    let up = f(&p);
    p[i] = x[i] - h;
    let down = f(&p);
    (up - down) / (2.0 * h)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

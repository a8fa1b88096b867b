//! Normalizes a raw grid, resizes it and applies one seeded rotate/flip draw.

use sm2c::preprocess::{normalize_intensity, resize, ResizeMode, StandardAugment};
use sm2c::{LabelMap, RngState};

fn main() -> sm2c::Result<()> {
    let raw: Vec<f64> = (0..64).map(|i| 100.0 + ((i * 37) % 23) as f64 * 4.0).collect();
    let img = normalize_intensity(8, 8, &raw)?;
    let lo = img.data().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = img.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!("normalized 8x8 grid into [{lo}, {hi}]");

    let big = resize(&img, 16, 16, ResizeMode::Bilinear)?;
    let blocky = resize(&img, 16, 16, ResizeMode::Nearest)?;
    println!(
        "resized to {:?} (bilinear) and {:?} (nearest)",
        big.dims(),
        blocky.dims()
    );

    let labels = LabelMap::new(8, 8, (0..64).map(|i| if i % 8 < 4 { 1 } else { 0 }).collect(), 2)?;
    let draw = StandardAugment::sample(&mut RngState::new(7));
    let (aug_img, aug_lbl) = draw.apply(&img, &labels)?;
    println!(
        "rotate {:.1} deg, flip {}: {} foreground pixels before, {} after",
        draw.rotation_deg,
        draw.flip,
        labels.class_mask(1).count(),
        aug_lbl.class_mask(1).count()
    );
    assert_eq!(aug_img.dims(), img.dims());
    Ok(())
}

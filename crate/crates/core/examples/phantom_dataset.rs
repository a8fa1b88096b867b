//! Generates a small phantom dataset, writes it as PNGs plus a manifest and
//! reads it back.

use sm2c::data::{generate_dataset, load_manifest, save_manifest, split_digest, PhantomSpec, SplitCounts};

fn main() -> sm2c::Result<()> {
    let spec = PhantomSpec::default();
    let ds = generate_dataset(&spec, SplitCounts::new(10, 40, 5, 10), 0)?;
    let dir = std::env::temp_dir().join("sm2c_phantom_example");
    let manifest = save_manifest(&ds, &dir)?;
    let back = load_manifest(&manifest)?;
    println!("wrote {} samples to {}", ds.counts().total(), manifest.display());
    println!("split digest {}", split_digest(&back));
    println!(
        "round trip matches the 8-bit quantized dataset: {}",
        back == ds.quantized()
    );

    let missing = back
        .test
        .iter()
        .filter(|s| s.require_label().is_ok_and(|l| l.classes_present().len() < 4));
    println!("test slices with a dropped structure: {}", missing.count());
    Ok(())
}

//! Trains a labeled-only baseline, then continues from it with meta pseudo
//! labels and mixed consistency, and compares test Dice.
//!
//! Usage: `cargo run --release --example train_mpl [iterations]`

use sm2c::data::{generate_dataset, PhantomSpec, SplitCounts};
use sm2c::mpl::{mean_dice, train, TrainConfig};
use sm2c::net::save_checkpoint;

fn main() -> sm2c::Result<()> {
    let iters = std::env::args()
        .nth(1)
        .map_or(Ok(300), |s| s.parse())
        .expect("iteration count");
    let ds = generate_dataset(&PhantomSpec::default(), SplitCounts::new(10, 200, 20, 50), 0)?;

    let base = TrainConfig {
        total_iters: iters,
        val_interval: iters / 3,
        ..TrainConfig::default()
    };
    let ls_cfg = TrainConfig {
        labeled_only: true,
        eta_t: 1.0,
        eta_s: 1.0,
        ..base.clone()
    };
    let ls = train(&ls_cfg, &ds)?;
    let ls_dice = mean_dice(&ls.teacher, &ds.test)?;
    println!("labeled only: test dice {ls_dice:.4}");

    let ckpt = std::env::temp_dir().join("sm2c_train_mpl_ls.ckpt");
    save_checkpoint(&ls.teacher, &ckpt)?;
    let mpl_cfg = TrainConfig {
        warm_start: Some(ckpt),
        eta_t: 0.3,
        eta_s: 0.3,
        ..base
    };
    let mpl = train(&mpl_cfg, &ds)?;
    for r in mpl.log.iter().filter(|r| r.val_dice.is_some()) {
        println!("iter {:>5} {}", r.iter, r.to_json());
    }
    println!(
        "meta pseudo labels: student test dice {:.4}",
        mean_dice(&mpl.student, &ds.test)?
    );
    Ok(())
}

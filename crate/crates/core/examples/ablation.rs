//! Runs the sigma sweep on a tiny dataset with a short schedule and prints
//! the comparison table.

use sm2c::cli::{ablation_arms, run_ablation};
use sm2c::data::{generate_dataset, PhantomSpec, SplitCounts};
use sm2c::mpl::TrainConfig;

fn main() -> sm2c::Result<()> {
    let spec = PhantomSpec {
        image_size: 32,
        ..PhantomSpec::default()
    };
    let ds = generate_dataset(&spec, SplitCounts::new(6, 24, 4, 8), 0)?;
    let base = TrainConfig {
        total_iters: 150,
        eta_t: 0.3,
        eta_s: 0.3,
        val_interval: 0,
        ..TrainConfig::default()
    };
    let out = std::env::temp_dir().join("sm2c_ablation_example");
    let report = run_ablation(&base, &ds, &ablation_arms("sigma", 4)?, &out)?;
    print!("{}", report.render_table());
    println!("split digest shared by all arms: {}", report.shared_splits);
    Ok(())
}

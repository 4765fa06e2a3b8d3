//! Train for a fixed number of epochs at several batch sizes and record the
//! final test accuracy and sharpness of each solution.
//!
//! Run with: cargo run --example batch_size_sweep

use flatmin::harness::cli::execute;
use flatmin::harness::config::{
    DatasetSource, ExperimentConfig, ExperimentKind, SweepConfig,
};
use flatmin::net::NetworkSpec;

fn main() -> flatmin::Result<()> {
    let mut cfg = ExperimentConfig::synthetic_default();
    cfg.network = NetworkSpec::fully_connected(20, &[32], 5, false);
    cfg.dataset = DatasetSource::Synthetic {
        m_train: 800,
        m_test: 300,
        dim: 20,
        classes: 5,
        separation: 3.0,
    };
    cfg.seed = 5;
    cfg.sweep = Some(SweepConfig { batch_sizes: vec![16, 32, 64, 160, 400, 800], epochs: 40 });

    let out_dir = std::path::Path::new("target/examples-out/sweep");
    for path in execute(ExperimentKind::BatchSweep, &cfg, out_dir, true)? {
        println!("wrote {}", path.display());
    }
    println!("{}", std::fs::read_to_string(out_dir.join("sweep.csv"))?);
    Ok(())
}

//! Record full-training loss and sharpness at every epoch of a small-batch
//! and a large-batch run from a shared start.
//!
//! Run with: cargo run --example sharpness_along_training

use flatmin::harness::cli::execute;
use flatmin::harness::config::{
    DatasetSource, ExperimentConfig, ExperimentKind, RegimeConfig, TrajectoryConfig,
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
    cfg.regimes = RegimeConfig { sb_batch: 32, lb_fraction: 0.1 };
    cfg.seed = 4;
    cfg.trajectory = TrajectoryConfig { epochs: 20, stride: 2 };

    let out_dir = std::path::Path::new("target/examples-out/trajectory");
    for path in execute(ExperimentKind::Trajectory, &cfg, out_dir, true)? {
        println!("wrote {}", path.display());
    }
    println!("{}", std::fs::read_to_string(out_dir.join("trajectory.csv"))?);
    Ok(())
}

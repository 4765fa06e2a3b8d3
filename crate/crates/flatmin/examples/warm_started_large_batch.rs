//! Piggybacking: snapshot a small-batch run every epoch, then warm-start a
//! large-batch run from each snapshot. Accuracy recovers and sharpness drops
//! once the warm start comes from a late enough epoch.
//!
//! Run with: cargo run --example warm_started_large_batch

use flatmin::harness::cli::execute;
use flatmin::harness::config::{
    DatasetSource, ExperimentConfig, ExperimentKind, PiggybackConfig, RegimeConfig,
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
    cfg.seed = 2;
    cfg.piggyback = PiggybackConfig { warm_epochs: 15, lb_epochs: 15 };

    let out_dir = std::path::Path::new("target/examples-out/piggyback");
    for path in execute(ExperimentKind::Piggyback, &cfg, out_dir, true)? {
        println!("wrote {}", path.display());
    }
    println!("{}", std::fs::read_to_string(out_dir.join("piggyback.csv"))?);
    Ok(())
}

//! Remedies for large-batch training: per-epoch data augmentation,
//! conservative (proximal) inner steps, and adversarial training, each
//! compared against plain small-batch and large-batch baselines.
//!
//! Run with: cargo run --example large_batch_remedies

use flatmin::harness::cli::execute;
use flatmin::harness::config::{
    DatasetSource, ExperimentConfig, ExperimentKind, RegimeConfig, RemediesConfig, StrategyConfig,
};
use flatmin::net::NetworkSpec;
use flatmin::optim::StopRule;

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
    cfg.trials = 2;
    cfg.seed = 6;
    cfg.stop = StopRule { rel_improvement_tol: 1e-4, patience_epochs: 8, max_epochs: 40 };
    // Synthetic vectors are not images, so augmentation is left out here;
    // conservative training uses the standard lambda = 1e-3 with 3 inner
    // ADAM iterations per batch.
    cfg.remedies = Some(RemediesConfig {
        strategies: vec![
            StrategyConfig::Conservative { lambda: 1e-3, inner_iters: 3 },
            StrategyConfig::Adversarial { eta: 0.1 },
        ],
    });

    let out_dir = std::path::Path::new("target/examples-out/remedies");
    for path in execute(ExperimentKind::Remedies, &cfg, out_dir, false)? {
        println!("wrote {}", path.display());
    }
    println!("{}", std::fs::read_to_string(out_dir.join("remedies.csv"))?);
    Ok(())
}

//! Baseline experiment: train the same network from the same starts with a
//! small batch and with a large batch (10% of the training set), and compare
//! train/test accuracy per trial.
//!
//! Run with: cargo run --example train_small_vs_large_batch

use flatmin::harness::config::{DatasetSource, ExperimentConfig, RegimeConfig};
use flatmin::harness::experiments::run_baseline;
use flatmin::net::NetworkSpec;
use flatmin::optim::StopRule;

fn main() -> flatmin::Result<()> {
    let mut cfg = ExperimentConfig::synthetic_default();
    cfg.network = NetworkSpec::fully_connected(30, &[48], 6, false);
    cfg.dataset = DatasetSource::Synthetic {
        m_train: 1200,
        m_test: 400,
        dim: 30,
        classes: 6,
        separation: 3.0,
    };
    cfg.regimes = RegimeConfig { sb_batch: 32, lb_fraction: 0.1 };
    cfg.trials = 3;
    cfg.seed = 7;
    cfg.stop = StopRule { rel_improvement_tol: 1e-4, patience_epochs: 8, max_epochs: 60 };

    let out = run_baseline(&cfg)?;
    println!("{}", out.csv);
    println!("per-trial solutions: {} (sb then lb)", out.solutions.len());
    Ok(())
}

//! Walk the linear and curvilinear paths between a small-batch and a
//! large-batch minimizer, writing the loss/accuracy table and an SVG plot.
//!
//! Run with: cargo run --example slice_between_minima

use flatmin::harness::cli::execute;
use flatmin::harness::config::{DatasetSource, ExperimentConfig, ExperimentKind, RegimeConfig};
use flatmin::net::NetworkSpec;
use flatmin::optim::StopRule;

fn main() -> flatmin::Result<()> {
    let mut cfg = ExperimentConfig::synthetic_default();
    cfg.network = NetworkSpec::fully_connected(24, &[32], 5, false);
    cfg.dataset = DatasetSource::Synthetic {
        m_train: 900,
        m_test: 300,
        dim: 24,
        classes: 5,
        separation: 3.0,
    };
    cfg.regimes = RegimeConfig { sb_batch: 32, lb_fraction: 0.1 };
    cfg.seed = 3;
    cfg.stop = StopRule { rel_improvement_tol: 1e-4, patience_epochs: 8, max_epochs: 50 };

    let out_dir = std::path::Path::new("target/examples-out/slice");
    let written = execute(ExperimentKind::Slice, &cfg, out_dir, true)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    let csv = std::fs::read_to_string(out_dir.join("slice.csv"))?;
    for line in csv.lines().take(8) {
        println!("{line}");
    }
    println!("...");
    Ok(())
}

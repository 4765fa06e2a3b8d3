//! JSON experiment configuration.
//!
//! A minimal synthetic-data config looks like:
//!
//! ```json
//! {
//!   "experiment": "baseline",
//!   "network": {"input_dim": 60, "layers": [
//!     {"kind": "dense", "in": 60, "out": 64}, {"kind": "batchnorm", "dim": 64}, {"kind": "relu"},
//!     {"kind": "dense", "in": 64, "out": 10}, {"kind": "softmax_ce", "classes": 10}
//!   ]},
//!   "dataset": {"kind": "synthetic", "m_train": 2000, "m_test": 500,
//!               "dim": 60, "classes": 10, "separation": 3.0},
//!   "regimes": {"sb_batch": 64, "lb_fraction": 0.1},
//!   "trials": 5,
//!   "seed": 1
//! }
//! ```
//!
//! Every section beyond `network` and `dataset` has defaults; experiment
//! specific sections (`sweep`, `piggyback`, `trajectory`, `remedies`,
//! `perfmodel`, `slice`) are only required by the experiments that read them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::AugmentPolicy;
use crate::error::{Error, Result};
use crate::harness::perfmodel::PerfModelInputs;
use crate::net::NetworkSpec;
use crate::optim::{OptimizerKind, StopRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Baseline,
    SharpnessTable,
    Slice,
    BatchSweep,
    Piggyback,
    Trajectory,
    Remedies,
    Perfmodel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic {
        m_train: usize,
        m_test: usize,
        dim: usize,
        classes: usize,
        separation: f64,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        /// Optionally keep only the first `n` training rows.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train_subset: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegimeConfig {
    /// Small-batch size.
    pub sb_batch: usize,
    /// Large-batch size as a fraction of the training set.
    pub lb_fraction: f64,
}

impl Default for RegimeConfig {
    fn default() -> Self {
        Self { sb_batch: 256, lb_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubspaceConfig {
    /// Random-subspace dimension for sharpness measurements.
    pub p: usize,
}

impl Default for SubspaceConfig {
    fn default() -> Self {
        Self { p: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub batch_sizes: Vec<usize>,
    #[serde(default = "default_sweep_epochs")]
    pub epochs: usize,
}

fn default_sweep_epochs() -> usize {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PiggybackConfig {
    /// Snapshot horizon: small-batch epochs and warm-start rows (0..=E).
    pub warm_epochs: usize,
    /// Epochs of each warm-started large-batch run (defaults to
    /// `warm_epochs` when zero).
    pub lb_epochs: usize,
}

impl Default for PiggybackConfig {
    fn default() -> Self {
        Self { warm_epochs: 30, lb_epochs: 0 }
    }
}

impl PiggybackConfig {
    pub fn lb_epochs_or_default(&self) -> usize {
        if self.lb_epochs == 0 {
            self.warm_epochs
        } else {
            self.lb_epochs
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryConfig {
    pub epochs: usize,
    /// Record every `stride` epochs (epoch 0 is always recorded).
    pub stride: usize,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self { epochs: 30, stride: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SliceConfig {
    /// Grid points on [-1, 2].
    pub points: usize,
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self { points: 61 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyConfig {
    Augment {
        #[serde(default)]
        policy: AugmentPolicy,
    },
    Conservative {
        #[serde(default = "default_lambda")]
        lambda: f64,
        #[serde(default = "default_inner_iters")]
        inner_iters: usize,
    },
    Adversarial {
        #[serde(default = "default_eta")]
        eta: f64,
    },
}

fn default_lambda() -> f64 {
    1e-3
}
fn default_inner_iters() -> usize {
    3
}
fn default_eta() -> f64 {
    0.1
}

impl StrategyConfig {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyConfig::Augment { .. } => "augment",
            StrategyConfig::Conservative { .. } => "conservative",
            StrategyConfig::Adversarial { .. } => "adversarial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemediesConfig {
    pub strategies: Vec<StrategyConfig>,
}

/// Reference to a trained parameter snapshot on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRef {
    pub regime: String,
    pub trial: usize,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    pub network: NetworkSpec,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub regimes: RegimeConfig,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub subspace: SubspaceConfig,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default)]
    pub stop: StopRule,
    /// Extra random inner-solver starts per sharpness evaluation.
    #[serde(default)]
    pub restarts: usize,
    /// Write final parameters of baseline runs as snapshot files.
    #[serde(default)]
    pub save_snapshots: bool,
    /// Pre-trained solutions for the sharpness table (instead of training).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solutions: Option<Vec<SolutionRef>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub piggyback: PiggybackConfig,
    #[serde(default)]
    pub trajectory: TrajectoryConfig,
    #[serde(default)]
    pub slice: SliceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remedies: Option<RemediesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perfmodel: Option<PerfModelInputs>,
}

fn default_trials() -> usize {
    5
}

fn default_epsilons() -> Vec<f64> {
    vec![1e-3, 5e-4]
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if !(self.regimes.lb_fraction > 0.0 && self.regimes.lb_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "lb_fraction must be in (0, 1], got {}",
                self.regimes.lb_fraction
            )));
        }
        if self.regimes.sb_batch == 0 {
            return Err(Error::Config("sb_batch must be positive".into()));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| e <= 0.0 || !e.is_finite()) {
            return Err(Error::Config("epsilons must be positive".into()));
        }
        if self.subspace.p == 0 {
            return Err(Error::Config("subspace p must be positive".into()));
        }
        if let DatasetSource::Synthetic { m_train, m_test, dim, classes, separation } =
            &self.dataset
        {
            if *m_train == 0 || *m_test == 0 || *dim == 0 {
                return Err(Error::Config("synthetic dataset sizes must be positive".into()));
            }
            if *classes < 2 {
                return Err(Error::Config("synthetic dataset needs >= 2 classes".into()));
            }
            if separation.is_nan() || *separation < 0.0 {
                return Err(Error::Config("separation must be >= 0".into()));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.batch_sizes.is_empty() {
                return Err(Error::Config("sweep.batch_sizes must be non-empty".into()));
            }
            if sweep.epochs == 0 {
                return Err(Error::Config("sweep.epochs must be positive".into()));
            }
        }
        Ok(())
    }

    /// Canonical JSON for the config-hash comment in CSV outputs.
    pub fn hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("config serializes");
        crate::numeric::fnv1a64(json.as_bytes())
    }

    pub fn tag(&self) -> &str {
        self.tag.as_deref().unwrap_or("flatmin")
    }

    /// A small synthetic-data configuration used by examples and tests.
    pub fn synthetic_default() -> Self {
        ExperimentConfig {
            experiment: None,
            tag: None,
            network: NetworkSpec::fully_connected(60, &[64, 64], 10, true),
            dataset: DatasetSource::Synthetic {
                m_train: 2000,
                m_test: 500,
                dim: 60,
                classes: 10,
                separation: 3.0,
            },
            regimes: RegimeConfig { sb_batch: 64, lb_fraction: 0.1 },
            trials: 5,
            seed: 1,
            epsilons: default_epsilons(),
            subspace: SubspaceConfig::default(),
            optimizer: OptimizerKind::default(),
            stop: StopRule::default(),
            restarts: 0,
            save_snapshots: false,
            solutions: None,
            sweep: None,
            piggyback: PiggybackConfig::default(),
            trajectory: TrajectoryConfig::default(),
            slice: SliceConfig::default(),
            remedies: None,
            perfmodel: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = ExperimentConfig::synthetic_default();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&json).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn minimal_json_fills_defaults() {
        let json = r#"{
            "network": {"input_dim": 4, "layers": [
                {"kind": "dense", "in": 4, "out": 2},
                {"kind": "softmax_ce", "classes": 2}
            ]},
            "dataset": {"kind": "synthetic", "m_train": 100, "m_test": 50,
                        "dim": 4, "classes": 2, "separation": 1.0}
        }"#;
        let cfg = ExperimentConfig::from_json(json).unwrap();
        assert_eq!(cfg.trials, 5);
        assert_eq!(cfg.epsilons, vec![1e-3, 5e-4]);
        assert_eq!(cfg.regimes.sb_batch, 256);
        assert_eq!(cfg.subspace.p, 100);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = ExperimentConfig::synthetic_default();
        cfg.regimes.lb_fraction = 1.5;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::synthetic_default();
        cfg.epsilons = vec![0.0];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::synthetic_default();
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn strategy_defaults_follow_the_protocol() {
        let json = r#"{"kind": "conservative"}"#;
        let s: StrategyConfig = serde_json::from_str(json).unwrap();
        assert_eq!(s, StrategyConfig::Conservative { lambda: 1e-3, inner_iters: 3 });
        let json = r#"{"kind": "adversarial"}"#;
        let s: StrategyConfig = serde_json::from_str(json).unwrap();
        assert_eq!(s, StrategyConfig::Adversarial { eta: 0.1 });
    }
}

//! Config-driven experiment drivers that emit CSV (and optional SVG).

pub mod cli;
pub mod config;
pub mod csv;
pub mod experiments;
pub mod perfmodel;
pub mod svg;

pub use config::{DatasetSource, ExperimentConfig, ExperimentKind, RegimeConfig};
pub use experiments::{Regime, TrainedSolution};
pub use perfmodel::{perf_speedup_bound, PerfModelInputs};

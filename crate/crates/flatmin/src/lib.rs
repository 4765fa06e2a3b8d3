//! flatmin: train small neural networks in small-batch and large-batch
//! regimes and quantify how sharp the resulting minimizers are.
//!
//! The toolkit covers the full loop: dataset ingestion (IDX files or
//! synthetic Gaussian classes), deterministic mini-batch training (SGD /
//! ADAM, plus a conservative proximal variant), a box-constrained
//! quasi-Newton maximizer, the relative-rise sharpness metric in full space
//! and random subspaces, parametric slices between minimizers, and
//! config-driven experiment drivers that emit CSV and SVG.
//!
//! Start with the runnable examples (`cargo run --example <name>`):
//!
//! - `train_small_vs_large_batch` - baseline accuracy gap between regimes
//! - `sharpness_of_a_minimizer` - measure phi at a trained solution
//! - `sharpness_closed_forms` - metric sanity checks on quadratics
//! - `slice_between_minima` - linear and curvilinear loss slices
//! - `batch_size_sweep` - accuracy and sharpness across batch sizes
//! - `warm_started_large_batch` - piggybacking off small-batch iterates
//! - `sharpness_along_training` - sharpness versus loss over a run
//! - `large_batch_remedies` - augmentation, conservative, adversarial
//! - `parallel_scaling_model` - the idealized speedup bound
//! - `idx_files_and_augmentation` - dataset IO and transforms
//!
//! The same capabilities are scriptable through the `flatmin` binary; see
//! the README for the CLI and the JSON config schema.

pub mod boxmax;
pub mod data;
mod error;
pub mod harness;
pub mod landscape;
pub mod net;
pub mod numeric;
pub mod optim;
pub mod sharpness;
pub mod tensor;

pub use error::{Error, Result};
pub use net::{EvalMode, NetState, Network, NetworkSpec, ParamVector};
pub use optim::{Checkpoint, StopRule, TrainConfig, TrainTrace};
pub use tensor::DenseTensor;

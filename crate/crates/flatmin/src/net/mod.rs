//! Network definition and evaluation: the mean cross-entropy training
//! function `f(x)` and its exact reverse-mode gradients with respect to both
//! parameters and inputs.
//!
//! Supported layers: dense (optionally biased), ReLU, batch normalization,
//! and a softmax cross-entropy output. Everything is double precision.
//!
//! Cross-example reductions (loss means, batch-norm statistics, weight
//! gradient accumulation) run through fixed-shape pairwise summation trees,
//! so results do not depend on how work is scheduled.

mod eval;
pub mod params;
pub mod spec;

pub use params::{init_params, LayerParams, ParamLayout, ParamVector};
pub use spec::{LayerSpec, NetworkSpec};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use crate::tensor::DenseTensor;

/// Whether batch normalization uses batch statistics (and updates running
/// averages) or frozen running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMode {
    Train,
    Eval,
}

/// Running batch-norm statistics, one entry per batch-norm layer in layer
/// order. Fresh state is mean 0, variance 1.
#[derive(Debug, Clone, PartialEq)]
pub struct NetState {
    pub(crate) bn: Vec<BnStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl NetState {
    pub fn bn_layers(&self) -> usize {
        self.bn.len()
    }
}

/// A validated architecture plus its parameter layout.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    layout: Arc<ParamLayout>,
}

/// Forward output: class probabilities plus the cached activations needed
/// for backpropagation.
pub struct Forward {
    probs: DenseTensor,
    pub(crate) pass: eval::ForwardPass,
}

impl Forward {
    pub fn probabilities(&self) -> &DenseTensor {
        &self.probs
    }

    /// Raw output-layer logits, row-major (batch x classes).
    pub fn logits(&self) -> &[f64] {
        &self.pass.logits
    }
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        let layout = Arc::new(ParamLayout::build(&spec)?);
        Ok(Self { spec, layout })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    pub fn num_params(&self) -> usize {
        self.layout.n()
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes()
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn init_params(&self, seed: u64) -> ParamVector {
        params::init_params(&self.layout, seed)
    }

    pub fn fresh_state(&self) -> NetState {
        let mut bn = Vec::new();
        for layer in &self.spec.layers {
            if let LayerSpec::Batchnorm { dim, .. } = layer {
                bn.push(BnStats { mean: vec![0.0; *dim], var: vec![1.0; *dim] });
            }
        }
        NetState { bn }
    }

    fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.n() != self.layout.n() {
            return Err(Error::Shape(format!(
                "parameter vector has {} values, network needs {}",
                params.n(),
                self.layout.n()
            )));
        }
        Ok(())
    }

    /// Forward pass. `Train` mode uses batch statistics for batch-norm layers
    /// and updates the running averages in `state`; `Eval` mode reads `state`
    /// and leaves it untouched.
    pub fn forward(
        &self,
        params: &ParamVector,
        inputs: &DenseTensor,
        mode: EvalMode,
        state: &mut NetState,
    ) -> Result<Forward> {
        self.check_params(params)?;
        match mode {
            EvalMode::Eval => self.forward_frozen(params, inputs, state),
            EvalMode::Train => {
                let (pass, updates) = eval::run_forward(self, params, inputs, EvalMode::Train, state)?;
                eval::apply_ema_updates(&self.spec, state, updates);
                Ok(eval::into_forward(pass))
            }
        }
    }

    /// Pure eval-mode forward: a function of (params, inputs, running stats).
    pub fn forward_frozen(
        &self,
        params: &ParamVector,
        inputs: &DenseTensor,
        state: &NetState,
    ) -> Result<Forward> {
        self.check_params(params)?;
        let (pass, _) = eval::run_forward(self, params, inputs, EvalMode::Eval, state)?;
        Ok(eval::into_forward(pass))
    }

    /// Mean cross-entropy loss over the batch and its gradient with respect
    /// to the flat parameter vector.
    pub fn loss_and_grad(
        &self,
        params: &ParamVector,
        inputs: &DenseTensor,
        labels: &[u32],
        mode: EvalMode,
        state: &mut NetState,
    ) -> Result<(f64, Vec<f64>)> {
        match mode {
            EvalMode::Eval => self.loss_and_grad_frozen(params, inputs, labels, state),
            EvalMode::Train => self.loss_and_grad_train_opts(params, inputs, labels, state, true),
        }
    }

    /// Train-mode loss/gradient with explicit control over the running-stat
    /// update (conservative training re-evaluates batches without advancing
    /// the averages).
    pub(crate) fn loss_and_grad_train_opts(
        &self,
        params: &ParamVector,
        inputs: &DenseTensor,
        labels: &[u32],
        state: &mut NetState,
        update_running: bool,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_params(params)?;
        let (pass, updates) = eval::run_forward(self, params, inputs, EvalMode::Train, state)?;
        if update_running {
            eval::apply_ema_updates(&self.spec, state, updates);
        }
        let b = pass.batch as f64;
        let out = eval::run_backward(self, params, &pass, labels, 1.0 / b, false)?;
        Ok((pairwise_sum(&out.example_losses) / b, out.param_grad))
    }

    /// Mean batch loss value only. Train mode uses batch statistics but never
    /// touches the running averages, so this is a pure function in both modes.
    pub fn batch_loss(
        &self,
        params: &ParamVector,
        inputs: &DenseTensor,
        labels: &[u32],
        mode: EvalMode,
        state: &NetState,
    ) -> Result<f64> {
        self.check_params(params)?;
        let (pass, _) = eval::run_forward(self, params, inputs, mode, state)?;
        let losses = eval::example_losses(&pass, labels)?;
        Ok(pairwise_sum(&losses) / pass.batch as f64)
    }

    /// Eval-mode loss and parameter gradient with frozen running statistics.
    pub fn loss_and_grad_frozen(
        &self,
        params: &ParamVector,
        inputs: &DenseTensor,
        labels: &[u32],
        state: &NetState,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_params(params)?;
        let (pass, _) = eval::run_forward(self, params, inputs, EvalMode::Eval, state)?;
        let b = pass.batch as f64;
        let out = eval::run_backward(self, params, &pass, labels, 1.0 / b, false)?;
        Ok((pairwise_sum(&out.example_losses) / b, out.param_grad))
    }

    /// Gradient of the mean batch loss with respect to the input entries
    /// (eval mode).
    pub fn input_gradient(
        &self,
        params: &ParamVector,
        inputs: &DenseTensor,
        labels: &[u32],
        state: &NetState,
    ) -> Result<DenseTensor> {
        self.check_params(params)?;
        let (pass, _) = eval::run_forward(self, params, inputs, EvalMode::Eval, state)?;
        let b = pass.batch as f64;
        let out = eval::run_backward(self, params, &pass, labels, 1.0 / b, true)?;
        let grad = out.input_grad.expect("input gradient requested");
        Ok(DenseTensor::from_computed(vec![pass.batch, self.spec.input_dim], grad))
    }

    /// Fraction of dataset rows whose argmax probability matches the label;
    /// ties break toward the lowest class index.
    pub fn accuracy(&self, params: &ParamVector, data: &Dataset, state: &NetState) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Shape("accuracy over empty dataset".into()));
        }
        self.check_dataset(data)?;
        let mut correct = 0usize;
        for (start, end) in chunk_ranges(data.len(), EVAL_CHUNK) {
            let (inputs, labels) = data.rows_tensor(start, end);
            let fwd = self.forward_frozen(params, &inputs, state)?;
            let probs = fwd.probabilities();
            for (row, &label) in labels.iter().enumerate() {
                let p = probs.row(row);
                let mut arg = 0usize;
                let mut best = p[0];
                for (j, &v) in p.iter().enumerate().skip(1) {
                    if v > best {
                        best = v;
                        arg = j;
                    }
                }
                if arg == label as usize {
                    correct += 1;
                }
            }
        }
        Ok(correct as f64 / data.len() as f64)
    }

    /// Mean cross-entropy over a whole dataset in eval mode.
    pub fn mean_loss(&self, params: &ParamVector, data: &Dataset, state: &NetState) -> Result<f64> {
        self.check_dataset(data)?;
        let mut losses = Vec::with_capacity(data.len());
        for (start, end) in chunk_ranges(data.len(), EVAL_CHUNK) {
            let (inputs, labels) = data.rows_tensor(start, end);
            let (pass, _) = eval::run_forward(self, params, &inputs, EvalMode::Eval, state)?;
            losses.extend(eval::example_losses(&pass, labels)?);
        }
        Ok(pairwise_sum(&losses) / data.len() as f64)
    }

    /// Mean loss and parameter gradient over a whole dataset in eval mode,
    /// evaluated in fixed row chunks with a pairwise merge. This is the
    /// full-training-loss oracle used by sharpness measurements.
    pub fn dataset_loss_and_grad(
        &self,
        params: &ParamVector,
        data: &Dataset,
        state: &NetState,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_dataset(data)?;
        self.check_params(params)?;
        let mut losses = Vec::with_capacity(data.len());
        let mut acc = crate::numeric::PairwiseVecAccumulator::new(self.layout.n());
        for (start, end) in chunk_ranges(data.len(), EVAL_CHUNK) {
            let (inputs, labels) = data.rows_tensor(start, end);
            let (pass, _) = eval::run_forward(self, params, &inputs, EvalMode::Eval, state)?;
            let out = eval::run_backward(self, params, &pass, labels, 1.0, false)?;
            losses.extend(out.example_losses);
            acc.push(out.param_grad);
        }
        let mut grad = acc.finish();
        let inv = 1.0 / data.len() as f64;
        for g in &mut grad {
            *g *= inv;
        }
        Ok((pairwise_sum(&losses) * inv, grad))
    }

    fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.dim() != self.spec.input_dim {
            return Err(Error::Shape(format!(
                "dataset dim {} does not match network input {}",
                data.dim(),
                self.spec.input_dim
            )));
        }
        Ok(())
    }
}

const EVAL_CHUNK: usize = 512;

fn chunk_ranges(len: usize, chunk: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..len.div_ceil(chunk)).map(move |i| (i * chunk, ((i + 1) * chunk).min(len)))
}

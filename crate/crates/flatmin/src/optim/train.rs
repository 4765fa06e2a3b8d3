//! Full training loops with the stop-on-plateau rule, per-epoch snapshots,
//! and the conservative (proximal) variant.

use serde::{Deserialize, Serialize};

use crate::data::{augment, adversarial_examples, AugmentPolicy, Dataset};
use crate::error::{Error, Result};
use crate::net::{NetState, Network, ParamVector};
use crate::numeric::{derive_seed, pairwise_dot};
use crate::optim::{BatchSampler, OptimizerKind, OptimizerState, SampleStrategy};

const SAMPLER_TAG: u64 = 0x5a;
const AUGMENT_TAG: u64 = 0xa6;

/// Stop when the best full-training loss fails to improve by
/// `rel_improvement_tol` for `patience_epochs` consecutive epochs, or at
/// `max_epochs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopRule {
    pub rel_improvement_tol: f64,
    pub patience_epochs: usize,
    pub max_epochs: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { rel_improvement_tol: 1e-4, patience_epochs: 10, max_epochs: 200 }
    }
}

impl StopRule {
    /// Fixed-length run: exactly `epochs` epochs, no plateau detection.
    pub fn fixed_epochs(epochs: usize) -> Self {
        Self { rel_improvement_tol: 0.0, patience_epochs: usize::MAX, max_epochs: epochs }
    }
}

/// Parameters plus the batch-norm running statistics that interpret them.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ParamVector,
    pub bn_state: NetState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

/// Everything a finished (or diverged) run reports. `best` is the checkpoint
/// of the epoch with the lowest full-training loss.
#[derive(Debug, Clone)]
pub struct TrainTrace {
    /// Per-epoch records, starting with the untrained epoch-0 evaluation.
    pub records: Vec<EpochRecord>,
    /// Per-epoch checkpoints (index = epoch, including epoch 0) when enabled.
    pub snapshots: Option<Vec<Checkpoint>>,
    pub best: Checkpoint,
    pub epochs_run: usize,
}

impl TrainTrace {
    pub fn final_record(&self) -> &EpochRecord {
        self.records.last().expect("trace has records")
    }

    /// Record of the best (lowest train loss) epoch.
    pub fn best_record(&self) -> &EpochRecord {
        self.records
            .iter()
            .min_by(|a, b| a.train_loss.partial_cmp(&b.train_loss).expect("finite losses"))
            .expect("trace has records")
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    pub strategy: SampleStrategy,
    pub stop: StopRule,
    pub snapshots: bool,
    pub seed: u64,
    /// Re-augment the training set from this policy every epoch.
    pub augment: Option<AugmentPolicy>,
    /// Replace the training set with fast-gradient-sign copies built from the
    /// current iterate every epoch.
    pub adversarial_eta: Option<f64>,
}

impl TrainConfig {
    pub fn new(optimizer: OptimizerKind, batch_size: usize, strategy: SampleStrategy, seed: u64) -> Self {
        Self {
            optimizer,
            batch_size,
            strategy,
            stop: StopRule::default(),
            snapshots: false,
            seed,
            augment: None,
            adversarial_eta: None,
        }
    }
}

enum StepMode {
    Direct,
    Conservative { lambda: f64, inner_iters: usize },
}

/// Mini-batch training from `start`, recording full-train loss and train/test
/// accuracy once per epoch. Deterministic given the config seed.
pub fn train(
    net: &Network,
    start: &Checkpoint,
    train_data: &Dataset,
    test_data: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainTrace> {
    run_training(net, start, train_data, test_data, cfg, StepMode::Direct)
}

/// Conservative training: each outer iteration fixes a batch and
/// approximately minimizes `batch loss + (lambda/2) ||x - x_k||^2` with
/// `inner_iters` ADAM steps from `x_k`, keeping the best inner iterate.
pub fn conservative_train(
    net: &Network,
    start: &Checkpoint,
    train_data: &Dataset,
    test_data: &Dataset,
    cfg: &TrainConfig,
    lambda: f64,
    inner_iters: usize,
) -> Result<TrainTrace> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda must be >= 0, got {lambda}")));
    }
    if inner_iters == 0 {
        return Err(Error::Domain("inner_iters must be >= 1".into()));
    }
    run_training(net, start, train_data, test_data, cfg, StepMode::Conservative {
        lambda,
        inner_iters,
    })
}

fn run_training(
    net: &Network,
    start: &Checkpoint,
    train_data: &Dataset,
    test_data: &Dataset,
    cfg: &TrainConfig,
    mode: StepMode,
) -> Result<TrainTrace> {
    let sampler = BatchSampler::new(
        train_data.len(),
        cfg.batch_size,
        cfg.strategy,
        derive_seed(cfg.seed, &[SAMPLER_TAG]),
    )?;
    if cfg.augment.is_some() && cfg.adversarial_eta.is_some() {
        return Err(Error::Config("augment and adversarial are mutually exclusive".into()));
    }

    let mut params = start.params.clone();
    let mut bn = start.bn_state.clone();
    let mut opt = OptimizerState::new(cfg.optimizer, net.num_params());

    let evaluate = |params: &ParamVector, bn: &NetState| -> Result<EpochRecord> {
        Ok(EpochRecord {
            epoch: 0,
            train_loss: net.mean_loss(params, train_data, bn)?,
            train_acc: net.accuracy(params, train_data, bn)?,
            test_acc: net.accuracy(params, test_data, bn)?,
        })
    };

    let rec0 = evaluate(&params, &bn)?;
    let mut best_loss = rec0.train_loss;
    let mut best = Checkpoint { params: params.clone(), bn_state: bn.clone() };
    let mut records = vec![rec0];
    let mut snapshots = cfg.snapshots.then(|| {
        vec![Checkpoint { params: params.clone(), bn_state: bn.clone() }]
    });
    let mut bad_epochs = 0usize;
    let mut epochs_run = 0usize;

    let finish = |records: Vec<EpochRecord>,
                  snapshots: Option<Vec<Checkpoint>>,
                  best: Checkpoint,
                  epochs_run: usize| TrainTrace { records, snapshots, best, epochs_run };

    for epoch in 1..=cfg.stop.max_epochs {
        // Fresh per-epoch copies for the data-modifying remedies.
        let epoch_data: Option<Dataset> = if let Some(policy) = &cfg.augment {
            Some(augment(
                train_data,
                &policy.reseeded(derive_seed(policy.seed, &[AUGMENT_TAG, epoch as u64])),
            )?)
        } else if let Some(eta) = cfg.adversarial_eta {
            Some(adversarial_examples(net, &params, &bn, train_data, eta)?)
        } else {
            None
        };
        let active: &Dataset = epoch_data.as_ref().unwrap_or(train_data);

        for indices in sampler.epoch_batches(epoch as u64) {
            let (inputs, labels) = active.gather(&indices);
            let step = match mode {
                StepMode::Direct => {
                    net.loss_and_grad(&params, &inputs, &labels, crate::net::EvalMode::Train, &mut bn)
                        .and_then(|(_, grad)| opt.step(&mut params, &grad))
                }
                StepMode::Conservative { lambda, inner_iters } => conservative_step(
                    net, &mut params, &mut bn, &mut opt, &inputs, &labels, lambda, inner_iters,
                ),
            };
            match step {
                Ok(()) => {}
                Err(Error::NumericOverflow { .. }) | Err(Error::NonFinite { .. }) => {
                    return Err(Error::Diverged {
                        epoch,
                        trace: Box::new(finish(records, snapshots, best, epochs_run)),
                    });
                }
                Err(other) => return Err(other),
            }
        }

        let mut rec = match evaluate(&params, &bn) {
            Ok(rec) => rec,
            Err(Error::NumericOverflow { .. }) | Err(Error::NonFinite { .. }) => {
                return Err(Error::Diverged {
                    epoch,
                    trace: Box::new(finish(records, snapshots, best, epochs_run)),
                });
            }
            Err(other) => return Err(other),
        };
        rec.epoch = epoch;
        if !rec.train_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                trace: Box::new(finish(records, snapshots, best, epochs_run)),
            });
        }

        let improved_enough = rec.train_loss < best_loss * (1.0 - cfg.stop.rel_improvement_tol);
        if rec.train_loss < best_loss {
            best_loss = rec.train_loss;
            best = Checkpoint { params: params.clone(), bn_state: bn.clone() };
        }
        if improved_enough {
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
        }

        records.push(rec);
        if let Some(snaps) = &mut snapshots {
            snaps.push(Checkpoint { params: params.clone(), bn_state: bn.clone() });
        }
        epochs_run = epoch;

        if bad_epochs >= cfg.stop.patience_epochs {
            break;
        }
    }

    Ok(finish(records, snapshots, best, epochs_run))
}

/// One conservative outer iteration on a fixed batch. The accepted iterate is
/// the best proximal-objective point among `x_k`, every inner iterate, and
/// the final one, so the step never moves uphill on the proximal objective.
#[allow(clippy::too_many_arguments)]
fn conservative_step(
    net: &Network,
    params: &mut ParamVector,
    bn: &mut NetState,
    opt: &mut OptimizerState,
    inputs: &crate::tensor::DenseTensor,
    labels: &[u32],
    lambda: f64,
    inner_iters: usize,
) -> Result<()> {
    let anchor = params.values().to_vec();
    let prox = |values: &[f64]| -> f64 {
        let diff: Vec<f64> = values.iter().zip(&anchor).map(|(v, a)| v - a).collect();
        0.5 * lambda * pairwise_dot(&diff, &diff)
    };

    let mut best_obj = f64::INFINITY;
    let mut best_values: Vec<f64> = anchor.clone();
    for inner in 0..inner_iters {
        // Only the first evaluation advances the running statistics; the
        // re-evaluations of the same batch must not double-count it.
        let (loss, grad) =
            net.loss_and_grad_train_opts(params, inputs, labels, bn, inner == 0)?;
        let obj = loss + prox(params.values());
        if obj < best_obj {
            best_obj = obj;
            best_values.copy_from_slice(params.values());
        }
        let total: Vec<f64> = grad
            .iter()
            .zip(params.values())
            .zip(&anchor)
            .map(|((g, v), a)| g + lambda * (v - a))
            .collect();
        opt.step(params, &total)?;
    }
    let final_loss =
        net.batch_loss(params, inputs, labels, crate::net::EvalMode::Train, bn)?;
    let final_obj = final_loss + prox(params.values());
    if final_obj < best_obj {
        best_values.copy_from_slice(params.values());
    }
    params.set_values(&best_values)
}

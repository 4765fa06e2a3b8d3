//! The experiment drivers behind each CLI subcommand. Every driver returns
//! CSV text; byte-identical output is guaranteed for identical (config,
//! seed) regardless of thread count, because parallel tasks are independent
//! and results are assembled in fixed (trial, parameter) order.

use rayon::prelude::*;

use crate::data::{load_idx, synth_gaussian, Dataset};
use crate::error::{Error, Result};
use crate::harness::config::{
    DatasetSource, ExperimentConfig, RemediesConfig, StrategyConfig,
};
use crate::harness::csv::{fmt_f64, CsvTable};
use crate::landscape::{curvilinear_slice, default_alpha_grid, distance_ratio, linear_slice};
use crate::net::{Network, ParamVector};
use crate::numeric::{derive_seed, mean_std};
use crate::optim::{
    conservative_train, train, Checkpoint, SampleStrategy, StopRule, TrainConfig, TrainTrace,
};
use crate::sharpness::{sharpness, InnerSolver, Subspace};

const SB_TAG: u64 = 0x5b;
const LB_TAG: u64 = 0x1b;
const SUBSPACE_TAG: u64 = 0xa5;
const RESTART_TAG: u64 = 0x27;
const SWEEP_TAG: u64 = 0x3e;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Sb,
    Lb,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Sb => "sb",
            Regime::Lb => "lb",
        }
    }

    fn tag(&self) -> u64 {
        match self {
            Regime::Sb => SB_TAG,
            Regime::Lb => LB_TAG,
        }
    }
}

/// A trained solution plus its headline metrics (taken at the best epoch,
/// whose parameters the checkpoint holds).
#[derive(Debug, Clone)]
pub struct TrainedSolution {
    pub regime: Regime,
    pub trial: usize,
    pub checkpoint: Checkpoint,
    pub train_acc: f64,
    pub test_acc: f64,
    pub final_loss: f64,
    pub epochs: usize,
    pub diverged: bool,
}

/// Shared context: network plus train/test datasets built from the config.
pub(crate) struct Context {
    pub net: Network,
    pub train: Dataset,
    pub test: Dataset,
    pub hash: u64,
}

impl Context {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let net = Network::new(cfg.network.clone())?;
        let (train, test) = match &cfg.dataset {
            DatasetSource::Synthetic { m_train, m_test, dim, classes, separation } => {
                synth_gaussian(*m_train, *m_test, *dim, *classes, *separation, cfg.seed)?
            }
            DatasetSource::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                train_subset,
            } => {
                let mut train = load_idx(train_images, train_labels)?;
                let test = load_idx(test_images, test_labels)?;
                if let Some(n) = train_subset {
                    let keep = (*n).min(train.len());
                    let indices: Vec<usize> = (0..keep).collect();
                    let (features, labels) = train.gather(&indices);
                    let shape = train.image_shape();
                    let mut subset = Dataset::new(
                        keep,
                        train.dim(),
                        features.into_values(),
                        labels,
                        train.num_classes(),
                    )?;
                    if let Some((h, w)) = shape {
                        subset = subset.with_image_shape(h, w)?;
                    }
                    train = subset;
                }
                (train, test)
            }
        };
        if train.dim() != net.input_dim() {
            return Err(Error::Config(format!(
                "dataset dim {} does not match network input {}",
                train.dim(),
                net.input_dim()
            )));
        }
        if cfg.regimes.sb_batch > train.len() {
            return Err(Error::Config(format!(
                "sb_batch {} exceeds training set size {}",
                cfg.regimes.sb_batch,
                train.len()
            )));
        }
        Ok(Self { net, train, test, hash: cfg.hash() })
    }

    fn lb_batch(&self, cfg: &ExperimentConfig) -> usize {
        ((cfg.regimes.lb_fraction * self.train.len() as f64).ceil() as usize)
            .clamp(1, self.train.len())
    }

    fn init_checkpoint(&self, cfg: &ExperimentConfig, trial: usize) -> Checkpoint {
        Checkpoint {
            params: self.net.init_params(cfg.seed + trial as u64),
            bn_state: self.net.fresh_state(),
        }
    }

    fn regime_train_config(
        &self,
        cfg: &ExperimentConfig,
        regime: Regime,
        trial: usize,
        stop: StopRule,
        snapshots: bool,
    ) -> TrainConfig {
        let (batch, strategy) = match regime {
            Regime::Sb => (cfg.regimes.sb_batch, SampleStrategy::EpochShuffle),
            Regime::Lb => (self.lb_batch(cfg), SampleStrategy::UniformWithoutReplacement),
        };
        let mut tc = TrainConfig::new(
            cfg.optimizer,
            batch,
            strategy,
            derive_seed(cfg.seed + trial as u64, &[regime.tag()]),
        );
        tc.stop = stop;
        tc.snapshots = snapshots;
        tc
    }
}

/// Map a finished or diverged run into a flagged solution so a multi-trial
/// experiment keeps going.
fn solution_from_run(
    regime: Regime,
    trial: usize,
    run: Result<TrainTrace>,
) -> Result<TrainedSolution> {
    match run {
        Ok(trace) => {
            let best = trace.best_record().clone();
            Ok(TrainedSolution {
                regime,
                trial,
                checkpoint: trace.best,
                train_acc: best.train_acc,
                test_acc: best.test_acc,
                final_loss: best.train_loss,
                epochs: trace.epochs_run,
                diverged: false,
            })
        }
        Err(Error::Diverged { epoch, trace }) => {
            let best = trace.best_record().clone();
            Ok(TrainedSolution {
                regime,
                trial,
                checkpoint: trace.best,
                train_acc: best.train_acc,
                test_acc: best.test_acc,
                final_loss: f64::NAN,
                epochs: epoch,
                diverged: true,
            })
        }
        Err(other) => Err(other),
    }
}

pub struct BaselineOutput {
    pub csv: String,
    pub solutions: Vec<TrainedSolution>,
}

/// Per trial: one fresh initialization, one small-batch run and one
/// large-batch run from that same start.
pub fn run_baseline(cfg: &ExperimentConfig) -> Result<BaselineOutput> {
    let ctx = Context::build(cfg)?;
    let pairs: Vec<(TrainedSolution, TrainedSolution)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let init = ctx.init_checkpoint(cfg, trial);
            let sb_cfg = ctx.regime_train_config(cfg, Regime::Sb, trial, cfg.stop, false);
            let sb = solution_from_run(
                Regime::Sb,
                trial,
                train(&ctx.net, &init, &ctx.train, &ctx.test, &sb_cfg),
            )?;
            let lb_cfg = ctx.regime_train_config(cfg, Regime::Lb, trial, cfg.stop, false);
            let lb = solution_from_run(
                Regime::Lb,
                trial,
                train(&ctx.net, &init, &ctx.train, &ctx.test, &lb_cfg),
            )?;
            Ok((sb, lb))
        })
        .collect::<Result<_>>()?;

    let mut solutions = Vec::with_capacity(cfg.trials * 2);
    for (sb, _) in &pairs {
        solutions.push(sb.clone());
    }
    for (_, lb) in &pairs {
        solutions.push(lb.clone());
    }

    let mut table = CsvTable::new(
        ctx.hash,
        cfg.seed,
        &["regime", "trial", "train_acc", "test_acc", "final_loss", "epochs"],
    );
    for sol in &solutions {
        table.push_row(vec![
            sol.regime.label().into(),
            sol.trial.to_string(),
            fmt_f64(sol.train_acc),
            fmt_f64(sol.test_acc),
            fmt_f64(sol.final_loss),
            sol.epochs.to_string(),
        ]);
    }
    for regime in [Regime::Sb, Regime::Lb] {
        let of: Vec<&TrainedSolution> =
            solutions.iter().filter(|s| s.regime == regime && !s.diverged).collect();
        let col = |f: fn(&TrainedSolution) -> f64| -> Vec<f64> { of.iter().map(|s| f(s)).collect() };
        let stats = [
            mean_std(&col(|s| s.train_acc)),
            mean_std(&col(|s| s.test_acc)),
            mean_std(&col(|s| s.final_loss)),
            mean_std(&col(|s| s.epochs as f64)),
        ];
        for (which, pick) in [("mean", 0usize), ("std", 1)] {
            let get = |i: usize| if pick == 0 { stats[i].0 } else { stats[i].1 };
            table.push_row(vec![
                regime.label().into(),
                which.into(),
                fmt_f64(get(0)),
                fmt_f64(get(1)),
                fmt_f64(get(2)),
                fmt_f64(get(3)),
            ]);
        }
    }
    Ok(BaselineOutput { csv: table.to_text(), solutions })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum SubspaceChoice {
    Full,
    Random,
}

struct PhiMeasurement {
    phi: f64,
    f_at_x: f64,
    p: usize,
    iterations: usize,
    oracle_calls: u64,
    seed: u64,
}

fn measure_phi(
    ctx: &Context,
    cfg: &ExperimentConfig,
    sol: &TrainedSolution,
    epsilon: f64,
    eps_idx: usize,
    choice: SubspaceChoice,
) -> Result<PhiMeasurement> {
    let n = ctx.net.num_params();
    let (subspace, seed) = match choice {
        SubspaceChoice::Full => (Subspace::full(n), 0),
        SubspaceChoice::Random => {
            let seed = derive_seed(
                cfg.seed,
                &[SUBSPACE_TAG, sol.regime.tag(), sol.trial as u64, eps_idx as u64],
            );
            (Subspace::random(n, cfg.subspace.p.min(n), seed)?, seed)
        }
    };
    let layout = std::sync::Arc::clone(ctx.net.layout());
    let state = sol.checkpoint.bn_state.clone();
    let oracle = move |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let params = ParamVector::new(x.to_vec(), std::sync::Arc::clone(&layout))?;
        ctx.net.dataset_loss_and_grad(&params, &ctx.train, &state)
    };
    let report = sharpness(
        &oracle,
        sol.checkpoint.params.values(),
        epsilon,
        &subspace,
        &InnerSolver::default(),
        cfg.restarts,
        derive_seed(cfg.seed, &[RESTART_TAG, sol.regime.tag(), sol.trial as u64, eps_idx as u64]),
    )?;
    Ok(PhiMeasurement {
        phi: report.phi,
        f_at_x: report.f_at_x,
        p: report.p,
        iterations: report.diagnostics.iterations,
        oracle_calls: report.diagnostics.oracle_calls,
        seed,
    })
}

/// Sharpness of every solution for each epsilon, in full space and in a
/// random subspace, with mean/std summary rows.
pub fn run_sharpness_table(
    cfg: &ExperimentConfig,
    solutions: &[TrainedSolution],
) -> Result<String> {
    let ctx = Context::build(cfg)?;
    if solutions.is_empty() {
        return Err(Error::Config("sharpness table needs trained solutions".into()));
    }
    let mut tasks = Vec::new();
    for (si, _) in solutions.iter().enumerate() {
        for (ei, _) in cfg.epsilons.iter().enumerate() {
            for choice in [SubspaceChoice::Full, SubspaceChoice::Random] {
                tasks.push((si, ei, choice));
            }
        }
    }
    let measurements: Vec<PhiMeasurement> = tasks
        .par_iter()
        .map(|&(si, ei, choice)| {
            measure_phi(&ctx, cfg, &solutions[si], cfg.epsilons[ei], ei, choice)
        })
        .collect::<Result<_>>()?;

    let mut table = CsvTable::new(
        ctx.hash,
        cfg.seed,
        &[
            "tag", "regime", "trial", "epsilon", "subspace", "p", "phi", "f_at_x", "inner_iters",
            "oracle_calls", "seed",
        ],
    );
    for ((si, ei, choice), m) in tasks.iter().zip(&measurements) {
        let sol = &solutions[*si];
        table.push_row(vec![
            cfg.tag().into(),
            sol.regime.label().into(),
            sol.trial.to_string(),
            fmt_f64(cfg.epsilons[*ei]),
            subspace_label(*choice).into(),
            m.p.to_string(),
            fmt_f64(m.phi),
            fmt_f64(m.f_at_x),
            m.iterations.to_string(),
            m.oracle_calls.to_string(),
            m.seed.to_string(),
        ]);
    }
    for regime in [Regime::Sb, Regime::Lb] {
        for (ei, &eps) in cfg.epsilons.iter().enumerate() {
            for choice in [SubspaceChoice::Full, SubspaceChoice::Random] {
                let phis: Vec<f64> = tasks
                    .iter()
                    .zip(&measurements)
                    .filter(|((si, tei, tchoice), _)| {
                        solutions[*si].regime == regime && *tei == ei && *tchoice == choice
                    })
                    .map(|(_, m)| m.phi)
                    .collect();
                if phis.is_empty() {
                    continue;
                }
                let (mean, std) = mean_std(&phis);
                for (which, v) in [("mean", mean), ("std", std)] {
                    table.push_row(vec![
                        cfg.tag().into(),
                        regime.label().into(),
                        which.into(),
                        fmt_f64(eps),
                        subspace_label(choice).into(),
                        String::new(),
                        fmt_f64(v),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ]);
                }
            }
        }
    }
    Ok(table.to_text())
}

fn subspace_label(choice: SubspaceChoice) -> &'static str {
    match choice {
        SubspaceChoice::Full => "full",
        SubspaceChoice::Random => "random",
    }
}

/// Train one small-batch and one large-batch solution from a shared start
/// and walk the linear and curvilinear paths between them.
pub fn run_slice(cfg: &ExperimentConfig) -> Result<String> {
    let ctx = Context::build(cfg)?;
    let init = ctx.init_checkpoint(cfg, 0);
    let sb_cfg = ctx.regime_train_config(cfg, Regime::Sb, 0, cfg.stop, false);
    let sb = train(&ctx.net, &init, &ctx.train, &ctx.test, &sb_cfg)?;
    let lb_cfg = ctx.regime_train_config(cfg, Regime::Lb, 0, cfg.stop, false);
    let lb = train(&ctx.net, &init, &ctx.train, &ctx.test, &lb_cfg)?;

    let points = cfg.slice.points.max(2);
    let alphas: Vec<f64> = if points == 61 {
        default_alpha_grid()
    } else {
        (0..points).map(|i| -1.0 + 3.0 * i as f64 / (points - 1) as f64).collect()
    };

    let linear = linear_slice(&ctx.net, &sb.best, &lb.best, &ctx.train, &ctx.test, &alphas)?;
    let curved = curvilinear_slice(&ctx.net, &sb.best, &lb.best, &ctx.train, &ctx.test, &alphas)?;
    let (d_s, d_l, ratio) =
        distance_ratio(&init.params, &sb.best.params, &lb.best.params)?;

    let mut table = CsvTable::new(
        ctx.hash,
        cfg.seed,
        &["kind", "alpha", "train_loss", "test_loss", "train_acc", "test_acc"],
    );
    for (kind, pts) in [("linear", &linear), ("curvilinear", &curved)] {
        for pt in pts {
            table.push_row(vec![
                kind.into(),
                fmt_f64(pt.alpha),
                fmt_f64(pt.train_loss),
                fmt_f64(pt.test_loss),
                fmt_f64(pt.train_acc),
                fmt_f64(pt.test_acc),
            ]);
        }
    }
    let mut text = table.to_text();
    text.push_str(&format!(
        "# distance_from_start d_s={} d_l={} ratio={}\n",
        fmt_f64(d_s),
        fmt_f64(d_l),
        fmt_f64(ratio)
    ));
    Ok(text)
}

/// Accuracy and sharpness after a fixed-epoch run at each batch size.
pub fn run_batch_sweep(cfg: &ExperimentConfig) -> Result<String> {
    let ctx = Context::build(cfg)?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("batch_sweep needs a sweep section".into()))?;
    let mut sizes = sweep.batch_sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.iter().any(|&b| b == 0 || b > ctx.train.len()) {
        return Err(Error::Config(format!(
            "batch sizes must be in [1, {}]",
            ctx.train.len()
        )));
    }

    let init = ctx.init_checkpoint(cfg, 0);
    let results: Vec<(f64, Vec<f64>)> = sizes
        .par_iter()
        .map(|&batch| {
            let mut tc = TrainConfig::new(
                cfg.optimizer,
                batch,
                SampleStrategy::EpochShuffle,
                derive_seed(cfg.seed, &[SWEEP_TAG, batch as u64]),
            );
            tc.stop = StopRule::fixed_epochs(sweep.epochs);
            let trace = train(&ctx.net, &init, &ctx.train, &ctx.test, &tc)?;
            let sol = TrainedSolution {
                regime: Regime::Lb,
                trial: 0,
                checkpoint: trace.best.clone(),
                train_acc: 0.0,
                test_acc: trace.best_record().test_acc,
                final_loss: trace.best_record().train_loss,
                epochs: trace.epochs_run,
                diverged: false,
            };
            let mut phis = Vec::with_capacity(cfg.epsilons.len());
            for (ei, &eps) in cfg.epsilons.iter().enumerate() {
                phis.push(measure_phi(&ctx, cfg, &sol, eps, ei, SubspaceChoice::Full)?.phi);
            }
            Ok((sol.test_acc, phis))
        })
        .collect::<Result<_>>()?;

    let mut header = vec!["batch_size".to_string(), "test_acc".to_string()];
    for &eps in &cfg.epsilons {
        header.push(format!("phi_eps_{}", fmt_f64(eps)));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut table = CsvTable::new(ctx.hash, cfg.seed, &header_refs);
    for (batch, (acc, phis)) in sizes.iter().zip(&results) {
        let mut row = vec![batch.to_string(), fmt_f64(*acc)];
        row.extend(phis.iter().map(|&p| fmt_f64(p)));
        table.push_row(row);
    }
    Ok(table.to_text())
}

/// Warm-start a large-batch run from every epoch snapshot of a small-batch
/// run; one row per warm-start epoch (including 0 = from scratch).
pub fn run_piggyback(cfg: &ExperimentConfig) -> Result<String> {
    let ctx = Context::build(cfg)?;
    let warm_epochs = cfg.piggyback.warm_epochs;
    if warm_epochs == 0 {
        return Err(Error::Config("piggyback.warm_epochs must be positive".into()));
    }
    let lb_epochs = cfg.piggyback.lb_epochs_or_default();

    let init = ctx.init_checkpoint(cfg, 0);
    let sb_cfg =
        ctx.regime_train_config(cfg, Regime::Sb, 0, StopRule::fixed_epochs(warm_epochs), true);
    let sb = train(&ctx.net, &init, &ctx.train, &ctx.test, &sb_cfg)?;
    let snapshots = sb.snapshots.as_ref().expect("snapshots enabled");

    let lb_rows: Vec<(f64, f64)> = (0..=warm_epochs)
        .into_par_iter()
        .map(|w| {
            let start = &snapshots[w.min(snapshots.len() - 1)];
            let lb_cfg =
                ctx.regime_train_config(cfg, Regime::Lb, 0, StopRule::fixed_epochs(lb_epochs), false);
            let trace = train(&ctx.net, start, &ctx.train, &ctx.test, &lb_cfg)?;
            let sol = TrainedSolution {
                regime: Regime::Lb,
                trial: 0,
                checkpoint: trace.best.clone(),
                train_acc: 0.0,
                test_acc: trace.best_record().test_acc,
                final_loss: trace.best_record().train_loss,
                epochs: trace.epochs_run,
                diverged: false,
            };
            let phi = measure_phi(&ctx, cfg, &sol, cfg.epsilons[0], 0, SubspaceChoice::Full)?.phi;
            Ok((sol.test_acc, phi))
        })
        .collect::<Result<_>>()?;

    let mut table = CsvTable::new(
        ctx.hash,
        cfg.seed,
        &["warm_epochs", "sb_test_acc", "lb_test_acc", "lb_phi"],
    );
    for (w, (lb_acc, lb_phi)) in lb_rows.iter().enumerate() {
        table.push_row(vec![
            w.to_string(),
            fmt_f64(sb.records[w].test_acc),
            fmt_f64(*lb_acc),
            fmt_f64(*lb_phi),
        ]);
    }
    Ok(table.to_text())
}

/// Sharpness and full-train loss along both training runs from a shared
/// initialization.
pub fn run_trajectory(cfg: &ExperimentConfig) -> Result<String> {
    let ctx = Context::build(cfg)?;
    let epochs = cfg.trajectory.epochs.max(1);
    let stride = cfg.trajectory.stride.max(1);
    let init = ctx.init_checkpoint(cfg, 0);

    let mut traces = Vec::new();
    for regime in [Regime::Sb, Regime::Lb] {
        let mut tc = ctx.regime_train_config(cfg, regime, 0, StopRule::fixed_epochs(epochs), true);
        tc.snapshots = true;
        traces.push((regime, train(&ctx.net, &init, &ctx.train, &ctx.test, &tc)?));
    }

    let mut tasks = Vec::new();
    for (regime, trace) in &traces {
        for epoch in (0..=trace.epochs_run).step_by(stride) {
            tasks.push((*regime, epoch, trace));
        }
    }
    let phis: Vec<f64> = tasks
        .par_iter()
        .map(|(regime, epoch, trace)| {
            let snap = &trace.snapshots.as_ref().expect("snapshots enabled")[*epoch];
            let sol = TrainedSolution {
                regime: *regime,
                trial: 0,
                checkpoint: snap.clone(),
                train_acc: 0.0,
                test_acc: 0.0,
                final_loss: trace.records[*epoch].train_loss,
                epochs: *epoch,
                diverged: false,
            };
            Ok(measure_phi(&ctx, cfg, &sol, cfg.epsilons[0], 0, SubspaceChoice::Full)?.phi)
        })
        .collect::<Result<_>>()?;

    let mut table =
        CsvTable::new(ctx.hash, cfg.seed, &["step", "regime", "full_train_loss", "phi"]);
    for ((regime, epoch, trace), phi) in tasks.iter().zip(&phis) {
        table.push_row(vec![
            epoch.to_string(),
            regime.label().into(),
            fmt_f64(trace.records[*epoch].train_loss),
            fmt_f64(*phi),
        ]);
    }
    Ok(table.to_text())
}

fn default_strategies(ctx: &Context) -> Vec<StrategyConfig> {
    let mut out = Vec::new();
    if ctx.train.image_shape().is_some() {
        out.push(StrategyConfig::Augment { policy: Default::default() });
    }
    out.push(StrategyConfig::Conservative { lambda: 1e-3, inner_iters: 3 });
    out.push(StrategyConfig::Adversarial { eta: 0.1 });
    out
}

/// Large-batch training under each remedy, with plain SB and LB baselines.
pub fn run_remedies(cfg: &ExperimentConfig) -> Result<String> {
    let ctx = Context::build(cfg)?;
    let strategies = match &cfg.remedies {
        Some(RemediesConfig { strategies }) => strategies.clone(),
        None => default_strategies(&ctx),
    };
    if let Some(s) =
        strategies.iter().find(|s| matches!(s, StrategyConfig::Augment { .. }))
    {
        if ctx.train.image_shape().is_none() {
            return Err(Error::Config(format!(
                "strategy {} needs an image-shaped dataset",
                s.name()
            )));
        }
    }

    // (strategy label, trial) tasks; labels fixed up front for ordering.
    let mut labels: Vec<String> = vec!["sb_baseline".into(), "lb_baseline".into()];
    labels.extend(strategies.iter().map(|s| s.name().to_string()));

    let mut tasks = Vec::new();
    for (si, _) in labels.iter().enumerate() {
        for trial in 0..cfg.trials {
            tasks.push((si, trial));
        }
    }

    let results: Vec<(f64, Vec<f64>)> = tasks
        .par_iter()
        .map(|&(si, trial)| {
            let init = ctx.init_checkpoint(cfg, trial);
            let trace = match si {
                0 => {
                    let tc = ctx.regime_train_config(cfg, Regime::Sb, trial, cfg.stop, false);
                    train(&ctx.net, &init, &ctx.train, &ctx.test, &tc)?
                }
                1 => {
                    let tc = ctx.regime_train_config(cfg, Regime::Lb, trial, cfg.stop, false);
                    train(&ctx.net, &init, &ctx.train, &ctx.test, &tc)?
                }
                _ => {
                    let mut tc = ctx.regime_train_config(cfg, Regime::Lb, trial, cfg.stop, false);
                    match &strategies[si - 2] {
                        StrategyConfig::Augment { policy } => {
                            tc.augment = Some(*policy);
                            train(&ctx.net, &init, &ctx.train, &ctx.test, &tc)?
                        }
                        StrategyConfig::Adversarial { eta } => {
                            tc.adversarial_eta = Some(*eta);
                            train(&ctx.net, &init, &ctx.train, &ctx.test, &tc)?
                        }
                        StrategyConfig::Conservative { lambda, inner_iters } => conservative_train(
                            &ctx.net,
                            &init,
                            &ctx.train,
                            &ctx.test,
                            &tc,
                            *lambda,
                            *inner_iters,
                        )?,
                    }
                }
            };
            let sol = TrainedSolution {
                regime: if si == 0 { Regime::Sb } else { Regime::Lb },
                trial,
                checkpoint: trace.best.clone(),
                train_acc: trace.best_record().train_acc,
                test_acc: trace.best_record().test_acc,
                final_loss: trace.best_record().train_loss,
                epochs: trace.epochs_run,
                diverged: false,
            };
            let mut phis = Vec::with_capacity(cfg.epsilons.len());
            for (ei, &eps) in cfg.epsilons.iter().enumerate() {
                phis.push(measure_phi(&ctx, cfg, &sol, eps, ei, SubspaceChoice::Full)?.phi);
            }
            Ok((sol.test_acc, phis))
        })
        .collect::<Result<_>>()?;

    let mut header = vec!["strategy".to_string(), "trial".to_string(), "test_acc".to_string()];
    for &eps in &cfg.epsilons {
        header.push(format!("phi_eps_{}", fmt_f64(eps)));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut table = CsvTable::new(ctx.hash, cfg.seed, &header_refs);
    for (&(si, trial), (acc, phis)) in tasks.iter().zip(&results) {
        let mut row = vec![labels[si].clone(), trial.to_string(), fmt_f64(*acc)];
        row.extend(phis.iter().map(|&p| fmt_f64(p)));
        table.push_row(row);
    }
    // mean/std per strategy
    for (si, label) in labels.iter().enumerate() {
        let accs: Vec<f64> = tasks
            .iter()
            .zip(&results)
            .filter(|((tsi, _), _)| *tsi == si)
            .map(|(_, (acc, _))| *acc)
            .collect();
        let (acc_mean, acc_std) = mean_std(&accs);
        let mut phi_stats = Vec::new();
        for ei in 0..cfg.epsilons.len() {
            let phis: Vec<f64> = tasks
                .iter()
                .zip(&results)
                .filter(|((tsi, _), _)| *tsi == si)
                .map(|(_, (_, phis))| phis[ei])
                .collect();
            phi_stats.push(mean_std(&phis));
        }
        for (which, idx) in [("mean", 0usize), ("std", 1)] {
            let acc = if idx == 0 { acc_mean } else { acc_std };
            let mut row = vec![label.clone(), which.to_string(), fmt_f64(acc)];
            for &(m, s) in &phi_stats {
                row.push(fmt_f64(if idx == 0 { m } else { s }));
            }
            table.push_row(row);
        }
    }
    Ok(table.to_text())
}

/// Single-row CSV for the analytic speedup bound.
pub fn run_perfmodel(cfg: &ExperimentConfig) -> Result<String> {
    let inputs = cfg
        .perfmodel
        .ok_or_else(|| Error::Config("perfmodel needs a perfmodel section".into()))?;
    let out = crate::harness::perfmodel::perf_speedup_bound(&inputs)?;
    let mut table = CsvTable::new(
        cfg.hash(),
        cfg.seed,
        &["i_s", "i_l", "b_s", "b_l", "p", "f_s", "bound", "lb_faster"],
    );
    table.push_row(vec![
        fmt_f64(inputs.i_s),
        fmt_f64(inputs.i_l),
        fmt_f64(inputs.b_s),
        fmt_f64(inputs.b_l),
        fmt_f64(inputs.p),
        fmt_f64(inputs.f_s),
        fmt_f64(out.bound),
        out.lb_faster.to_string(),
    ]);
    Ok(table.to_text())
}

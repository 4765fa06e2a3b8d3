//! Command-line surface: one subcommand per experiment, shared flags, file
//! emission.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, ExperimentKind};
use crate::harness::experiments::{self, Regime, TrainedSolution};
use crate::harness::svg::{Axis, ChartSpec, SeriesSpec};
use crate::net::ParamVector;

#[derive(Debug, Parser)]
#[command(
    name = "flatmin",
    version,
    about = "Train small networks in small/large-batch regimes and measure minimizer sharpness"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Baseline small-batch vs large-batch accuracy table.
    Train(RunArgs),
    /// Sharpness of trained minimizers per epsilon and subspace.
    Sharpness(RunArgs),
    /// Linear and curvilinear slices between two minimizers.
    Slice(RunArgs),
    /// Accuracy and sharpness across batch sizes.
    Sweep(RunArgs),
    /// Warm-start a large-batch run from small-batch snapshots.
    Piggyback(RunArgs),
    /// Sharpness versus loss along both training runs.
    Trajectory(RunArgs),
    /// Large-batch remedies: augmentation, conservative, adversarial.
    Remedies(RunArgs),
    /// Analytic large-batch speedup bound.
    Perfmodel(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for CSV/SVG artifacts (default: current directory).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads (0 = all cores). Outputs are identical for any value.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Also emit an SVG plot where the experiment has one.
    #[arg(long)]
    pub svg: bool,
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Train(_) => ExperimentKind::Baseline,
            Command::Sharpness(_) => ExperimentKind::SharpnessTable,
            Command::Slice(_) => ExperimentKind::Slice,
            Command::Sweep(_) => ExperimentKind::BatchSweep,
            Command::Piggyback(_) => ExperimentKind::Piggyback,
            Command::Trajectory(_) => ExperimentKind::Trajectory,
            Command::Remedies(_) => ExperimentKind::Remedies,
            Command::Perfmodel(_) => ExperimentKind::Perfmodel,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Train(a)
            | Command::Sharpness(a)
            | Command::Slice(a)
            | Command::Sweep(a)
            | Command::Piggyback(a)
            | Command::Trajectory(a)
            | Command::Remedies(a)
            | Command::Perfmodel(a) => a,
        }
    }
}

/// Run a parsed CLI invocation; returns the paths written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let args = cli.command.args();
    let kind = cli.command.kind();
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(declared) = cfg.experiment {
        if declared != kind {
            return Err(Error::Config(format!(
                "config declares experiment {declared:?} but the {kind:?} subcommand was invoked"
            )));
        }
    }
    let out_dir = args.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| execute(kind, &cfg, &out_dir, args.svg))
}

/// Dispatch one experiment and write its artifacts.
pub fn execute(
    kind: ExperimentKind,
    cfg: &ExperimentConfig,
    out_dir: &Path,
    svg: bool,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let write = |name: &str, text: &str| -> Result<PathBuf> {
        let path = out_dir.join(name);
        std::fs::write(&path, text)?;
        Ok(path)
    };

    match kind {
        ExperimentKind::Baseline => {
            let out = experiments::run_baseline(cfg)?;
            written.push(write("baseline.csv", &out.csv)?);
            if cfg.save_snapshots {
                for sol in &out.solutions {
                    let name = format!("params_{}_{}.mspv", sol.regime.label(), sol.trial);
                    let path = out_dir.join(&name);
                    let mut file = std::fs::File::create(&path)?;
                    sol.checkpoint.params.write_snapshot(&mut file)?;
                    written.push(path);
                }
            }
        }
        ExperimentKind::SharpnessTable => {
            let solutions = match &cfg.solutions {
                Some(refs) => load_solutions(cfg, refs)?,
                None => {
                    let out = experiments::run_baseline(cfg)?;
                    written.push(write("baseline.csv", &out.csv)?);
                    out.solutions
                }
            };
            let csv = experiments::run_sharpness_table(cfg, &solutions)?;
            written.push(write("sharpness.csv", &csv)?);
        }
        ExperimentKind::Slice => {
            let csv = experiments::run_slice(cfg)?;
            written.push(write("slice.csv", &csv)?);
            if svg {
                let chart = slice_chart();
                written.push(write("slice.svg", &crate::harness::svg::render_chart(&csv, &chart)?)?);
            }
        }
        ExperimentKind::BatchSweep => {
            let csv = experiments::run_batch_sweep(cfg)?;
            written.push(write("sweep.csv", &csv)?);
            if svg {
                let chart = sweep_chart(cfg);
                written.push(write("sweep.svg", &crate::harness::svg::render_chart(&csv, &chart)?)?);
            }
        }
        ExperimentKind::Piggyback => {
            let csv = experiments::run_piggyback(cfg)?;
            written.push(write("piggyback.csv", &csv)?);
            if svg {
                let chart = piggyback_chart();
                written
                    .push(write("piggyback.svg", &crate::harness::svg::render_chart(&csv, &chart)?)?);
            }
        }
        ExperimentKind::Trajectory => {
            let csv = experiments::run_trajectory(cfg)?;
            written.push(write("trajectory.csv", &csv)?);
            if svg {
                let chart = trajectory_chart();
                written
                    .push(write("trajectory.svg", &crate::harness::svg::render_chart(&csv, &chart)?)?);
            }
        }
        ExperimentKind::Remedies => {
            let csv = experiments::run_remedies(cfg)?;
            written.push(write("remedies.csv", &csv)?);
        }
        ExperimentKind::Perfmodel => {
            let csv = experiments::run_perfmodel(cfg)?;
            written.push(write("perfmodel.csv", &csv)?);
        }
    }
    Ok(written)
}

/// Load parameter snapshots referenced by the config. Batch-norm running
/// statistics are not stored in snapshot files; they are re-estimated with
/// one train-mode pass over the training data.
fn load_solutions(
    cfg: &ExperimentConfig,
    refs: &[crate::harness::config::SolutionRef],
) -> Result<Vec<TrainedSolution>> {
    let ctx_net = crate::net::Network::new(cfg.network.clone())?;
    let ctx = experiments_context(cfg)?;
    let mut out = Vec::with_capacity(refs.len());
    for r in refs {
        let regime = match r.regime.as_str() {
            "sb" => Regime::Sb,
            "lb" => Regime::Lb,
            other => return Err(Error::Config(format!("unknown regime {other:?}"))),
        };
        let mut file = std::fs::File::open(&r.path).map_err(|e| Error::Config(format!(
            "snapshot {}: {e}",
            r.path.display()
        )))?;
        let params =
            ParamVector::read_snapshot(&mut file, std::sync::Arc::clone(ctx_net.layout()))?;
        let mut state = ctx_net.fresh_state();
        // Re-estimate running statistics.
        let chunk = 256;
        let mut start = 0;
        while start < ctx.0.len() {
            let end = (start + chunk).min(ctx.0.len());
            if end - start >= 2 {
                let (inputs, _) = ctx.0.rows_tensor(start, end);
                ctx_net.forward(&params, &inputs, crate::net::EvalMode::Train, &mut state)?;
            }
            start = end;
        }
        let test_acc = ctx_net.accuracy(&params, &ctx.1, &state)?;
        let train_acc = ctx_net.accuracy(&params, &ctx.0, &state)?;
        let final_loss = ctx_net.mean_loss(&params, &ctx.0, &state)?;
        out.push(TrainedSolution {
            regime,
            trial: r.trial,
            checkpoint: crate::optim::Checkpoint { params, bn_state: state },
            train_acc,
            test_acc,
            final_loss,
            epochs: 0,
            diverged: false,
        });
    }
    Ok(out)
}

fn experiments_context(
    cfg: &ExperimentConfig,
) -> Result<(crate::data::Dataset, crate::data::Dataset)> {
    use crate::harness::config::DatasetSource;
    match &cfg.dataset {
        DatasetSource::Synthetic { m_train, m_test, dim, classes, separation } => {
            crate::data::synth_gaussian(*m_train, *m_test, *dim, *classes, *separation, cfg.seed)
        }
        DatasetSource::Idx { train_images, train_labels, test_images, test_labels, .. } => Ok((
            crate::data::load_idx(train_images, train_labels)?,
            crate::data::load_idx(test_images, test_labels)?,
        )),
    }
}

fn slice_chart() -> ChartSpec {
    ChartSpec {
        title: "loss and accuracy along the path between minimizers".into(),
        x_col: "alpha".into(),
        x_log: false,
        left_label: "cross-entropy loss".into(),
        right_label: "accuracy".into(),
        series: vec![
            SeriesSpec {
                y_col: "train_loss".into(),
                label: "train loss (linear)".into(),
                axis: Axis::Left,
                filter: Some(("kind".into(), "linear".into())),
            },
            SeriesSpec {
                y_col: "test_loss".into(),
                label: "test loss (linear)".into(),
                axis: Axis::Left,
                filter: Some(("kind".into(), "linear".into())),
            },
            SeriesSpec {
                y_col: "train_acc".into(),
                label: "train acc (linear)".into(),
                axis: Axis::Right,
                filter: Some(("kind".into(), "linear".into())),
            },
            SeriesSpec {
                y_col: "test_acc".into(),
                label: "test acc (linear)".into(),
                axis: Axis::Right,
                filter: Some(("kind".into(), "linear".into())),
            },
        ],
    }
}

fn sweep_chart(cfg: &ExperimentConfig) -> ChartSpec {
    let mut series = vec![SeriesSpec {
        y_col: "test_acc".into(),
        label: "test accuracy".into(),
        axis: Axis::Left,
        filter: None,
    }];
    for &eps in &cfg.epsilons {
        let col = format!("phi_eps_{}", crate::harness::csv::fmt_f64(eps));
        series.push(SeriesSpec {
            y_col: col.clone(),
            label: col,
            axis: Axis::Right,
            filter: None,
        });
    }
    ChartSpec {
        title: "testing accuracy and sharpness vs batch size".into(),
        x_col: "batch_size".into(),
        x_log: true,
        left_label: "test accuracy".into(),
        right_label: "sharpness (percent)".into(),
        series,
    }
}

fn piggyback_chart() -> ChartSpec {
    ChartSpec {
        title: "warm-started large-batch runs".into(),
        x_col: "warm_epochs".into(),
        x_log: false,
        left_label: "test accuracy".into(),
        right_label: "sharpness (percent)".into(),
        series: vec![
            SeriesSpec {
                y_col: "sb_test_acc".into(),
                label: "small-batch accuracy".into(),
                axis: Axis::Left,
                filter: None,
            },
            SeriesSpec {
                y_col: "lb_test_acc".into(),
                label: "piggybacked LB accuracy".into(),
                axis: Axis::Left,
                filter: None,
            },
            SeriesSpec {
                y_col: "lb_phi".into(),
                label: "piggybacked LB sharpness".into(),
                axis: Axis::Right,
                filter: None,
            },
        ],
    }
}

fn trajectory_chart() -> ChartSpec {
    ChartSpec {
        title: "sharpness vs cross-entropy loss".into(),
        x_col: "full_train_loss".into(),
        x_log: false,
        left_label: "sharpness (percent)".into(),
        right_label: String::new(),
        series: vec![
            SeriesSpec {
                y_col: "phi".into(),
                label: "small batch".into(),
                axis: Axis::Left,
                filter: Some(("regime".into(), "sb".into())),
            },
            SeriesSpec {
                y_col: "phi".into(),
                label: "large batch".into(),
                axis: Axis::Left,
                filter: Some(("regime".into(), "lb".into())),
            },
        ],
    }
}

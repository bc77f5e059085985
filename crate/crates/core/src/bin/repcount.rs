use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use repcount::cli::{
    cmd_eval, cmd_gen_data, cmd_infer, cmd_render, cmd_train, parse_similarity, parse_target, RenderKind, RunConfig,
};

#[derive(Parser)]
#[command(name = "repcount", version, about = "Repetition counting from per-frame embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run config; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Model {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Embedding file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Keep every n-th frame.
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic embedding/annotation pairs and a manifest.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Number of sequences.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Train a network and write a checkpoint and loss history.
    Train {
        #[command(flatten)]
        common: Common,
        /// Directory with a manifest.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, value_parser = ["hamming", "euclidean", "correlation"])]
        similarity: Option<String>,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long, value_parser = ["start", "periodicity"])]
        target: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Count repetitions in one embedding file.
    Infer {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Count every sequence of a dataset and report metrics per threshold.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Directory with a manifest.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Repeat for a sweep.
        #[arg(long)]
        threshold: Vec<f64>,
        #[arg(long)]
        stride: Option<usize>,
        /// Score the training targets instead of a network.
        #[arg(long)]
        oracle: bool,
    },
    /// Write a PPM image of a TSM or a probability trace.
    Render {
        #[command(flatten)]
        common: Common,
        what: What,
        #[command(flatten)]
        model: Model,
        /// Annotation file (tsm-reference).
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Pixels per cell or frame.
        #[arg(long)]
        scale: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    TsmPredicted,
    TsmReference,
    Probs,
}

fn base_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))?,
        None => RunConfig::default(),
    };
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if let Some(out) = &common.out {
        cfg.paths.out_dir = out.clone();
    }
    Ok(cfg)
}

fn apply_model(cfg: &mut RunConfig, model: Model) {
    if model.checkpoint.is_some() {
        cfg.paths.checkpoint = model.checkpoint;
    }
    if model.input.is_some() {
        cfg.paths.input = model.input;
    }
    if let Some(s) = model.stride {
        cfg.train.stride = s;
    }
}

fn finish(cfg: RunConfig) -> Result<RunConfig> {
    let cfg = cfg.resolve();
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { common, count } => {
            let mut cfg = base_config(&common)?;
            if let Some(n) = count {
                cfg.count = n;
            }
            let cfg = finish(cfg)?;
            let entries = cmd_gen_data(&cfg)?;
            println!("wrote {} sequences to {}", entries.len(), cfg.paths.out_dir.display());
        }
        Command::Train {
            common,
            data,
            resume,
            lambda,
            similarity,
            stride,
            target,
            epochs,
            learning_rate,
            batch_size,
        } => {
            let mut cfg = base_config(&common)?;
            if data.is_some() {
                cfg.paths.data_dir = data;
            }
            if resume.is_some() {
                cfg.paths.resume = resume;
            }
            if let Some(v) = lambda {
                cfg.network.lambda = v;
            }
            if let Some(name) = similarity {
                cfg.network.similarity = parse_similarity(&name)?;
            }
            if let Some(v) = stride {
                cfg.train.stride = v;
            }
            if let Some(name) = target {
                cfg.network.target_mode = parse_target(&name)?;
            }
            if let Some(v) = epochs {
                cfg.train.epochs = v;
            }
            if let Some(v) = learning_rate {
                cfg.train.learning_rate = v;
            }
            if let Some(v) = batch_size {
                cfg.train.batch_size = v;
            }
            let cfg = finish(cfg)?;
            let outcome = cmd_train(&cfg)?;
            match outcome.history.last() {
                Some(r) => println!(
                    "trained {} epochs, adam step {}, final loss {} (sse {}, treco {})",
                    outcome.history.len(),
                    outcome.state.adam.step,
                    r.total,
                    r.sse,
                    r.treco
                ),
                None => println!("no epochs run"),
            }
        }
        Command::Infer {
            common,
            model,
            threshold,
        } => {
            let mut cfg = base_config(&common)?;
            apply_model(&mut cfg, model);
            if let Some(t) = threshold {
                cfg.train.prominence_threshold = t;
            }
            let cfg = finish(cfg)?;
            let inference = cmd_infer(&cfg, cfg.train.prominence_threshold)?;
            println!("{}", inference.count);
        }
        Command::Eval {
            common,
            checkpoint,
            data,
            threshold,
            stride,
            oracle,
        } => {
            let mut cfg = base_config(&common)?;
            if checkpoint.is_some() {
                cfg.paths.checkpoint = checkpoint;
            }
            if data.is_some() {
                cfg.paths.data_dir = data;
            }
            if !threshold.is_empty() {
                cfg.thresholds = threshold;
            }
            if let Some(s) = stride {
                cfg.train.stride = s;
            }
            let cfg = finish(cfg)?;
            for r in cmd_eval(&cfg, oracle)? {
                println!(
                    "threshold {} stride {}: oboa {:.4} mae {:.4} (n {}, zero-count excluded {})",
                    r.threshold, r.stride, r.result.oboa, r.result.mae, r.result.n, r.result.excluded_zero_gt
                );
            }
        }
        Command::Render {
            common,
            what,
            model,
            annotations,
            threshold,
            scale,
        } => {
            let mut cfg = base_config(&common)?;
            apply_model(&mut cfg, model);
            if annotations.is_some() {
                cfg.paths.annotations = annotations;
            }
            if let Some(t) = threshold {
                cfg.train.prominence_threshold = t;
            }
            if let Some(s) = scale {
                cfg.render_scale = s;
            }
            let cfg = finish(cfg)?;
            let kind = match what {
                What::TsmPredicted => RenderKind::TsmPredicted,
                What::TsmReference => RenderKind::TsmReference,
                What::Probs => RenderKind::Probs,
            };
            let (path, marks) = cmd_render(&cfg, kind, cfg.train.prominence_threshold)?;
            println!("wrote {}", path.display());
            if kind == RenderKind::Probs {
                println!("peaks {marks:?}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

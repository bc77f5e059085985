//! Command implementations behind the `repcount` binary. Each command takes a
//! validated [`RunConfig`] and writes its artifacts under `paths.out_dir`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::counting::{count_repetitions, TargetMode};
use crate::data::{
    derive_seed, generate_sequence, read_annotations, read_embeddings, write_annotations, write_atomic,
    write_embeddings, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalConfig, EvalResult, OraclePredictor};
use crate::network::{
    forward, read_checkpoint, train_from, write_checkpoint, NetworkConfig, NetworkState, Sample, TrainConfig,
    TrainOutcome,
};
use crate::render::{render_heatmap, render_trace};
use crate::similarity::{predicted_tsm, reference_tsm, SimilarityMeasure};
use crate::Real;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.racw";
pub const LOSS_FILE: &str = "loss.csv";
pub const PROBABILITIES_FILE: &str = "probabilities.csv";
pub const EVAL_FILE: &str = "eval.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunPaths {
    /// Directory holding `manifest.json` and the files it lists.
    pub data_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Checkpoint to continue training from.
    pub resume: Option<PathBuf>,
    /// Embedding file for `infer` and `render`.
    pub input: Option<PathBuf>,
    /// Annotation file for `render tsm-reference`.
    pub annotations: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for RunPaths {
    fn default() -> Self {
        Self {
            data_dir: None,
            checkpoint: None,
            resume: None,
            input: None,
            annotations: None,
            out_dir: PathBuf::from("."),
        }
    }
}

/// Everything a run needs. Loaded from JSON; command-line flags override
/// individual keys afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// When set, overrides both `network.seed` and `synthetic.rng_seed`.
    pub seed: Option<u64>,
    /// Number of sequences `gen-data` writes.
    pub count: usize,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub synthetic: SyntheticSpec,
    pub paths: RunPaths,
    /// Prominence thresholds for `eval`; empty means `train.prominence_threshold`.
    pub thresholds: Vec<f64>,
    /// Pixels per cell or frame in renders.
    pub render_scale: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            count: 10,
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
            synthetic: SyntheticSpec::default(),
            paths: RunPaths::default(),
            thresholds: Vec::new(),
            render_scale: 2,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Pushes `seed` down into the sections that consume it.
    pub fn resolve(mut self) -> Self {
        if let Some(seed) = self.seed {
            self.network.seed = seed;
            self.synthetic.rng_seed = seed;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.train.validate()?;
        self.synthetic.validate()?;
        if let Some(t) = self.thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::InvalidValue(format!("threshold {t} outside [0, 1]")));
        }
        if self.render_scale == 0 {
            return Err(Error::InvalidValue("render_scale must be >= 1".into()));
        }
        Ok(())
    }

    fn eval_thresholds(&self) -> Vec<f64> {
        if self.thresholds.is_empty() {
            vec![self.train.prominence_threshold]
        } else {
            self.thresholds.clone()
        }
    }

    fn out(&self, file: &str) -> Result<PathBuf> {
        let dir = &self.paths.out_dir;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(dir.join(file))
    }
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a PathBuf> {
    p.as_ref()
        .ok_or_else(|| Error::InvalidValue(format!("no {what} path given")))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub seed: u64,
    /// Relative to the manifest's directory.
    pub embeddings: String,
    pub annotations: String,
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads every sequence listed in `dir/manifest.json`.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<Sample<Real>>> {
    let dir = dir.as_ref();
    read_manifest(dir)?
        .iter()
        .map(|e| {
            let embeddings = read_embeddings(dir.join(&e.embeddings))?;
            let track = read_annotations(dir.join(&e.annotations))?;
            if track.total_frames() != embeddings.len() {
                return Err(Error::Dimension(format!(
                    "{}: {} frames but annotation covers {}",
                    e.embeddings,
                    embeddings.len(),
                    track.total_frames()
                )));
            }
            Ok(Sample { embeddings, track })
        })
        .collect()
}

/// Writes `count` generated sequences and a manifest. Sequence `i` uses seed
/// `derive_seed(synthetic.rng_seed, i)`.
pub fn cmd_gen_data(cfg: &RunConfig) -> Result<Vec<ManifestEntry>> {
    cfg.synthetic.validate()?;
    let mut entries = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let seed = derive_seed(cfg.synthetic.rng_seed, i as u64);
        let (embeddings, track) = generate_sequence::<Real>(&cfg.synthetic.with_seed(seed))?;
        let entry = ManifestEntry {
            seed,
            embeddings: format!("seq-{i:05}.race"),
            annotations: format!("seq-{i:05}.json"),
        };
        write_embeddings(&embeddings, cfg.out(&entry.embeddings)?)?;
        write_annotations(&track, cfg.out(&entry.annotations)?)?;
        entries.push(entry);
    }
    let json = serde_json::to_string_pretty(&entries)?;
    write_atomic(cfg.out(MANIFEST_FILE)?, json.as_bytes())?;
    Ok(entries)
}

pub fn loss_csv(outcome: &TrainOutcome<Real>) -> String {
    let mut s = String::from("epoch,sse,treco,total\n");
    for (i, r) in outcome.history.iter().enumerate() {
        let _ = writeln!(s, "{},{},{},{}", i + 1, r.sse, r.treco, r.total);
    }
    s
}

/// Trains on the dataset in `paths.data_dir`, from scratch or from
/// `paths.resume`, and writes the checkpoint and loss history.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome<Real>> {
    let data = load_dataset(required(&cfg.paths.data_dir, "data directory")?)?;
    let first = data
        .first()
        .ok_or_else(|| Error::InvalidValue("training dataset is empty".into()))?;
    let state = match &cfg.paths.resume {
        Some(path) => {
            let net = &cfg.network;
            read_checkpoint::<Real>(path)?.with_objective(net.lambda, net.similarity, net.target_mode)?
        }
        None => NetworkState::new(NetworkConfig {
            input_dim: first.embeddings.dim(),
            ..cfg.network.clone()
        })?,
    };
    let outcome = train_from(state, &data, &cfg.train)?;
    write_checkpoint(&outcome.state, cfg.out(CHECKPOINT_FILE)?)?;
    write_atomic(cfg.out(LOSS_FILE)?, loss_csv(&outcome).as_bytes())?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub count: usize,
    /// Original frame index of each evaluated frame.
    pub frames: Vec<usize>,
    pub probabilities: Vec<Real>,
}

/// Forward pass and peak counting only; no similarity matrix is built.
pub fn cmd_infer(cfg: &RunConfig, threshold: f64) -> Result<Inference> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidValue(format!("threshold {threshold} outside [0, 1]")));
    }
    let state = read_checkpoint::<Real>(required(&cfg.paths.checkpoint, "checkpoint")?)?;
    let seq = read_embeddings::<Real>(required(&cfg.paths.input, "input embeddings")?)?;
    let seq = seq.subsample(cfg.train.stride);
    let probs = forward(&state, &seq)?.probs.values().to_vec();
    let (count, _) = count_repetitions(&probs, threshold as Real);
    let frames: Vec<usize> = (0..probs.len()).map(|i| i * cfg.train.stride).collect();
    let mut csv = String::from("frame,probability\n");
    for (f, p) in frames.iter().zip(&probs) {
        let _ = writeln!(csv, "{f},{p}");
    }
    write_atomic(cfg.out(PROBABILITIES_FILE)?, csv.as_bytes())?;
    Ok(Inference {
        count,
        frames,
        probabilities: probs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub threshold: f64,
    pub stride: usize,
    /// `network` or `oracle`.
    pub predictor: String,
    pub result: EvalResult,
}

/// Evaluates the checkpoint (or, with `oracle`, the training targets
/// themselves) on `paths.data_dir` at every threshold.
pub fn cmd_eval(cfg: &RunConfig, oracle: bool) -> Result<Vec<EvalRecord>> {
    let data = load_dataset(required(&cfg.paths.data_dir, "data directory")?)?;
    let eval_cfg = EvalConfig {
        stride: cfg.train.stride,
        thresholds: cfg.eval_thresholds(),
    };
    let (results, predictor) = if oracle {
        let p = OraclePredictor {
            mode: cfg.network.target_mode,
            sigma: cfg.train.gaussian_sigma,
        };
        (evaluate(&p, &data, &eval_cfg)?, "oracle")
    } else {
        let state = read_checkpoint::<Real>(required(&cfg.paths.checkpoint, "checkpoint")?)?;
        (evaluate(&state, &data, &eval_cfg)?, "network")
    };
    let records: Vec<EvalRecord> = eval_cfg
        .thresholds
        .iter()
        .zip(results)
        .map(|(&threshold, result)| EvalRecord {
            threshold,
            stride: eval_cfg.stride,
            predictor: predictor.into(),
            result,
        })
        .collect();
    let json = serde_json::to_string_pretty(&records)?;
    write_atomic(cfg.out(EVAL_FILE)?, json.as_bytes())?;
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderKind {
    TsmPredicted,
    TsmReference,
    Probs,
}

impl RenderKind {
    pub fn file_name(&self) -> &'static str {
        match self {
            RenderKind::TsmPredicted => "tsm-predicted.ppm",
            RenderKind::TsmReference => "tsm-reference.ppm",
            RenderKind::Probs => "probs.ppm",
        }
    }
}

const TRACE_HEIGHT: usize = 120;

/// Renders one image to `paths.out_dir`. Returns its path and, for `probs`,
/// the marked peak frames.
pub fn cmd_render(cfg: &RunConfig, kind: RenderKind, threshold: f64) -> Result<(PathBuf, Vec<usize>)> {
    let scale = cfg.render_scale;
    let (image, marks) = match kind {
        RenderKind::TsmReference => {
            let track = read_annotations(required(&cfg.paths.annotations, "annotations")?)?;
            let tsm = reference_tsm::<Real>(&track, cfg.train.reference_smoothing)?;
            (render_heatmap(tsm.values(), scale), Vec::new())
        }
        RenderKind::TsmPredicted | RenderKind::Probs => {
            let state = read_checkpoint::<Real>(required(&cfg.paths.checkpoint, "checkpoint")?)?;
            let seq = read_embeddings::<Real>(required(&cfg.paths.input, "input embeddings")?)?;
            let out = forward(&state, &seq.subsample(cfg.train.stride))?;
            if kind == RenderKind::Probs {
                render_trace(out.probs.values(), threshold, scale, TRACE_HEIGHT)
            } else {
                let emb = crate::data::EmbeddingSequence::new(out.embeddings)?;
                let tsm = predicted_tsm(&emb, state.config().similarity)?;
                (render_heatmap(tsm.values(), scale), Vec::new())
            }
        }
    };
    let path = cfg.out(kind.file_name())?;
    write_atomic(&path, &image.to_ppm())?;
    Ok((path, marks))
}

/// Parses a `--similarity` value.
pub fn parse_similarity(name: &str) -> Result<SimilarityMeasure> {
    SimilarityMeasure::from_name(name)
}

/// Parses a `--target` value.
pub fn parse_target(name: &str) -> Result<TargetMode> {
    TargetMode::from_name(name)
}


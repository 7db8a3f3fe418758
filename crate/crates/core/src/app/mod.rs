//! Run configuration and the command implementations behind the `donn` binary.

pub mod selftest;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::tasks::{prepare_task, Task, TaskSource};
use crate::data::{read_cache, write_cache, DataError, DatasetManifest, LabeledImageDataset, SplitTag};
use crate::encode::{encode_bits, encode_record, EncodeError, FieldValue};
use crate::model::pgm::write_pgm16;
use crate::model::{load_model, quantize_phases, save_model, DonnModel, ModelError, DEFAULT_DISTANCE};
use crate::optics::{OpticalGeometry, DEFAULT_ACTIVE_N, DEFAULT_GRID_N, DEFAULT_PITCH, DEFAULT_WAVELENGTH};
use crate::rl::policy::{distill, donn_rollout, export_rollout, ACTION_NAMES};
use crate::rl::{dqn_train_report, DqnConfig, DqnReport, QNet, RlError};
use crate::seed::substream;
use crate::train::{evaluate, format_confusion, train_with_progress, Evaluation, TrainConfig, TrainError, TrainReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_FAILED: i32 = 3;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Failed(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) | AppError::Config(_) => EXIT_USAGE,
            AppError::Data(_) => EXIT_DATA,
            AppError::Failed(_) => EXIT_FAILED,
        }
    }
}

impl From<DataError> for AppError {
    fn from(e: DataError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<EncodeError> for AppError {
    fn from(e: EncodeError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<ModelError> for AppError {
    fn from(e: ModelError) -> Self {
        AppError::Data(e.to_string())
    }
}

impl From<TrainError> for AppError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => AppError::Config(e.to_string()),
            other => AppError::Data(other.to_string()),
        }
    }
}

impl From<RlError> for AppError {
    fn from(e: RlError) -> Self {
        match e {
            RlError::Config(_) => AppError::Config(e.to_string()),
            RlError::NotConverged { .. } => AppError::Failed(e.to_string()),
            other => AppError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Data(format!("i/o error: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, AppError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub wavelength_m: f64,
    pub pitch_m: f64,
    pub grid_n: usize,
    pub active_n: usize,
    pub distance_m: f64,
    pub layers: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            wavelength_m: DEFAULT_WAVELENGTH,
            pitch_m: DEFAULT_PITCH,
            grid_n: DEFAULT_GRID_N,
            active_n: DEFAULT_ACTIVE_N,
            distance_m: DEFAULT_DISTANCE,
            layers: crate::model::DEFAULT_LAYER_COUNT,
        }
    }
}

impl GeometryConfig {
    pub fn geometry(&self) -> Result<OpticalGeometry> {
        OpticalGeometry::new(self.wavelength_m, self.pitch_m, self.grid_n, self.active_n)
            .map_err(|e| AppError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlConfig {
    pub dqn: DqnConfig,
    pub distill_episodes: usize,
    pub heldout_episodes: usize,
    pub max_steps: usize,
    /// Teacher network; defaults to `teacher.json` in the output directory.
    pub teacher: Option<PathBuf>,
}

impl Default for RlConfig {
    fn default() -> Self {
        RlConfig {
            dqn: DqnConfig::default(),
            distill_episodes: 8,
            heldout_episodes: 3,
            max_steps: crate::rl::policy::DEFAULT_MAX_STEPS,
            teacher: None,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    /// Input table; the built-in generator is used when absent.
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub schema: Option<PathBuf>,
    #[serde(default)]
    pub model: Option<PathBuf>,
    /// Manifest written by `encode`; replaces `data` when set.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub synthetic_count: Option<usize>,
    #[serde(default)]
    pub train_fraction: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub rl: RlConfig,
    /// Phase levels applied before `eval`.
    #[serde(default)]
    pub quantize_levels: Option<usize>,
}

impl RunConfig {
    pub fn new(task: Task) -> Self {
        RunConfig {
            task,
            data: None,
            schema: None,
            model: None,
            dataset: None,
            output_dir: default_output_dir(),
            synthetic_count: None,
            train_fraction: None,
            seed: 0,
            train: TrainConfig::default(),
            geometry: GeometryConfig::default(),
            rl: RlConfig::default(),
            quantize_levels: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| AppError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        Ok((RunConfig::from_json(&text)?, text))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, path) in [
            ("data", &self.data),
            ("schema", &self.schema),
            ("model", &self.model),
            ("dataset", &self.dataset),
            ("rl.teacher", &self.rl.teacher),
        ] {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(AppError::Config(format!("{name} file {} does not exist", p.display())));
                }
            }
        }
        if let Some(f) = self.train_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(AppError::Config(format!("train_fraction {f} must lie in (0, 1)")));
            }
        }
        if self.train.seed != 0 && self.train.seed != self.seed {
            return Err(AppError::Config("set the seed at the top level, not under `train`".into()));
        }
        self.train.validate()?;
        self.rl.dqn.validate()?;
        self.geometry.geometry()?;
        if self.geometry.layers == 0 {
            return Err(AppError::Config("geometry.layers must be at least 1".into()));
        }
        Ok(())
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

/// Creates the output directory and archives the config there (verbatim when
/// the original text is available).
pub fn prepare_output(cfg: &RunConfig, raw: Option<&str>) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir)?;
    match raw {
        Some(text) => fs::write(cfg.out("config.json"), text)?,
        None => write_json(&cfg.out("config.json"), cfg)?,
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| AppError::Data(format!("{}: {e}", path.display())))
}

fn source<'a>(cfg: &'a RunConfig) -> TaskSource<'a> {
    match &cfg.data {
        Some(data) => TaskSource::Table {
            data,
            schema: cfg.schema.as_deref(),
        },
        None => TaskSource::Synthetic {
            count: cfg.synthetic_count.unwrap_or(cfg.task.default_synthetic_count()),
        },
    }
}

fn require_table_task(cfg: &RunConfig, command: &str) -> Result<()> {
    if cfg.task == Task::Cartpole {
        return Err(AppError::Usage(format!("task cartpole uses `rl` subcommands, not `{command}`")));
    }
    Ok(())
}

/// Encodes the task into `train.cache`/`test.cache` plus `manifest.json`.
pub fn cmd_encode(cfg: &RunConfig) -> Result<DatasetManifest> {
    require_table_task(cfg, "encode")?;
    let fraction = cfg.train_fraction.unwrap_or(cfg.task.default_train_fraction());
    let enc = prepare_task(cfg.task, source(cfg), substream(cfg.seed, "split"), fraction, cfg.geometry.active_n)?;
    fs::create_dir_all(&cfg.output_dir)?;
    write_cache(cfg.out("train.cache"), &enc.train)?;
    write_cache(cfg.out("test.cache"), &enc.test)?;
    if let Some(schema) = &enc.schema {
        write_json(&cfg.out("schema.json"), schema)?;
    }
    if let Some(sel) = &enc.selected_features {
        write_json(&cfg.out("selected_features.json"), sel)?;
    }
    let manifest = DatasetManifest {
        task: cfg.task.to_string(),
        source: enc.source,
        schema_hash: enc.schema_hash,
        seed: cfg.seed,
        class_names: enc.train.class_names().to_vec(),
        side: enc.train.side(),
        train_fraction: fraction,
        train_size: enc.train.len(),
        test_size: enc.test.len(),
        train_cache: "train.cache".into(),
        test_cache: "test.cache".into(),
    };
    write_json(&cfg.out("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Reads both splits named by a manifest; cache paths are relative to it.
pub fn load_manifest_datasets(path: &Path) -> Result<(DatasetManifest, LabeledImageDataset, LabeledImageDataset)> {
    let manifest: DatasetManifest = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let train = read_cache(dir.join(&manifest.train_cache), manifest.class_names.clone(), SplitTag::Train, manifest.seed)?;
    let test = read_cache(dir.join(&manifest.test_cache), manifest.class_names.clone(), SplitTag::Test, manifest.seed)?;
    Ok((manifest, train, test))
}

/// Train and test splits from `dataset` when given, else encoded on the fly.
pub fn load_datasets(cfg: &RunConfig) -> Result<(LabeledImageDataset, LabeledImageDataset)> {
    if let Some(path) = &cfg.dataset {
        let (_, train, test) = load_manifest_datasets(path)?;
        return Ok((train, test));
    }
    require_table_task(cfg, "train")?;
    let fraction = cfg.train_fraction.unwrap_or(cfg.task.default_train_fraction());
    let enc = prepare_task(cfg.task, source(cfg), substream(cfg.seed, "split"), fraction, cfg.geometry.active_n)?;
    Ok((enc.train, enc.test))
}

fn initial_model(cfg: &RunConfig, class_names: &[String]) -> Result<DonnModel> {
    if let Some(path) = &cfg.model {
        return Ok(load_model(path)?);
    }
    Ok(DonnModel::random(
        cfg.geometry.geometry()?,
        class_names.to_vec(),
        cfg.geometry.layers,
        cfg.geometry.distance_m,
        substream(cfg.seed, "init"),
    )?)
}

fn write_cameras(cfg: &RunConfig, prefix: &str, model: &DonnModel, eval: &Evaluation) -> Result<()> {
    let a = model.geometry().active_n();
    for (k, camera) in eval.mean_camera.iter().enumerate() {
        write_pgm16(cfg.out(&format!("{prefix}_class{k}.pgm")), a, a, camera)?;
    }
    Ok(())
}

fn train_and_write(
    cfg: &RunConfig,
    train_set: &LabeledImageDataset,
    test_set: &LabeledImageDataset,
    progress: &mut dyn FnMut(&str),
) -> Result<(DonnModel, TrainReport)> {
    let model = initial_model(cfg, train_set.class_names())?;
    let (model, report) = train_with_progress(&model, train_set, test_set, &cfg.train_config(), |e| {
        progress(&format!(
            "epoch {:>3}  loss {:.5}  train accuracy {:.4}",
            e.epoch, e.loss, e.train_accuracy
        ))
    })?;
    fs::create_dir_all(&cfg.output_dir)?;
    save_model(&model, cfg.out("model.json"))?;
    write_json(&cfg.out("report.json"), &report)?;
    fs::write(cfg.out("confusion.txt"), report.to_table(model.labels()))?;
    write_cameras(cfg, "camera", &model, &report.test)?;
    Ok((model, report))
}

/// Trains a model; writes `model.json`, `report.json`, `confusion.txt` and
/// per-class mean camera images.
pub fn cmd_train(cfg: &RunConfig, progress: &mut dyn FnMut(&str)) -> Result<(DonnModel, TrainReport)> {
    require_table_task(cfg, "train")?;
    let (train_set, test_set) = load_datasets(cfg)?;
    train_and_write(cfg, &train_set, &test_set, progress)
}

fn model_path(cfg: &RunConfig) -> PathBuf {
    cfg.model.clone().unwrap_or_else(|| cfg.out("model.json"))
}

/// Test-split evaluation of the configured (optionally quantized) model.
pub fn cmd_eval(cfg: &RunConfig) -> Result<Evaluation> {
    require_table_task(cfg, "eval")?;
    let mut model = load_model(model_path(cfg))?;
    if let Some(levels) = cfg.quantize_levels {
        model = quantize_phases(&model, levels)?;
    }
    let (_, test_set) = load_datasets(cfg)?;
    let eval = evaluate(&model, &test_set)?;
    fs::create_dir_all(&cfg.output_dir)?;
    write_json(&cfg.out("eval.json"), &eval)?;
    fs::write(
        cfg.out("eval_confusion.txt"),
        format!("test accuracy: {:.4}\n\n{}", eval.accuracy, format_confusion(&eval.confusion, model.labels())),
    )?;
    write_cameras(cfg, "eval_camera", &model, &eval)?;
    Ok(eval)
}

/// What to classify.
#[derive(Debug, Clone)]
pub enum PredictInput {
    /// Comma-separated feature values in schema order.
    Record(String),
    /// Text file of `active_n²` 0/1 digits (whitespace ignored).
    Bits(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class_index: usize,
    pub label: String,
    pub region_sums: Vec<f64>,
    /// No light reached any detector region; the class defaults to 0.
    pub zero_signal: bool,
}

pub fn cmd_predict(cfg: &RunConfig, input: &PredictInput) -> Result<Prediction> {
    let model = load_model(model_path(cfg))?;
    let side = model.geometry().active_n();
    let bits = match input {
        PredictInput::Bits(path) => read_bits(path, side * side)?,
        PredictInput::Record(line) => {
            let mut encoder = cfg.task.encoder();
            encoder.target_n = side;
            if cfg.task.is_drug() {
                encode_bits(&drug_record(cfg, line)?, &encoder)?
            } else if matches!(cfg.task, Task::Splitter | Task::Cartpole) {
                return Err(AppError::Usage(format!("task {} takes --bits, not --record", cfg.task)));
            } else {
                let schema_path = cfg.schema.clone().unwrap_or_else(|| cfg.out("schema.json"));
                if !schema_path.exists() {
                    return Err(AppError::Config(format!(
                        "record prediction needs a schema; {} does not exist",
                        schema_path.display()
                    )));
                }
                let schema: crate::encode::FeatureSchema = read_json(&schema_path)?;
                encode_record(&parse_record(line, &schema)?, &schema, &encoder)?
            }
        }
    };
    let out = model.forward(&bits)?;
    let zero_signal = out.region_sums.iter().all(|&s| s == 0.0);
    let prediction = Prediction {
        class_index: out.predicted,
        label: model.labels()[out.predicted].clone(),
        region_sums: out.region_sums,
        zero_signal,
    };
    fs::create_dir_all(&cfg.output_dir)?;
    write_json(&cfg.out("prediction.json"), &prediction)?;
    let n = model.geometry().grid_n();
    write_pgm16(cfg.out("prediction_camera.pgm"), n, n, &out.intensity)?;
    Ok(prediction)
}

/// 0/1 mutation flags: either the 144 selected ones, or the full row reduced
/// through `selected_features.json`.
fn drug_record(cfg: &RunConfig, line: &str) -> Result<Vec<u8>> {
    let flags: Vec<u8> = line
        .split(',')
        .map(|f| match f.trim() {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(AppError::Data(format!("`{other}` is not a 0/1 mutation flag"))),
        })
        .collect::<Result<_>>()?;
    let keep = crate::data::tasks::DRUG_SELECTED;
    if flags.len() == keep {
        return Ok(flags);
    }
    let sel_path = cfg.out("selected_features.json");
    if !sel_path.exists() {
        return Err(AppError::Config(format!(
            "a {}-flag record needs {} from `encode`",
            flags.len(),
            sel_path.display()
        )));
    }
    let selected: Vec<usize> = read_json(&sel_path)?;
    selected
        .iter()
        .map(|&i| {
            flags
                .get(i)
                .copied()
                .ok_or_else(|| AppError::Data(format!("record has {} flags, feature {i} selected", flags.len())))
        })
        .collect()
}

fn read_bits(path: &Path, expected: usize) -> Result<Vec<u8>> {
    let text = fs::read_to_string(path).map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
    let bits: Vec<u8> = text
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(AppError::Data(format!("{}: `{other}` is not a bit", path.display()))),
        })
        .collect::<Result<_>>()?;
    if bits.len() != expected {
        return Err(AppError::Data(format!(
            "{}: {} bits, model expects {expected}",
            path.display(),
            bits.len()
        )));
    }
    Ok(bits)
}

fn parse_record(line: &str, schema: &crate::encode::FeatureSchema) -> Result<Vec<FieldValue>> {
    use crate::encode::FeatureDescriptor;
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != schema.features.len() {
        return Err(AppError::Data(format!(
            "record has {} fields, schema has {}",
            fields.len(),
            schema.features.len()
        )));
    }
    schema
        .features
        .iter()
        .zip(fields)
        .map(|(f, raw)| match f {
            FeatureDescriptor::Categorical { .. } => Ok(FieldValue::Text(raw.to_string())),
            FeatureDescriptor::Boolean { .. } => match raw.to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" => Ok(FieldValue::Bool(true)),
                "0" | "false" | "no" => Ok(FieldValue::Bool(false)),
                _ => Err(AppError::Data(format!("`{}`: `{raw}` is not a boolean", f.name()))),
            },
            FeatureDescriptor::Discretized { .. } => raw
                .parse()
                .map(FieldValue::Number)
                .map_err(|_| AppError::Data(format!("`{}`: `{raw}` is not a number", f.name()))),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlCommand {
    Teach,
    Distill,
    Train,
    Run,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutSummary {
    pub seed: u64,
    pub max_steps: usize,
    pub survived: usize,
}

#[derive(Debug)]
pub enum RlOutcome {
    Teacher(QNet, DqnReport),
    Distilled(DatasetManifest),
    Trained(DonnModel, TrainReport),
    Rollout(RolloutSummary),
}

pub fn cmd_rl(cfg: &RunConfig, command: RlCommand, progress: &mut dyn FnMut(&str)) -> Result<RlOutcome> {
    if cfg.task != Task::Cartpole {
        return Err(AppError::Usage(format!("`rl` needs task cartpole, config has {}", cfg.task)));
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let side = cfg.geometry.active_n;
    match command {
        RlCommand::Teach => {
            let (net, report) = dqn_train_report(&cfg.rl.dqn, cfg.seed)?;
            write_json(&cfg.out("teach_report.json"), &report)?;
            if !report.converged {
                return Err(RlError::NotConverged {
                    episodes: report.episode_lengths.len(),
                    best: report.greedy_lengths.iter().copied().max().unwrap_or(0),
                }
                .into());
            }
            net.save(cfg.out("teacher.json"))?;
            progress(&format!("teacher reached the goal after {} episodes", report.episode_lengths.len()));
            Ok(RlOutcome::Teacher(net, report))
        }
        RlCommand::Distill => {
            let teacher_path = cfg.rl.teacher.clone().unwrap_or_else(|| cfg.out("teacher.json"));
            let teacher = QNet::load(&teacher_path)?;
            let train = distill(&teacher, cfg.rl.distill_episodes, substream(cfg.seed, "distill"), cfg.rl.max_steps, side)?;
            let held = distill(&teacher, cfg.rl.heldout_episodes, substream(cfg.seed, "heldout"), cfg.rl.max_steps, side)?;
            write_cache(cfg.out("distill_train.cache"), &train)?;
            write_cache(cfg.out("distill_heldout.cache"), &held)?;
            let manifest = DatasetManifest {
                task: cfg.task.to_string(),
                source: format!("teacher:{}", teacher_path.display()),
                schema_hash: String::new(),
                seed: cfg.seed,
                class_names: ACTION_NAMES.iter().map(|s| s.to_string()).collect(),
                side,
                train_fraction: train.len() as f64 / (train.len() + held.len()).max(1) as f64,
                train_size: train.len(),
                test_size: held.len(),
                train_cache: "distill_train.cache".into(),
                test_cache: "distill_heldout.cache".into(),
            };
            write_json(&cfg.out("distill_manifest.json"), &manifest)?;
            progress(&format!("distilled {} training and {} held-out samples", train.len(), held.len()));
            Ok(RlOutcome::Distilled(manifest))
        }
        RlCommand::Train => {
            let manifest = cfg.dataset.clone().unwrap_or_else(|| cfg.out("distill_manifest.json"));
            let (_, train, held) = load_manifest_datasets(&manifest)?;
            let (model, report) = train_and_write(cfg, &train, &held, progress)?;
            progress(&format!("held-out action agreement {:.4}", report.test.accuracy));
            Ok(RlOutcome::Trained(model, report))
        }
        RlCommand::Run => {
            let model = load_model(model_path(cfg))?;
            let rollout = donn_rollout(&model, cfg.seed, cfg.rl.max_steps, true)?;
            export_rollout(&rollout, model.geometry().active_n(), &cfg.out("rollout"))?;
            let summary = RolloutSummary {
                seed: cfg.seed,
                max_steps: cfg.rl.max_steps,
                survived: rollout.survived,
            };
            write_json(&cfg.out("rollout.json"), &summary)?;
            progress(&format!("policy survived {} of {} steps", summary.survived, summary.max_steps));
            Ok(RlOutcome::Rollout(summary))
        }
    }
}

/// Runs the property suite; fails with exit code 3 when any check fails.
pub fn cmd_selftest(progress: &mut dyn FnMut(&str)) -> Result<Vec<selftest::CheckResult>> {
    let results = selftest::run_selftest();
    for r in &results {
        progress(&format!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail));
    }
    if results.iter().any(|r| !r.passed) {
        return Err(AppError::Failed("self-test failed".into()));
    }
    Ok(results)
}

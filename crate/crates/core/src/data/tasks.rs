//! Task definitions and their encode pipelines, from CSV or from the built-in
//! synthetic generators.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::splitter::{encode_splitter, synth_splitter, SplitterTopology, TOPOLOGY_SIDE};
use super::synth::{synth_onehot_classification, SynthRule};
use super::{
    balance_classes, label_binary, label_drug_response, label_splitter_ratio, load_binary_table,
    load_table, split_indices, DataError, LabeledImageDataset, Result, SplitTag,
};
use crate::encode::{encode_bits, encode_record, lasso_select, EncoderConfig, FeatureSchema, Record};
use crate::seed::substream;

/// Mutation features per drug record.
pub const DRUG_FEATURES: usize = 7798;
/// Features kept after L1 selection.
pub const DRUG_SELECTED: usize = 144;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Mos2,
    C2dbStability,
    C2dbGap,
    C2dbMagnet,
    DrugPd,
    DrugRef,
    DrugSel,
    Splitter,
    Cartpole,
    Synth,
}

pub const ALL_TASKS: [Task; 10] = [
    Task::Mos2,
    Task::C2dbStability,
    Task::C2dbGap,
    Task::C2dbMagnet,
    Task::DrugPd,
    Task::DrugRef,
    Task::DrugSel,
    Task::Splitter,
    Task::Cartpole,
    Task::Synth,
];

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Mos2 => "mos2",
            Task::C2dbStability => "c2db-stability",
            Task::C2dbGap => "c2db-gap",
            Task::C2dbMagnet => "c2db-magnet",
            Task::DrugPd => "drug-pd",
            Task::DrugRef => "drug-ref",
            Task::DrugSel => "drug-sel",
            Task::Splitter => "splitter",
            Task::Cartpole => "cartpole",
            Task::Synth => "synth",
        }
    }

    pub fn class_names(self) -> Vec<String> {
        let names: &[&str] = match self {
            Task::Mos2 => &["unsuccessful", "successful"],
            Task::C2dbStability => &["unstable", "stable"],
            Task::C2dbGap => &["indirect", "direct"],
            Task::C2dbMagnet => &["non-magnetic", "magnetic"],
            Task::DrugPd | Task::DrugRef | Task::DrugSel => &["ineffective", "effective"],
            Task::Splitter => &["5:5", "7:3", "9:1"],
            Task::Cartpole => &["left", "right"],
            Task::Synth => &["class0", "class1"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn encoder(self) -> EncoderConfig {
        match self {
            Task::Mos2 => EncoderConfig::mos2(),
            Task::C2dbStability | Task::C2dbGap | Task::C2dbMagnet => EncoderConfig::c2db(),
            Task::DrugPd | Task::DrugRef | Task::DrugSel => EncoderConfig::drug(),
            Task::Splitter => EncoderConfig::new(TOPOLOGY_SIDE, TOPOLOGY_SIDE, 0.5),
            Task::Cartpole => EncoderConfig::cartpole(),
            Task::Synth => EncoderConfig::new(6, 6, 0.1),
        }
    }

    /// Published train/test sizes (per class for the splitter).
    pub fn reference_split(self) -> Option<(usize, usize)> {
        match self {
            Task::Mos2 => Some((240, 60)),
            Task::C2dbMagnet => Some((952, 202)),
            Task::C2dbStability => Some((800, 208)),
            Task::C2dbGap => Some((220, 52)),
            Task::DrugPd => Some((1465, 349)),
            Task::DrugRef => Some((1329, 355)),
            Task::DrugSel => Some((1482, 328)),
            Task::Splitter => Some((800, 131)),
            Task::Cartpole | Task::Synth => None,
        }
    }

    /// Generator size used when no table is supplied: the published total
    /// (per class for the splitter).
    pub fn default_synthetic_count(self) -> usize {
        match self.reference_split() {
            Some((tr, te)) => tr + te,
            None => 1250,
        }
    }

    pub fn default_train_fraction(self) -> f64 {
        self.reference_split()
            .map_or(0.8, |(tr, te)| tr as f64 / (tr + te) as f64)
    }

    fn is_categorical(self) -> bool {
        matches!(
            self,
            Task::Mos2 | Task::C2dbStability | Task::C2dbGap | Task::C2dbMagnet | Task::Synth
        )
    }

    pub fn is_drug(self) -> bool {
        matches!(self, Task::DrugPd | Task::DrugRef | Task::DrugSel)
    }

    fn is_c2db(self) -> bool {
        matches!(self, Task::C2dbStability | Task::C2dbGap | Task::C2dbMagnet)
    }

    /// Cardinalities and label rule of the synthetic stand-in for categorical tasks.
    pub fn synthetic_spec(self) -> Option<(Vec<usize>, SynthRule)> {
        match self {
            Task::Synth => Some((vec![2, 8, 8, 8, 10], SynthRule::Copy { feature: 0 })),
            // sulfur distance, flow rate, temperature, ramp time (13 values),
            // reaction time, tilted substrate, salt
            Task::Mos2 => Some((
                vec![16, 16, 16, 13, 16, 2, 2],
                SynthRule::AtLeast { feature: 2, threshold: 8 },
            )),
            // atoms per cell, prototype, composition
            Task::C2dbStability => Some((vec![12, 52, 80], SynthRule::AtLeast { feature: 0, threshold: 6 })),
            Task::C2dbGap => Some((vec![12, 52, 80], SynthRule::AtLeast { feature: 1, threshold: 26 })),
            Task::C2dbMagnet => Some((vec![12, 52, 80], SynthRule::AtLeast { feature: 2, threshold: 40 })),
            _ => None,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self> {
        ALL_TASKS
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| DataError::Invalid(format!("unknown task `{s}`")))
    }
}

/// Where a task's raw data comes from.
#[derive(Debug, Clone, Copy)]
pub enum TaskSource<'a> {
    Table {
        data: &'a Path,
        schema: Option<&'a Path>,
    },
    /// Built-in generator; `count` is the total (per class for the splitter).
    Synthetic { count: usize },
}

/// Encoded train and test splits of a task.
#[derive(Debug, Clone)]
pub struct EncodedTask {
    pub task: Task,
    pub train: LabeledImageDataset,
    pub test: LabeledImageDataset,
    pub source: String,
    pub schema_hash: String,
    /// Fitted schema, for categorical tasks.
    pub schema: Option<FeatureSchema>,
    /// Feature columns kept by L1 selection, for drug tasks.
    pub selected_features: Option<Vec<usize>>,
}

/// Loads or generates a task, splits it, and encodes both splits into
/// `target_n × target_n` binary images.
pub fn prepare_task(
    task: Task,
    source: TaskSource<'_>,
    seed: u64,
    train_fraction: f64,
    target_n: usize,
) -> Result<EncodedTask> {
    let mut encoder = task.encoder();
    encoder.target_n = target_n;
    if task.is_categorical() {
        let (schema, records, labels, origin) = match source {
            TaskSource::Table { data, schema } => {
                let schema_path = schema.ok_or_else(|| {
                    DataError::Invalid(format!("task {task} needs a schema file"))
                })?;
                let schema = FeatureSchema::from_json(&std::fs::read_to_string(schema_path)?)?;
                let table = load_table(data, &schema)?;
                let labels = table
                    .targets
                    .iter()
                    .map(|t| label_binary(t))
                    .collect::<Result<Vec<_>>>()?;
                (schema, table.records, labels, data.display().to_string())
            }
            TaskSource::Synthetic { count } => {
                let (cards, rule) = task.synthetic_spec().expect("categorical task");
                let (schema, records, labels) =
                    synth_onehot_classification(&cards, rule, count, substream(seed, task.name()))?;
                (schema, records, labels, format!("synthetic:{count}"))
            }
        };
        return encode_categorical(task, schema, records, labels, origin, seed, train_fraction, &encoder);
    }
    if task.is_drug() {
        let (rows, responses, origin) = match source {
            TaskSource::Table { data, .. } => {
                let table = load_binary_table(data)?;
                let responses = table
                    .targets
                    .iter()
                    .map(|t| {
                        t.trim().parse::<f64>().map_err(|_| DataError::Label {
                            value: t.clone(),
                            message: "drug response must be numeric".into(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                (table.rows, responses, data.display().to_string())
            }
            TaskSource::Synthetic { count } => {
                let (rows, y) = synth_drug(count, DRUG_FEATURES, substream(seed, task.name()));
                (rows, y, format!("synthetic:{count}"))
            }
        };
        return encode_drug(task, rows, responses, origin, seed, train_fraction, &encoder);
    }
    match task {
        Task::Splitter => {
            let (topologies, labels, origin) = match source {
                TaskSource::Table { data, .. } => {
                    let (t, l) = load_splitter_table(data)?;
                    (t, l, data.display().to_string())
                }
                TaskSource::Synthetic { count } => {
                    let mut tops = Vec::new();
                    let mut labels = Vec::new();
                    for class in 0..3 {
                        let t = synth_splitter(class, count, seed)?;
                        labels.extend(std::iter::repeat_n(class, t.len()));
                        tops.extend(t);
                    }
                    (tops, labels, format!("synthetic:{count}x3"))
                }
            };
            let images = topologies
                .iter()
                .map(|t| encode_splitter(t, target_n))
                .collect::<Result<Vec<_>>>()?;
            let all = LabeledImageDataset::new(target_n, images, labels, task.class_names(), SplitTag::All, seed)?;
            let (train, test) = stratified_split(&all, train_fraction, seed)?;
            Ok(EncodedTask {
                task,
                train,
                test,
                source: origin,
                schema_hash: String::new(),
                schema: None,
                selected_features: None,
            })
        }
        _ => Err(DataError::Invalid(format!(
            "task {task} is produced by the reinforcement-learning pipeline"
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
fn encode_categorical(
    task: Task,
    mut schema: FeatureSchema,
    records: Vec<Record>,
    labels: Vec<usize>,
    origin: String,
    seed: u64,
    train_fraction: f64,
    encoder: &EncoderConfig,
) -> Result<EncodedTask> {
    let keep: Vec<usize> = if task.is_c2db() {
        balance_classes(&labels, seed)
    } else {
        (0..records.len()).collect()
    };
    let (train_pos, test_pos) = split_indices(keep.len(), train_fraction, seed)?;
    let train_idx: Vec<usize> = train_pos.iter().map(|&i| keep[i]).collect();
    let test_idx: Vec<usize> = test_pos.iter().map(|&i| keep[i]).collect();
    if schema.needs_fit() {
        let train_records: Vec<Record> = train_idx.iter().map(|&i| records[i].clone()).collect();
        schema.fit_vocabularies(&train_records)?;
    }
    let width = schema.width();
    if width != encoder.reshape_rows * encoder.reshape_cols {
        return Err(DataError::Invalid(format!(
            "schema one-hot width {width} does not fill a {}x{} reshape",
            encoder.reshape_rows, encoder.reshape_cols
        )));
    }
    let encode = |idx: &[usize], split| -> Result<LabeledImageDataset> {
        let images = idx
            .iter()
            .map(|&i| {
                encode_record(&records[i], &schema, encoder).map_err(|e| {
                    DataError::Invalid(format!("record {}: {e}", i + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let labels = idx.iter().map(|&i| labels[i]).collect();
        LabeledImageDataset::new(encoder.target_n, images, labels, task.class_names(), split, seed)
    };
    Ok(EncodedTask {
        task,
        train: encode(&train_idx, SplitTag::Train)?,
        test: encode(&test_idx, SplitTag::Test)?,
        source: origin,
        schema_hash: schema.hash(),
        schema: Some(schema),
        selected_features: None,
    })
}

fn encode_drug(
    task: Task,
    rows: Vec<Vec<u8>>,
    responses: Vec<f64>,
    origin: String,
    seed: u64,
    train_fraction: f64,
    encoder: &EncoderConfig,
) -> Result<EncodedTask> {
    let labels = responses
        .iter()
        .map(|&v| label_drug_response(v))
        .collect::<Result<Vec<_>>>()?;
    let (train_idx, test_idx) = split_indices(rows.len(), train_fraction, seed)?;
    let train_rows: Vec<Vec<u8>> = train_idx.iter().map(|&i| rows[i].clone()).collect();
    let train_y: Vec<f64> = train_idx.iter().map(|&i| responses[i]).collect();
    let k = encoder.reshape_rows * encoder.reshape_cols;
    let selected = lasso_select(&train_rows, &train_y, k)?;
    let encode = |idx: &[usize], split| -> Result<LabeledImageDataset> {
        let images = idx
            .iter()
            .map(|&i| {
                let bits: Vec<u8> = selected.iter().map(|&j| rows[i][j]).collect();
                encode_bits(&bits, encoder)
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let labels = idx.iter().map(|&i| labels[i]).collect();
        LabeledImageDataset::new(encoder.target_n, images, labels, task.class_names(), split, seed)
    };
    let hash = {
        use sha2::{Digest, Sha256};
        let text = format!("{task}:{}", serde_json::to_string(&selected).expect("indices"));
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    };
    Ok(EncodedTask {
        task,
        train: encode(&train_idx, SplitTag::Train)?,
        test: encode(&test_idx, SplitTag::Test)?,
        source: origin,
        schema_hash: hash,
        schema: None,
        selected_features: Some(selected),
    })
}

/// Sparse random mutation indicators with a response driven by a planted set of
/// `DRUG_SELECTED` features, squashed into [0, 1].
pub fn synth_drug(count: usize, features: usize, seed: u64) -> (Vec<Vec<u8>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, "drug"));
    let planted = DRUG_SELECTED.min(features);
    let weights: Vec<f64> = (0..planted)
        .map(|i| {
            let w = rng.gen_range(0.5..1.5);
            if i % 2 == 0 { w } else { -w }
        })
        .collect();
    let mut rows = Vec::with_capacity(count);
    let mut y = Vec::with_capacity(count);
    for _ in 0..count {
        let row: Vec<u8> = (0..features).map(|_| u8::from(rng.gen_bool(0.1))).collect();
        let score: f64 = weights
            .iter()
            .enumerate()
            .map(|(j, w)| w * f64::from(row[j]))
            .sum::<f64>()
            - weights.iter().sum::<f64>() * 0.1;
        y.push(1.0 / (1.0 + (-1.5 * score).exp()));
        rows.push(row);
    }
    (rows, y)
}

/// 400 hole-size columns followed by a ratio tag column.
pub fn load_splitter_table(path: &Path) -> Result<(Vec<SplitterTopology>, Vec<usize>)> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let cells = TOPOLOGY_SIDE * TOPOLOGY_SIDE;
    let header_len = rdr
        .headers()
        .map_err(|e| DataError::Parse {
            path: name.clone(),
            line: 1,
            message: e.to_string(),
        })?
        .len();
    if header_len != cells + 1 {
        return Err(DataError::MissingColumn {
            path: name,
            column: format!("expected {cells} topology columns and a ratio column, found {header_len}"),
        });
    }
    let mut tops = Vec::new();
    let mut labels = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| DataError::Parse {
            path: name.clone(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let values = (0..cells)
            .map(|j| {
                row[j].parse::<f64>().map_err(|_| DataError::TypeMismatch {
                    path: name.clone(),
                    line,
                    column: format!("t{j}"),
                    message: format!("`{}` is not a number", &row[j]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        tops.push(SplitterTopology::new(values).map_err(|e| DataError::Parse {
            path: name.clone(),
            line,
            message: e.to_string(),
        })?);
        labels.push(label_splitter_ratio(&row[cells])?);
    }
    if tops.is_empty() {
        return Err(DataError::Empty { path: name });
    }
    Ok((tops, labels))
}

/// Applies the same train fraction within every class.
pub fn stratified_split(
    data: &LabeledImageDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledImageDataset, LabeledImageDataset)> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..data.class_names().len() {
        let members: Vec<usize> = (0..data.len()).filter(|&i| data.labels()[i] == class).collect();
        let (tr, te) = split_indices(members.len(), train_fraction, substream(seed, &format!("class{class}")))?;
        train.extend(tr.iter().map(|&i| members[i]));
        test.extend(te.iter().map(|&i| members[i]));
    }
    Ok((data.subset(&train, SplitTag::Train), data.subset(&test, SplitTag::Test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_names_round_trip() {
        for t in ALL_TASKS {
            assert_eq!(t.name().parse::<Task>().unwrap(), t);
        }
        assert!("mnist".parse::<Task>().is_err());
    }

    #[test]
    fn synthetic_widths_fill_reshape() {
        for t in ALL_TASKS {
            if let Some((cards, _)) = t.synthetic_spec() {
                let enc = t.encoder();
                assert_eq!(cards.iter().sum::<usize>(), enc.reshape_rows * enc.reshape_cols, "{t}");
            }
        }
    }

    #[test]
    fn mos2_synthetic_split_matches_reference() {
        let enc = prepare_task(Task::Mos2, TaskSource::Synthetic { count: 300 }, 3, 0.8, 100).unwrap();
        assert_eq!((enc.train.len(), enc.test.len()), (240, 60));
        assert_eq!(enc.schema.unwrap().width(), 81);
    }

    #[test]
    fn splitter_synthetic_is_stratified() {
        let enc = prepare_task(Task::Splitter, TaskSource::Synthetic { count: 20 }, 3, 0.75, 100).unwrap();
        assert_eq!(enc.train.class_counts(), vec![15, 15, 15]);
        assert_eq!(enc.test.class_counts(), vec![5, 5, 5]);
    }

    #[test]
    fn c2db_is_balanced() {
        let enc = prepare_task(Task::C2dbMagnet, TaskSource::Synthetic { count: 200 }, 1, 0.8, 100).unwrap();
        let counts: Vec<usize> = enc
            .train
            .class_counts()
            .iter()
            .zip(enc.test.class_counts())
            .map(|(a, b)| a + b)
            .collect();
        assert_eq!(counts[0], counts[1]);
    }

    #[test]
    fn cartpole_is_not_a_table_task() {
        assert!(prepare_task(Task::Cartpole, TaskSource::Synthetic { count: 10 }, 0, 0.8, 100).is_err());
    }
}

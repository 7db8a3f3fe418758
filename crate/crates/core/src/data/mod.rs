//! Labeled image datasets, splits, label rules and the encoded-image cache.

mod cache;
pub mod splitter;
pub mod synth;
mod table;
pub mod tasks;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encode::EncodeError;
use crate::seed::substream;

pub use cache::{decode_cache, encode_cache, read_cache, write_cache, CACHE_MAGIC};
pub use table::{load_binary_table, load_table, load_table_str, BinaryTable, Table};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: file contains no data rows")]
    Empty { path: String },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("{path}:{line}: column `{column}`: {message}")]
    TypeMismatch {
        path: String,
        line: usize,
        column: String,
        message: String,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("invalid label `{value}`: {message}")]
    Label { value: String, message: String },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("invalid cache file: {0}")]
    Cache(String),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Test,
    All,
}

/// Binary square images with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageDataset {
    side: usize,
    images: Vec<Vec<u8>>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    split: SplitTag,
    seed: u64,
}

impl LabeledImageDataset {
    pub fn new(
        side: usize,
        images: Vec<Vec<u8>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        split: SplitTag,
        seed: u64,
    ) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(DataError::Invalid(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(i) = images.iter().position(|im| im.len() != side * side) {
            return Err(DataError::Invalid(format!(
                "image {i} has {} pixels, expected {}",
                images[i].len(),
                side * side
            )));
        }
        if let Some(i) = images.iter().position(|im| im.iter().any(|&b| b > 1)) {
            return Err(DataError::Invalid(format!("image {i} is not binary")));
        }
        if let Some(i) = labels.iter().position(|&l| l >= class_names.len()) {
            return Err(DataError::Invalid(format!(
                "label {} at sample {i} outside {} classes",
                labels[i],
                class_names.len()
            )));
        }
        Ok(LabeledImageDataset {
            side,
            images,
            labels,
            class_names,
            split,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn images(&self) -> &[Vec<u8>] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn split(&self) -> SplitTag {
        self.split
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize], split: SplitTag) -> LabeledImageDataset {
        LabeledImageDataset {
            side: self.side,
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            split,
            seed: self.seed,
        }
    }

    /// Seeded shuffle then prefix split; see [`split_indices`].
    pub fn split_train_test(&self, train_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        let (train, test) = split_indices(self.len(), train_fraction, seed)?;
        Ok((
            self.subset(&train, SplitTag::Train),
            self.subset(&test, SplitTag::Test),
        ))
    }

    /// Concatenation of two datasets with the same classes and image size.
    pub fn concat(&self, other: &LabeledImageDataset) -> Result<Self> {
        if self.side != other.side || self.class_names != other.class_names {
            return Err(DataError::Invalid("datasets are not compatible".into()));
        }
        let mut out = self.clone();
        out.images.extend(other.images.iter().cloned());
        out.labels.extend(&other.labels);
        out.split = SplitTag::All;
        Ok(out)
    }
}

/// Shuffles `0..n` with the `split` sub-stream of `seed` and cuts after
/// `round(train_fraction·n)` items.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::Invalid(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(substream(seed, "split")));
    let cut = (train_fraction * n as f64).round() as usize;
    let test = order.split_off(cut.min(n));
    Ok((order, test))
}

/// Splits arbitrary items the same way as [`split_indices`].
pub fn split<T: Clone>(items: &[T], train_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let (train, test) = split_indices(items.len(), train_fraction, seed)?;
    Ok((
        train.iter().map(|&i| items[i].clone()).collect(),
        test.iter().map(|&i| items[i].clone()).collect(),
    ))
}

/// Indices after seeded down-sampling of every class to the minority count,
/// returned in ascending order.
pub fn balance_classes(labels: &[usize], seed: u64) -> Vec<usize> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let keep = by_class.values().map(Vec::len).min().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, "balance"));
    let mut out: Vec<usize> = by_class
        .into_values()
        .flat_map(|mut idx| {
            idx.shuffle(&mut rng);
            idx.truncate(keep);
            idx
        })
        .collect();
    out.sort_unstable();
    out
}

/// Effective (1) when the response exceeds 0.6, ineffective (0) otherwise.
pub fn label_drug_response(value: f64) -> Result<usize> {
    if !value.is_finite() || !(0.0..=1.0).contains(&value) {
        return Err(DataError::Label {
            value: value.to_string(),
            message: "drug response must lie in [0, 1]".into(),
        });
    }
    Ok(usize::from(value > 0.6))
}

pub const SPLITTER_RATIOS: [&str; 3] = ["5:5", "7:3", "9:1"];

/// "5:5" → 0, "7:3" → 1, "9:1" → 2.
pub fn label_splitter_ratio(tag: &str) -> Result<usize> {
    SPLITTER_RATIOS
        .iter()
        .position(|t| *t == tag.trim())
        .ok_or_else(|| DataError::Label {
            value: tag.to_string(),
            message: "expected one of 5:5, 7:3, 9:1".into(),
        })
}

/// Binary target: 0/1, true/false, yes/no (case-insensitive).
pub fn label_binary(tag: &str) -> Result<usize> {
    match tag.trim().to_ascii_lowercase().as_str() {
        "0" | "false" | "no" => Ok(0),
        "1" | "true" | "yes" => Ok(1),
        _ => Err(DataError::Label {
            value: tag.to_string(),
            message: "expected a binary label".into(),
        }),
    }
}

/// Provenance record written next to an encoded dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub task: String,
    pub source: String,
    pub schema_hash: String,
    pub seed: u64,
    pub class_names: Vec<String>,
    pub side: usize,
    pub train_fraction: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub train_cache: String,
    pub test_cache: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes() {
        let (tr, te) = split_indices(300, 0.8, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (240, 60));
        let (tr, te) = split_indices(1154, 952.0 / 1154.0, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (952, 202));
        for (n, train) in [(1008, 800), (272, 220), (1814, 1465), (1684, 1329), (1810, 1482), (931, 800)] {
            let (tr, te) = split_indices(n, train as f64 / n as f64, 9).unwrap();
            assert_eq!((tr.len(), te.len()), (train, n - train));
        }
    }

    #[test]
    fn split_is_deterministic_disjoint_and_exhaustive() {
        let a = split_indices(100, 0.7, 42).unwrap();
        assert_eq!(a, split_indices(100, 0.7, 42).unwrap());
        assert_ne!(a, split_indices(100, 0.7, 43).unwrap());
        let mut all: Vec<usize> = a.0.iter().chain(&a.1).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert!(split_indices(10, 0.0, 1).is_err());
        assert!(split_indices(10, 1.0, 1).is_err());
    }

    #[test]
    fn drug_labels() {
        assert_eq!(label_drug_response(0.61).unwrap(), 1);
        assert_eq!(label_drug_response(0.6).unwrap(), 0);
        assert_eq!(label_drug_response(0.0).unwrap(), 0);
        assert!(label_drug_response(1.2).is_err());
        assert!(label_drug_response(-0.1).is_err());
        assert!(label_drug_response(f64::NAN).is_err());
    }

    #[test]
    fn splitter_labels() {
        assert_eq!(label_splitter_ratio("5:5").unwrap(), 0);
        assert_eq!(label_splitter_ratio("7:3").unwrap(), 1);
        assert_eq!(label_splitter_ratio("9:1").unwrap(), 2);
        assert!(label_splitter_ratio("6:4").is_err());
    }

    #[test]
    fn balancing_downsamples_majority() {
        let labels = vec![0, 0, 0, 0, 1, 1, 0, 0];
        let keep = balance_classes(&labels, 3);
        assert_eq!(keep.len(), 4);
        assert_eq!(keep.iter().filter(|&&i| labels[i] == 1).count(), 2);
        assert_eq!(keep, balance_classes(&labels, 3));
    }

    #[test]
    fn dataset_validation() {
        let names = vec!["a".to_string(), "b".to_string()];
        assert!(LabeledImageDataset::new(2, vec![vec![0; 4]], vec![2], names.clone(), SplitTag::All, 0).is_err());
        assert!(LabeledImageDataset::new(2, vec![vec![0; 3]], vec![0], names.clone(), SplitTag::All, 0).is_err());
        assert!(LabeledImageDataset::new(2, vec![vec![2; 4]], vec![0], names.clone(), SplitTag::All, 0).is_err());
        assert!(LabeledImageDataset::new(2, vec![vec![0; 4]], vec![], names, SplitTag::All, 0).is_err());
    }
}

//! One-hot feature images: encode → reshape → bilinear resize → threshold.

mod lasso;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lasso::{lasso_select, LassoFit, LassoProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodeError {
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("record has {got} values but schema declares {expected} features")]
    RecordLength { expected: usize, got: usize },
    #[error("feature `{feature}`: value `{value}` is not in the vocabulary")]
    OutOfVocabulary { feature: String, value: String },
    #[error("feature `{feature}`: expected {expected} value")]
    WrongType { feature: String, expected: &'static str },
    #[error("feature `{feature}`: value {value} outside [{min}, {max}]")]
    OutOfRange {
        feature: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("feature `{0}`: non-finite value")]
    NonFinite(String),
    #[error("cannot reshape {len} values into {rows}x{cols}")]
    Reshape { len: usize, rows: usize, cols: usize },
    #[error("bilinear resize needs a source of at least 2x2 and a target of at least 2, got {rows}x{cols} -> {target}")]
    Resize { rows: usize, cols: usize, target: usize },
    #[error("threshold must be finite")]
    Threshold,
    #[error("{stage} stage: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<EncodeError>,
    },
    #[error("feature selection: {0}")]
    Lasso(String),
}

impl EncodeError {
    fn at(self, stage: &'static str) -> EncodeError {
        EncodeError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, EncodeError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// (v − min)/(max − min)
    Linear,
    /// 1/(1 + e^−v)
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureDescriptor {
    /// An empty vocabulary is filled from data by [`FeatureSchema::fit_vocabularies`].
    Categorical {
        name: String,
        #[serde(default)]
        vocabulary: Vec<String>,
    },
    Boolean {
        name: String,
    },
    Discretized {
        name: String,
        #[serde(default)]
        min: f64,
        #[serde(default = "one")]
        max: f64,
        bins: usize,
        normalization: Normalization,
    },
}

fn one() -> f64 {
    1.0
}

impl FeatureDescriptor {
    pub fn name(&self) -> &str {
        match self {
            FeatureDescriptor::Categorical { name, .. }
            | FeatureDescriptor::Boolean { name }
            | FeatureDescriptor::Discretized { name, .. } => name,
        }
    }

    /// Length of this feature's one-hot block.
    pub fn width(&self) -> usize {
        match self {
            FeatureDescriptor::Categorical { vocabulary, .. } => vocabulary.len(),
            FeatureDescriptor::Boolean { .. } => 2,
            FeatureDescriptor::Discretized { bins, .. } => *bins,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            FeatureDescriptor::Categorical { name, vocabulary } => {
                if vocabulary.is_empty() {
                    return Err(EncodeError::Schema(format!("`{name}` has an empty vocabulary")));
                }
                for (i, v) in vocabulary.iter().enumerate() {
                    if vocabulary[..i].contains(v) {
                        return Err(EncodeError::Schema(format!(
                            "`{name}` lists `{v}` more than once"
                        )));
                    }
                }
            }
            FeatureDescriptor::Boolean { .. } => {}
            FeatureDescriptor::Discretized {
                name,
                min,
                max,
                bins,
                normalization,
            } => {
                if *bins < 2 {
                    return Err(EncodeError::Schema(format!("`{name}` needs at least 2 bins")));
                }
                if *normalization == Normalization::Linear && !(min < max) {
                    return Err(EncodeError::Schema(format!(
                        "`{name}` needs min < max, got [{min}, {max}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Bin index of a numeric value.
    pub fn bin(&self, value: f64) -> Result<usize> {
        let FeatureDescriptor::Discretized {
            name,
            min,
            max,
            bins,
            normalization,
        } = self
        else {
            return Err(EncodeError::WrongType {
                feature: self.name().to_string(),
                expected: "a categorical or boolean",
            });
        };
        if !value.is_finite() {
            return Err(EncodeError::NonFinite(name.clone()));
        }
        let u = match normalization {
            Normalization::Linear => {
                if value < *min || value > *max {
                    return Err(EncodeError::OutOfRange {
                        feature: name.clone(),
                        value,
                        min: *min,
                        max: *max,
                    });
                }
                (value - min) / (max - min)
            }
            Normalization::Sigmoid => 1.0 / (1.0 + (-value).exp()),
        };
        Ok(((u * *bins as f64).floor() as usize).min(bins - 1))
    }
}

/// A single record value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Bool(bool),
    Number(f64),
    Text(String),
}

impl From<&str> for FieldValue {
    fn from(s: &str) -> Self {
        FieldValue::Text(s.to_string())
    }
}

impl From<bool> for FieldValue {
    fn from(b: bool) -> Self {
        FieldValue::Bool(b)
    }
}

impl From<f64> for FieldValue {
    fn from(v: f64) -> Self {
        FieldValue::Number(v)
    }
}

pub type Record = Vec<FieldValue>;

/// Ordered feature descriptors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSchema {
    pub features: Vec<FeatureDescriptor>,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureDescriptor>) -> Result<Self> {
        let schema = FeatureSchema { features };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| EncodeError::Schema(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(EncodeError::Schema("schema declares no features".into()));
        }
        for (i, f) in self.features.iter().enumerate() {
            if self.features[..i].iter().any(|g| g.name() == f.name()) {
                return Err(EncodeError::Schema(format!("duplicate feature `{}`", f.name())));
            }
            f.validate()?;
        }
        Ok(())
    }

    /// Total one-hot length.
    pub fn width(&self) -> usize {
        self.features.iter().map(FeatureDescriptor::width).sum()
    }

    /// True when some categorical vocabulary still has to be learned from data.
    pub fn needs_fit(&self) -> bool {
        self.features.iter().any(|f| {
            matches!(f, FeatureDescriptor::Categorical { vocabulary, .. } if vocabulary.is_empty())
        })
    }

    /// Fills empty categorical vocabularies in order of first appearance.
    pub fn fit_vocabularies(&mut self, records: &[Record]) -> Result<()> {
        for (col, feature) in self.features.iter_mut().enumerate() {
            if let FeatureDescriptor::Categorical { name, vocabulary } = feature {
                if !vocabulary.is_empty() {
                    continue;
                }
                for record in records {
                    let value = category_text(name, record.get(col))?;
                    if !vocabulary.contains(&value) {
                        vocabulary.push(value);
                    }
                }
            }
        }
        self.validate()
    }

    /// Stable content hash, used in dataset manifests.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("schema serializes");
        Sha256::digest(bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn category_text(feature: &str, value: Option<&FieldValue>) -> Result<String> {
    match value {
        Some(FieldValue::Text(s)) => Ok(s.clone()),
        Some(FieldValue::Number(v)) => Ok(v.to_string()),
        Some(FieldValue::Bool(b)) => Ok(b.to_string()),
        None => Err(EncodeError::WrongType {
            feature: feature.to_string(),
            expected: "a categorical",
        }),
    }
}

/// Concatenated one-hot blocks, one per feature, each with exactly one set bit.
pub fn one_hot_encode(record: &[FieldValue], schema: &FeatureSchema) -> Result<Vec<u8>> {
    if record.len() != schema.features.len() {
        return Err(EncodeError::RecordLength {
            expected: schema.features.len(),
            got: record.len(),
        });
    }
    let mut out = vec![0u8; schema.width()];
    let mut offset = 0;
    for (feature, value) in schema.features.iter().zip(record) {
        let hot = match feature {
            FeatureDescriptor::Categorical { name, vocabulary } => {
                let text = category_text(name, Some(value))?;
                vocabulary
                    .iter()
                    .position(|v| *v == text)
                    .ok_or_else(|| EncodeError::OutOfVocabulary {
                        feature: name.clone(),
                        value: text,
                    })?
            }
            FeatureDescriptor::Boolean { name } => match value {
                FieldValue::Bool(b) => usize::from(*b),
                _ => {
                    return Err(EncodeError::WrongType {
                        feature: name.clone(),
                        expected: "a boolean",
                    })
                }
            },
            FeatureDescriptor::Discretized { name, .. } => match value {
                FieldValue::Number(v) => feature.bin(*v)?,
                _ => {
                    return Err(EncodeError::WrongType {
                        feature: name.clone(),
                        expected: "a numeric",
                    })
                }
            },
        };
        out[offset + hot] = 1;
        offset += feature.width();
    }
    Ok(out)
}

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        reshape(&data, rows, cols)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// Row-major fill of a `rows × cols` matrix; the length must match exactly.
pub fn reshape(vector: &[f64], rows: usize, cols: usize) -> Result<Matrix> {
    if vector.len() != rows * cols {
        return Err(EncodeError::Reshape {
            len: vector.len(),
            rows,
            cols,
        });
    }
    Ok(Matrix {
        rows,
        cols,
        data: vector.to_vec(),
    })
}

/// Align-corners bilinear interpolation to a `target_n × target_n` grid.
pub fn bilinear_resize(matrix: &Matrix, target_n: usize) -> Result<Matrix> {
    if matrix.rows < 2 || matrix.cols < 2 || target_n < 2 {
        return Err(EncodeError::Resize {
            rows: matrix.rows,
            cols: matrix.cols,
            target: target_n,
        });
    }
    let axis = |src: usize| -> Vec<(usize, usize, f64)> {
        let step = (src - 1) as f64 / (target_n - 1) as f64;
        (0..target_n)
            .map(|i| {
                let s = i as f64 * step;
                let lo = (s.floor() as usize).min(src - 1);
                let hi = (lo + 1).min(src - 1);
                (lo, hi, s - lo as f64)
            })
            .collect()
    };
    let ys = axis(matrix.rows);
    let xs = axis(matrix.cols);
    let mut data = Vec::with_capacity(target_n * target_n);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = matrix.get(y0, x0) * (1.0 - fx) + matrix.get(y0, x1) * fx;
            let bottom = matrix.get(y1, x0) * (1.0 - fx) + matrix.get(y1, x1) * fx;
            data.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    Ok(Matrix {
        rows: target_n,
        cols: target_n,
        data,
    })
}

/// 1 where the value is strictly above `threshold`, else 0.
pub fn binarize(matrix: &Matrix, threshold: f64) -> Result<Vec<u8>> {
    if !threshold.is_finite() {
        return Err(EncodeError::Threshold);
    }
    Ok(matrix.data.iter().map(|&v| u8::from(v > threshold)).collect())
}

/// Reshape/resize/threshold settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub reshape_rows: usize,
    pub reshape_cols: usize,
    #[serde(default = "default_target")]
    pub target_n: usize,
    pub threshold: f64,
}

fn default_target() -> usize {
    100
}

impl EncoderConfig {
    pub fn new(reshape_rows: usize, reshape_cols: usize, threshold: f64) -> Self {
        EncoderConfig {
            reshape_rows,
            reshape_cols,
            target_n: default_target(),
            threshold,
        }
    }

    /// 7 features → 81 bits → 9×9, threshold 0.1.
    pub fn mos2() -> Self {
        EncoderConfig::new(9, 9, 0.1)
    }

    /// 144 bits → 12×12, threshold 0.45.
    pub fn c2db() -> Self {
        EncoderConfig::new(12, 12, 0.45)
    }

    /// 144 selected mutation bits → 12×12, threshold 0.5.
    pub fn drug() -> Self {
        EncoderConfig::new(12, 12, 0.5)
    }

    /// 4 features × 25 levels → 10×10, threshold 0.01.
    pub fn cartpole() -> Self {
        EncoderConfig::new(10, 10, 0.01)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(EncodeError::Schema(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if self.reshape_rows < 2 || self.reshape_cols < 2 || self.target_n < 2 {
            return Err(EncodeError::Resize {
                rows: self.reshape_rows,
                cols: self.reshape_cols,
                target: self.target_n,
            });
        }
        Ok(())
    }
}

/// reshape → resize → binarize for an already one-hot (or binary) vector.
pub fn encode_bits(bits: &[u8], config: &EncoderConfig) -> Result<Vec<u8>> {
    let values: Vec<f64> = bits.iter().map(|&b| f64::from(b)).collect();
    let m = reshape(&values, config.reshape_rows, config.reshape_cols).map_err(|e| e.at("reshape"))?;
    let big = bilinear_resize(&m, config.target_n).map_err(|e| e.at("resize"))?;
    binarize(&big, config.threshold).map_err(|e| e.at("binarize"))
}

/// Full record → binary `target_n × target_n` image.
pub fn encode_record(record: &[FieldValue], schema: &FeatureSchema, config: &EncoderConfig) -> Result<Vec<u8>> {
    let bits = one_hot_encode(record, schema).map_err(|e| e.at("one-hot"))?;
    encode_bits(&bits, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mos2_schema() -> FeatureSchema {
        let cat = |name: &str, n: usize| FeatureDescriptor::Categorical {
            name: name.into(),
            vocabulary: (0..n).map(|i| i.to_string()).collect(),
        };
        FeatureSchema::new(vec![
            cat("sulfur_distance", 16),
            cat("flow_rate", 16),
            cat("temperature", 16),
            cat("ramp_time", 13),
            cat("reaction_time", 16),
            FeatureDescriptor::Boolean { name: "tilted".into() },
            FeatureDescriptor::Boolean { name: "salt".into() },
        ])
        .unwrap()
    }

    #[test]
    fn mos2_width_is_81() {
        assert_eq!(mos2_schema().width(), 81);
    }

    #[test]
    fn boolean_block() {
        let s = FeatureSchema::new(vec![FeatureDescriptor::Boolean { name: "b".into() }]).unwrap();
        assert_eq!(one_hot_encode(&[true.into()], &s).unwrap(), vec![0, 1]);
        assert_eq!(one_hot_encode(&[false.into()], &s).unwrap(), vec![1, 0]);
        assert!(one_hot_encode(&[1.0.into()], &s).is_err());
    }

    #[test]
    fn discretized_bins() {
        let d = FeatureDescriptor::Discretized {
            name: "v".into(),
            min: 0.0,
            max: 1.0,
            bins: 25,
            normalization: Normalization::Linear,
        };
        assert_eq!(d.bin(0.5).unwrap(), 12);
        assert_eq!(d.bin(0.0).unwrap(), 0);
        assert_eq!(d.bin(1.0).unwrap(), 24);
        assert!(matches!(d.bin(1.5), Err(EncodeError::OutOfRange { .. })));
        assert!(matches!(d.bin(f64::NAN), Err(EncodeError::NonFinite(_))));
        let s = FeatureDescriptor::Discretized {
            name: "w".into(),
            min: 0.0,
            max: 0.0,
            bins: 25,
            normalization: Normalization::Sigmoid,
        };
        assert_eq!(s.bin(0.0).unwrap(), 12);
        assert_eq!(s.bin(1e6).unwrap(), 24);
        assert_eq!(s.bin(-1e6).unwrap(), 0);
    }

    #[test]
    fn out_of_vocabulary() {
        let s = mos2_schema();
        let mut r: Record = (0..5).map(|_| FieldValue::from("3")).collect();
        r.push(true.into());
        r.push(false.into());
        assert!(one_hot_encode(&r, &s).is_ok());
        r[3] = "13".into();
        assert!(matches!(
            one_hot_encode(&r, &s),
            Err(EncodeError::OutOfVocabulary { .. })
        ));
        assert!(matches!(
            one_hot_encode(&r[..6], &s),
            Err(EncodeError::RecordLength { .. })
        ));
    }

    #[test]
    fn schema_validation() {
        assert!(FeatureSchema::new(vec![]).is_err());
        assert!(FeatureSchema::new(vec![FeatureDescriptor::Categorical {
            name: "c".into(),
            vocabulary: vec!["a".into(), "a".into()],
        }])
        .is_err());
        assert!(FeatureSchema::new(vec![FeatureDescriptor::Discretized {
            name: "d".into(),
            min: 1.0,
            max: 1.0,
            bins: 4,
            normalization: Normalization::Linear,
        }])
        .is_err());
        assert!(FeatureSchema::new(vec![FeatureDescriptor::Discretized {
            name: "d".into(),
            min: 0.0,
            max: 1.0,
            bins: 1,
            normalization: Normalization::Linear,
        }])
        .is_err());
    }

    #[test]
    fn vocabulary_fit_uses_first_appearance() {
        let mut s = FeatureSchema {
            features: vec![FeatureDescriptor::Categorical {
                name: "c".into(),
                vocabulary: vec![],
            }],
        };
        assert!(s.needs_fit());
        let records: Vec<Record> = ["z", "a", "z", "m"].iter().map(|v| vec![FieldValue::from(*v)]).collect();
        s.fit_vocabularies(&records).unwrap();
        assert_eq!(s.width(), 3);
        assert_eq!(one_hot_encode(&records[3], &s).unwrap(), vec![0, 0, 1]);
    }

    #[test]
    fn reshape_examples() {
        assert_eq!(reshape(&[0.0; 81], 9, 9).unwrap().rows, 9);
        assert_eq!(reshape(&[0.0; 144], 12, 12).unwrap().cols, 12);
        assert_eq!(reshape(&[0.0; 100], 10, 10).unwrap().data.len(), 100);
        assert!(reshape(&[0.0; 80], 9, 9).is_err());
        let m = reshape(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 2, 3).unwrap();
        assert_eq!(m.get(1, 0), 4.0);
    }

    #[test]
    fn resize_examples() {
        let c = Matrix::new(3, 4, vec![0.7; 12]).unwrap();
        assert!(bilinear_resize(&c, 10).unwrap().data.iter().all(|&v| (v - 0.7).abs() < 1e-15));
        let m = Matrix::new(2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let r = bilinear_resize(&m, 3).unwrap();
        assert_eq!(r.data, vec![0.0, 0.5, 1.0, 0.0, 0.5, 1.0, 0.0, 0.5, 1.0]);
        let corners = Matrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let big = bilinear_resize(&corners, 7).unwrap();
        assert_eq!(big.get(0, 0), 1.0);
        assert_eq!(big.get(0, 6), 3.0);
        assert_eq!(big.get(6, 0), 4.0);
        assert_eq!(big.get(6, 6), 6.0);
        assert!(bilinear_resize(&Matrix::new(1, 4, vec![0.0; 4]).unwrap(), 10).is_err());
    }

    #[test]
    fn binarize_is_strict() {
        let m = Matrix::new(1, 3, vec![0.1, 0.10001, 0.0]).unwrap();
        assert_eq!(binarize(&m, 0.1).unwrap(), vec![0, 1, 0]);
        let z = Matrix::new(2, 2, vec![0.0; 4]).unwrap();
        assert_eq!(binarize(&z, 0.3).unwrap(), vec![0; 4]);
        assert!(binarize(&z, f64::NAN).is_err());
    }

    #[test]
    fn encode_record_errors_name_the_stage() {
        let s = mos2_schema();
        let r: Record = vec![FieldValue::from("0"); 7];
        let err = encode_record(&r, &s, &EncoderConfig::mos2()).unwrap_err();
        assert!(matches!(err, EncodeError::Stage { stage: "one-hot", .. }), "{err}");
        let mut r: Record = (0..5).map(|_| FieldValue::from("0")).collect();
        r.extend([true.into(), true.into()]);
        let err = encode_record(&r, &s, &EncoderConfig::new(8, 10, 0.1)).unwrap_err();
        assert!(matches!(err, EncodeError::Stage { stage: "reshape", .. }));
    }

    #[test]
    fn records_differing_in_one_value_give_different_images() {
        let s = mos2_schema();
        let mut a: Record = (0..5).map(|i| FieldValue::from(i.to_string().as_str())).collect();
        a.extend([true.into(), false.into()]);
        let mut b = a.clone();
        b[2] = "9".into();
        let cfg = EncoderConfig::mos2();
        assert_ne!(encode_record(&a, &s, &cfg).unwrap(), encode_record(&b, &s, &cfg).unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn resize_stays_within_source_bounds(
                rows in 2usize..8, cols in 2usize..8, target in 2usize..40,
                seed in proptest::collection::vec(-5.0f64..5.0, 64)
            ) {
                let m = Matrix::new(rows, cols, seed[..rows * cols].to_vec()).unwrap();
                let lo = m.data.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = m.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let r = bilinear_resize(&m, target).unwrap();
                for v in r.data {
                    prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
                }
            }

            #[test]
            fn one_hot_blocks_have_single_bit(values in proptest::collection::vec(0usize..16, 5), t in any::<bool>(), u in any::<bool>()) {
                let schema = mos2_schema();
                let mut r: Record = values.iter().enumerate()
                    .map(|(i, v)| FieldValue::from((if i == 3 { v % 13 } else { *v }).to_string().as_str()))
                    .collect();
                r.extend([t.into(), u.into()]);
                let bits = one_hot_encode(&r, &schema).unwrap();
                let mut offset = 0;
                for f in &schema.features {
                    let ones = bits[offset..offset + f.width()].iter().filter(|&&b| b == 1).count();
                    prop_assert_eq!(ones, 1);
                    offset += f.width();
                }
                let cfg = EncoderConfig::mos2();
                prop_assert_eq!(encode_record(&r, &schema, &cfg).unwrap(), encode_record(&r, &schema, &cfg).unwrap());
            }
        }
    }
}

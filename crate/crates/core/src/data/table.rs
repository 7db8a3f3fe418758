//! CSV ingestion with line/column diagnostics.

use std::fs;
use std::path::Path;

use super::{DataError, Result};
use crate::encode::{FeatureDescriptor, FeatureSchema, FieldValue, Record};

/// Typed records plus the raw target column.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub records: Vec<Record>,
    pub targets: Vec<String>,
    /// 1-based source line of each record.
    pub lines: Vec<usize>,
    pub target_name: String,
}

/// Header row naming the schema features (any order) followed by one target
/// column, which must be last.
pub fn load_table(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Table> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    load_table_str(&text, schema, &path.display().to_string())
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn csv_error(path: &str, e: csv::Error) -> DataError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    DataError::Parse {
        path: path.to_string(),
        line,
        message: e.to_string(),
    }
}

pub fn load_table_str(text: &str, schema: &FeatureSchema, path: &str) -> Result<Table> {
    let mut rdr = reader(text);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < 2 {
        return Err(DataError::MissingColumn {
            path: path.into(),
            column: "<target>".into(),
        });
    }
    let target_col = header.len() - 1;
    let columns: Vec<usize> = schema
        .features
        .iter()
        .map(|f| {
            header
                .iter()
                .take(target_col)
                .position(|h| h == f.name())
                .ok_or_else(|| DataError::MissingColumn {
                    path: path.into(),
                    column: f.name().to_string(),
                })
        })
        .collect::<Result<_>>()?;

    let mut table = Table {
        records: Vec::new(),
        targets: Vec::new(),
        lines: Vec::new(),
        target_name: header[target_col].to_string(),
    };
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let mut record = Vec::with_capacity(columns.len());
        for (feature, &col) in schema.features.iter().zip(&columns) {
            let raw = &row[col];
            let mismatch = |message: String| DataError::TypeMismatch {
                path: path.into(),
                line,
                column: feature.name().to_string(),
                message,
            };
            let value = match feature {
                FeatureDescriptor::Categorical { vocabulary, .. } => {
                    if !vocabulary.is_empty() && !vocabulary.iter().any(|v| v == raw) {
                        return Err(mismatch(format!("unknown category `{raw}`")));
                    }
                    FieldValue::Text(raw.to_string())
                }
                FeatureDescriptor::Boolean { .. } => FieldValue::Bool(
                    parse_bool(raw).ok_or_else(|| mismatch(format!("`{raw}` is not a boolean")))?,
                ),
                FeatureDescriptor::Discretized { .. } => {
                    let v: f64 = raw
                        .parse()
                        .map_err(|_| mismatch(format!("`{raw}` is not a number")))?;
                    if !v.is_finite() {
                        return Err(mismatch(format!("`{raw}` is not finite")));
                    }
                    feature.bin(v).map_err(|e| mismatch(e.to_string()))?;
                    FieldValue::Number(v)
                }
            };
            record.push(value);
        }
        table.records.push(record);
        table.targets.push(row[target_col].to_string());
        table.lines.push(line);
    }
    if table.records.is_empty() {
        return Err(DataError::Empty { path: path.into() });
    }
    Ok(table)
}

fn parse_bool(raw: &str) -> Option<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "t" | "y" => Some(true),
        "0" | "false" | "no" | "f" | "n" => Some(false),
        _ => None,
    }
}

/// All-binary feature table (e.g. mutation indicators) with a final target column.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<u8>>,
    pub targets: Vec<String>,
}

pub fn load_binary_table(path: impl AsRef<Path>) -> Result<BinaryTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let name = path.display().to_string();
    let mut rdr = reader(&text);
    let header = rdr.headers().map_err(|e| csv_error(&name, e))?.clone();
    if header.len() < 2 {
        return Err(DataError::MissingColumn {
            path: name,
            column: "<target>".into(),
        });
    }
    let p = header.len() - 1;
    let mut table = BinaryTable {
        feature_names: header.iter().take(p).map(str::to_string).collect(),
        rows: Vec::new(),
        targets: Vec::new(),
    };
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(&name, e))?;
        let line = row.position().map_or(0, |pos| pos.line() as usize);
        let bits = (0..p)
            .map(|j| match &row[j] {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(DataError::TypeMismatch {
                    path: name.clone(),
                    line,
                    column: header[j].to_string(),
                    message: format!("`{other}` is not 0 or 1"),
                }),
            })
            .collect::<Result<Vec<u8>>>()?;
        table.rows.push(bits);
        table.targets.push(row[p].to_string());
    }
    if table.rows.is_empty() {
        return Err(DataError::Empty { path: name });
    }
    Ok(table)
}

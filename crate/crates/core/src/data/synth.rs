//! Hermetic synthetic categorical datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Result};
use crate::encode::{FeatureDescriptor, FeatureSchema, FieldValue, Record};
use crate::seed::substream;

/// Deterministic label rule over at most two features. Values are category
/// indices (booleans count as 0/1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SynthRule {
    /// label = value of a boolean feature
    Copy { feature: usize },
    /// label = 1 when the category index is at least `threshold`
    AtLeast { feature: usize, threshold: usize },
    /// label = (a + b) mod 2
    Parity { a: usize, b: usize },
}

impl SynthRule {
    fn label(&self, values: &[usize]) -> usize {
        match *self {
            SynthRule::Copy { feature } => values[feature],
            SynthRule::AtLeast { feature, threshold } => usize::from(values[feature] >= threshold),
            SynthRule::Parity { a, b } => (values[a] + values[b]) % 2,
        }
    }

    fn check(&self, cardinalities: &[usize]) -> Result<()> {
        let in_range = |f: usize| {
            if f < cardinalities.len() {
                Ok(())
            } else {
                Err(DataError::Invalid(format!("rule refers to missing feature {f}")))
            }
        };
        match *self {
            SynthRule::Copy { feature } => {
                in_range(feature)?;
                if cardinalities[feature] != 2 {
                    return Err(DataError::Invalid("copy rule needs a boolean feature".into()));
                }
            }
            SynthRule::AtLeast { feature, .. } => in_range(feature)?,
            SynthRule::Parity { a, b } => {
                in_range(a)?;
                in_range(b)?;
            }
        }
        Ok(())
    }
}

/// Schema with one boolean per cardinality-2 entry and categoricals `v0..` otherwise.
pub fn synth_schema(cardinalities: &[usize]) -> Result<FeatureSchema> {
    let features = cardinalities
        .iter()
        .enumerate()
        .map(|(i, &c)| match c {
            2 => FeatureDescriptor::Boolean { name: format!("f{i}") },
            _ => FeatureDescriptor::Categorical {
                name: format!("f{i}"),
                vocabulary: (0..c).map(|k| format!("v{k}")).collect(),
            },
        })
        .collect();
    Ok(FeatureSchema::new(features)?)
}

/// Uniformly sampled categorical records labeled by `rule`.
pub fn synth_onehot_classification(
    cardinalities: &[usize],
    rule: SynthRule,
    count: usize,
    seed: u64,
) -> Result<(FeatureSchema, Vec<Record>, Vec<usize>)> {
    if cardinalities.is_empty() || cardinalities.iter().any(|&c| c < 2) {
        return Err(DataError::Invalid("every feature needs at least 2 values".into()));
    }
    rule.check(cardinalities)?;
    let schema = synth_schema(cardinalities)?;
    let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, "synth"));
    let mut records = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let values: Vec<usize> = cardinalities.iter().map(|&c| rng.gen_range(0..c)).collect();
        labels.push(rule.label(&values));
        records.push(
            values
                .iter()
                .zip(cardinalities)
                .map(|(&v, &c)| {
                    if c == 2 {
                        FieldValue::Bool(v == 1)
                    } else {
                        FieldValue::Text(format!("v{v}"))
                    }
                })
                .collect(),
        );
    }
    Ok((schema, records, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn copy_rule_is_separable_by_a_stump() {
        let (_, records, labels) =
            synth_onehot_classification(&[2, 5, 7], SynthRule::Copy { feature: 0 }, 300, 1).unwrap();
        let stump_correct = records
            .iter()
            .zip(&labels)
            .filter(|(r, &l)| usize::from(r[0] == FieldValue::Bool(true)) == l)
            .count();
        assert_eq!(stump_correct, 300);
    }

    #[test]
    fn seeded_and_balanced() {
        let a = synth_onehot_classification(&[2, 8, 8], SynthRule::Copy { feature: 0 }, 1000, 7).unwrap();
        let b = synth_onehot_classification(&[2, 8, 8], SynthRule::Copy { feature: 0 }, 1000, 7).unwrap();
        assert_eq!(a, b);
        let ones = a.2.iter().filter(|&&l| l == 1).count() as f64;
        // 5% of parity is ~3.2 binomial standard deviations at n = 1000
        assert!((ones / 1000.0 - 0.5).abs() <= 0.05, "{ones}");
    }

    #[test]
    fn rules_validated() {
        assert!(synth_onehot_classification(&[3, 4], SynthRule::Copy { feature: 0 }, 1, 0).is_err());
        assert!(synth_onehot_classification(&[2, 4], SynthRule::Parity { a: 0, b: 2 }, 1, 0).is_err());
        assert!(synth_onehot_classification(&[1, 4], SynthRule::AtLeast { feature: 1, threshold: 2 }, 1, 0).is_err());
        let (_, records, labels) =
            synth_onehot_classification(&[4, 3], SynthRule::AtLeast { feature: 0, threshold: 2 }, 50, 0).unwrap();
        for (r, l) in records.iter().zip(labels) {
            let FieldValue::Text(v) = &r[0] else { panic!() };
            assert_eq!(l, usize::from(v == "v2" || v == "v3"));
        }
    }
}

//! Nanopatterned power-splitter topologies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DataError, Result};
use crate::encode::{bilinear_resize, binarize, Matrix};
use crate::seed::substream;

pub const TOPOLOGY_SIDE: usize = 20;
/// Footprint of the hole array, meters per side.
pub const FOOTPRINT_M: f64 = 2.25e-6;
/// Hole center-to-center spacing.
pub const HOLE_PITCH_M: f64 = 112e-9;
pub const MAX_HOLE_DIAMETER_M: f64 = 77e-9;
/// Smaller holes are not etched.
pub const MIN_HOLE_DIAMETER_M: f64 = 42e-9;
pub const ENCODE_THRESHOLD: f64 = 0.5;

/// Left/right hole-size imbalance per ratio class (5:5, 7:3, 9:1).
pub const CLASS_ASYMMETRY: [f64; 3] = [0.0, 0.4, 0.8];
/// Hole-size swing corresponding to unit asymmetry.
pub const ASYMMETRY_SCALE: f64 = 0.5;
pub const NOISE_SIGMA: f64 = 0.15;

/// 20×20 normalized hole sizes in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitterTopology {
    values: Vec<f64>,
}

impl SplitterTopology {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != TOPOLOGY_SIDE * TOPOLOGY_SIDE {
            return Err(DataError::Invalid(format!(
                "topology needs {} values, got {}",
                TOPOLOGY_SIDE * TOPOLOGY_SIDE,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(DataError::Invalid(format!("hole size {v} outside [0, 1]")));
        }
        Ok(SplitterTopology { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Hole diameter in meters, or `None` where the hole is below the etch limit.
    pub fn diameter(&self, row: usize, col: usize) -> Option<f64> {
        let d = self.values[row * TOPOLOGY_SIDE + col] * MAX_HOLE_DIAMETER_M;
        (d >= MIN_HOLE_DIAMETER_M).then_some(d)
    }

    /// mean(left half) − mean(right half).
    pub fn asymmetry(&self) -> f64 {
        let half = TOPOLOGY_SIDE / 2;
        let (mut left, mut right) = (0.0, 0.0);
        for r in 0..TOPOLOGY_SIDE {
            for c in 0..TOPOLOGY_SIDE {
                let v = self.values[r * TOPOLOGY_SIDE + c];
                if c < half {
                    left += v;
                } else {
                    right += v;
                }
            }
        }
        let n = (TOPOLOGY_SIDE * half) as f64;
        (left - right) / n
    }
}

/// Bilinear resize to `target_n`² and strict threshold at 0.5.
pub fn encode_splitter(topology: &SplitterTopology, target_n: usize) -> Result<Vec<u8>> {
    let m = Matrix::new(TOPOLOGY_SIDE, TOPOLOGY_SIDE, topology.values.clone())?;
    Ok(binarize(&bilinear_resize(&m, target_n)?, ENCODE_THRESHOLD)?)
}

/// Parametric stand-in for a generative topology model: a left-to-right hole-size
/// gradient whose strength follows the class's power imbalance, plus Gaussian
/// noise, clipped to [0, 1].
pub fn synth_splitter(ratio_class: usize, count: usize, seed: u64) -> Result<Vec<SplitterTopology>> {
    let asymmetry = *CLASS_ASYMMETRY.get(ratio_class).ok_or_else(|| DataError::Label {
        value: ratio_class.to_string(),
        message: "splitter class must be 0, 1 or 2".into(),
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, &format!("splitter{ratio_class}")));
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");
    let n = TOPOLOGY_SIDE;
    // base(c) = 0.5 + 2·a·s·(0.5 − t(c)) has left-minus-right mean a·s
    let base: Vec<f64> = (0..n)
        .map(|c| {
            let t = (c as f64 + 0.5) / n as f64;
            0.5 + 2.0 * asymmetry * ASYMMETRY_SCALE * (0.5 - t)
        })
        .collect();
    (0..count)
        .map(|_| {
            let values = (0..n * n)
                .map(|i| (base[i % n] + noise.sample(&mut rng)).clamp(0.0, 1.0))
                .collect();
            SplitterTopology::new(values)
        })
        .collect()
}

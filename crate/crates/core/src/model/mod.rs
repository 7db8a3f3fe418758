//! The diffractive classifier: input mask, phase layers, camera readout.

pub(crate) mod engine;
mod file;
pub mod pgm;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optics::{ComplexField, Illumination, OpticalGeometry, OpticsError};
use engine::{gather_window, region_sums, Simulator, StackKernels};

pub use file::{load_model, save_model, write_model, MODEL_FILE_VERSION};

/// 11 inches, the spacing between every pair of planes.
pub const DEFAULT_DISTANCE: f64 = 0.2794;
pub const DEFAULT_LAYER_COUNT: usize = 3;
pub const DEFAULT_REGION_SIZE: usize = 20;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error("model invariant violated: {0}")]
    Invariant(String),
    #[error("input has {got} pixels, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("class count {0} outside supported range 2..=10")]
    ClassCount(usize),
    #[error("quantization needs at least 2 levels, got {0}")]
    Levels(usize),
    #[error("malformed model file: {0}")]
    Malformed(String),
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u64),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Rectangle on the camera plane, in active-window pixel coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorRegion {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
    pub label: String,
}

impl DetectorRegion {
    fn overlaps(&self, other: &DetectorRegion) -> bool {
        self.x0 < other.x0 + other.width
            && other.x0 < self.x0 + self.width
            && self.y0 < other.y0 + other.height
            && other.y0 < self.y0 + self.height
    }
}

/// Camera readout of one inference.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraOutput {
    /// |u|² over the full computational grid.
    pub intensity: Vec<f64>,
    pub region_sums: Vec<f64>,
    pub predicted: usize,
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Lays out `class_count` square detectors on the active window.
///
/// Up to four regions share the horizontal midline with centers at
/// `floor((k+1)·active_n/(K+1))`; larger counts wrap onto extra rows spaced the
/// same way vertically. Region side is `size`, shrunk if needed so that regions
/// stay disjoint and inside the window.
pub fn region_layout(
    class_count: usize,
    geometry: &OpticalGeometry,
    size: usize,
) -> Result<Vec<DetectorRegion>> {
    if !(2..=10).contains(&class_count) {
        return Err(ModelError::ClassCount(class_count));
    }
    let a = geometry.active_n();
    let rows = class_count.div_ceil(4);
    let per_row: Vec<usize> = (0..rows)
        .map(|r| class_count / rows + usize::from(r < class_count % rows))
        .collect();
    let widest = *per_row.iter().max().unwrap_or(&1);
    let side = size.min(a / (widest + 1)).min(a / (rows + 1));
    if side == 0 {
        return Err(ModelError::Invariant(format!(
            "active window of {a} px cannot hold {class_count} detector regions"
        )));
    }
    let mut regions = Vec::with_capacity(class_count);
    for (r, &count) in per_row.iter().enumerate() {
        let cy = (r + 1) * a / (rows + 1);
        for k in 0..count {
            let cx = (k + 1) * a / (count + 1);
            regions.push(DetectorRegion {
                x0: cx - side / 2,
                y0: cy - side / 2,
                width: side,
                height: side,
                label: format!("class{}", regions.len()),
            });
        }
    }
    Ok(regions)
}

/// [`region_layout`] with 20-pixel regions.
pub fn default_region_layout(
    class_count: usize,
    geometry: &OpticalGeometry,
) -> Result<Vec<DetectorRegion>> {
    region_layout(class_count, geometry, DEFAULT_REGION_SIZE)
}

/// Geometry, gap distances, trainable phase layers and detector layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DonnModel {
    geometry: OpticalGeometry,
    distances: Vec<f64>,
    layers: Vec<Vec<f64>>,
    regions: Vec<DetectorRegion>,
    labels: Vec<String>,
}

impl DonnModel {
    pub fn new(
        geometry: OpticalGeometry,
        distances: Vec<f64>,
        layers: Vec<Vec<f64>>,
        regions: Vec<DetectorRegion>,
        labels: Vec<String>,
    ) -> Result<Self> {
        let model = DonnModel {
            geometry,
            distances,
            layers,
            regions,
            labels,
        };
        model.validate()?;
        Ok(model)
    }

    /// Model with the default layout and phases drawn uniformly from [0, 2π).
    pub fn random(
        geometry: OpticalGeometry,
        labels: Vec<String>,
        layer_count: usize,
        distance: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut regions = default_region_layout(labels.len(), &geometry)?;
        for (reg, label) in regions.iter_mut().zip(&labels) {
            reg.label = label.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let px = geometry.active_n() * geometry.active_n();
        let layers = (0..layer_count)
            .map(|_| (0..px).map(|_| rng.gen_range(0.0..2.0 * PI)).collect())
            .collect();
        DonnModel::new(
            geometry,
            vec![distance; layer_count + 1],
            layers,
            regions,
            labels,
        )
    }

    fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        OpticalGeometry::new(g.wavelength(), g.pitch(), g.grid_n(), g.active_n())?;
        let inv = |m: String| Err(ModelError::Invariant(m));
        if self.layers.is_empty() {
            return inv("model needs at least one phase layer".into());
        }
        if self.distances.len() != self.layers.len() + 1 {
            return inv(format!(
                "{} layers need {} distances, got {}",
                self.layers.len(),
                self.layers.len() + 1,
                self.distances.len()
            ));
        }
        if let Some(d) = self.distances.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return inv(format!("distances must be positive and finite, got {d}"));
        }
        let px = g.active_n() * g.active_n();
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.len() != px {
                return inv(format!("layer {i} has {} values, expected {px}", layer.len()));
            }
            if layer.iter().any(|p| !p.is_finite()) {
                return inv(format!("layer {i} contains non-finite phases"));
            }
        }
        if self.regions.len() != self.labels.len() {
            return inv(format!(
                "{} regions but {} labels",
                self.regions.len(),
                self.labels.len()
            ));
        }
        if self.labels.len() < 2 {
            return inv("a classifier needs at least two classes".into());
        }
        for (i, reg) in self.regions.iter().enumerate() {
            if reg.width == 0
                || reg.height == 0
                || reg.x0 + reg.width > g.active_n()
                || reg.y0 + reg.height > g.active_n()
            {
                return inv(format!("region {i} does not lie inside the active window"));
            }
            for (j, other) in self.regions.iter().enumerate().skip(i + 1) {
                if reg.overlaps(other) {
                    return inv(format!("regions {i} and {j} overlap"));
                }
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> &OpticalGeometry {
        &self.geometry
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.layers
    }

    pub fn regions(&self) -> &[DetectorRegion] {
        &self.regions
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.labels.len()
    }

    /// Replaces the phase layers, keeping everything else.
    pub fn with_layers(&self, layers: Vec<Vec<f64>>) -> Result<Self> {
        DonnModel::new(
            self.geometry,
            self.distances.clone(),
            layers,
            self.regions.clone(),
            self.labels.clone(),
        )
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.layers
    }

    /// Inference under unit plane-wave illumination.
    pub fn forward(&self, input_bits: &[u8]) -> Result<CameraOutput> {
        let incident = Illumination::Uniform.field(self.geometry, 1.0);
        self.forward_illuminated(input_bits, &incident)
    }

    /// Inference with an arbitrary incident field on the input SLM.
    pub fn forward_illuminated(
        &self,
        input_bits: &[u8],
        incident: &ComplexField,
    ) -> Result<CameraOutput> {
        let g = self.geometry;
        let input = masked_input(&g, input_bits, incident)?;
        let kernels = StackKernels::for_model(self)?;
        let mut sim = Simulator::new(&kernels);
        let trace = sim.forward(&self.layers, &input, true, false);
        let region_sums = region_sums(&g, &self.regions, &trace.camera);
        Ok(CameraOutput {
            intensity: trace.camera.iter().map(|v| v.norm_sqr()).collect(),
            predicted: argmax(&region_sums),
            region_sums,
        })
    }
}

/// Repeated inference with the propagation kernels built once.
pub struct Predictor {
    model: DonnModel,
    kernels: StackKernels,
    incident: ComplexField,
}

impl Predictor {
    pub fn new(model: &DonnModel) -> Result<Self> {
        Ok(Predictor {
            kernels: StackKernels::for_model(model)?,
            incident: Illumination::Uniform.field(model.geometry, 1.0),
            model: model.clone(),
        })
    }

    pub fn model(&self) -> &DonnModel {
        &self.model
    }

    pub fn forward(&self, input_bits: &[u8]) -> Result<CameraOutput> {
        let g = self.model.geometry;
        let input = masked_input(&g, input_bits, &self.incident)?;
        let mut sim = Simulator::new(&self.kernels);
        let trace = sim.forward(&self.model.layers, &input, true, false);
        let region_sums = region_sums(&g, &self.model.regions, &trace.camera);
        Ok(CameraOutput {
            intensity: trace.camera.iter().map(|v| v.norm_sqr()).collect(),
            predicted: argmax(&region_sums),
            region_sums,
        })
    }
}

/// Active-window field after the binary input SLM.
pub(crate) fn masked_input(
    g: &OpticalGeometry,
    input_bits: &[u8],
    incident: &ComplexField,
) -> Result<Vec<Complex64>> {
    let px = g.active_n() * g.active_n();
    if input_bits.len() != px {
        return Err(ModelError::DimensionMismatch {
            expected: px,
            got: input_bits.len(),
        });
    }
    if incident.geometry() != g {
        return Err(OpticsError::GeometryMismatch.into());
    }
    let window = gather_window(g, incident.data());
    input_bits
        .iter()
        .zip(window)
        .map(|(&b, u)| match b {
            0 => Ok(Complex64::default()),
            1 => Ok(u),
            other => Err(ModelError::Invariant(format!(
                "input pixels must be 0 or 1, got {other}"
            ))),
        })
        .collect()
}

/// Wraps every phase to [0, 2π) and snaps it to the nearest of `levels` equally
/// spaced values.
pub fn quantize_phases(model: &DonnModel, levels: usize) -> Result<DonnModel> {
    if levels < 2 {
        return Err(ModelError::Levels(levels));
    }
    let layers = model
        .layers
        .iter()
        .map(|layer| layer.iter().map(|&p| quantize_phase(p, levels)).collect())
        .collect();
    model.with_layers(layers)
}

fn quantize_phase(phase: f64, levels: usize) -> f64 {
    let tau = 2.0 * PI;
    let wrapped = phase.rem_euclid(tau);
    let k = (wrapped / tau * levels as f64).round() as usize % levels;
    tau * k as f64 / levels as f64
}

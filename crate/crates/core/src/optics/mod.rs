//! Scalar coherent fields and band-limited angular-spectrum propagation.

mod fft;

use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) use fft::FftWorkspace;

/// 532 nm laser line.
pub const DEFAULT_WAVELENGTH: f64 = 532e-9;
/// SLM pixel pitch.
pub const DEFAULT_PITCH: f64 = 36e-6;
/// Computational grid side.
pub const DEFAULT_GRID_N: usize = 256;
/// Modulated window side; equals the input image size.
pub const DEFAULT_ACTIVE_N: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpticsError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("geometry mismatch between field and kernel")]
    GeometryMismatch,
    #[error("size mismatch: expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("non-finite value: {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, OpticsError>;

/// Sampling geometry shared by every plane of the system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalGeometry {
    wavelength: f64,
    pitch: f64,
    grid_n: usize,
    active_n: usize,
}

impl Default for OpticalGeometry {
    fn default() -> Self {
        OpticalGeometry {
            wavelength: DEFAULT_WAVELENGTH,
            pitch: DEFAULT_PITCH,
            grid_n: DEFAULT_GRID_N,
            active_n: DEFAULT_ACTIVE_N,
        }
    }
}

impl OpticalGeometry {
    pub fn new(wavelength: f64, pitch: f64, grid_n: usize, active_n: usize) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(OpticsError::InvalidGeometry(format!(
                "wavelength must be positive and finite, got {wavelength}"
            )));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(OpticsError::InvalidGeometry(format!(
                "pitch must be positive and finite, got {pitch}"
            )));
        }
        if grid_n == 0 || !grid_n.is_multiple_of(2) {
            return Err(OpticsError::InvalidGeometry(format!(
                "grid_n must be a positive even integer, got {grid_n}"
            )));
        }
        if active_n == 0 || active_n > grid_n {
            return Err(OpticsError::InvalidGeometry(format!(
                "active_n must satisfy 0 < active_n <= grid_n ({grid_n}), got {active_n}"
            )));
        }
        Ok(OpticalGeometry {
            wavelength,
            pitch,
            grid_n,
            active_n,
        })
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    pub fn active_n(&self) -> usize {
        self.active_n
    }

    /// Row/column index of the first active-window pixel.
    pub fn offset(&self) -> usize {
        (self.grid_n - self.active_n) / 2
    }

    /// Grid rows (and columns) covered by the active window.
    pub fn window(&self) -> Range<usize> {
        let o = self.offset();
        o..o + self.active_n
    }

    /// Frequency spacing of the DFT grid, 1/(grid_n·pitch).
    pub fn frequency_step(&self) -> f64 {
        1.0 / (self.grid_n as f64 * self.pitch)
    }

    /// Spatial frequency of DFT index `k` in standard ordering, covering
    /// `[-grid_n/2, grid_n/2)·Δf`.
    pub fn frequency(&self, k: usize) -> f64 {
        let n = self.grid_n as isize;
        let k = k as isize;
        let signed = if k < n / 2 { k } else { k - n };
        signed as f64 * self.frequency_step()
    }

    /// Grid index of active-window pixel (row, col).
    pub(crate) fn window_index(&self, row: usize, col: usize) -> usize {
        let o = self.offset();
        (row + o) * self.grid_n + col + o
    }
}

/// Sampled complex amplitude on the computational grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    geometry: OpticalGeometry,
    data: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(geometry: OpticalGeometry) -> Self {
        let n = geometry.grid_n;
        ComplexField {
            geometry,
            data: vec![Complex64::default(); n * n],
        }
    }

    /// Uniform field of the given complex amplitude over the whole grid.
    pub fn uniform(geometry: OpticalGeometry, amplitude: Complex64) -> Self {
        let n = geometry.grid_n;
        ComplexField {
            geometry,
            data: vec![amplitude; n * n],
        }
    }

    pub fn from_data(geometry: OpticalGeometry, data: Vec<Complex64>) -> Result<Self> {
        let expected = geometry.grid_n * geometry.grid_n;
        if data.len() != expected {
            return Err(OpticsError::SizeMismatch {
                expected,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(OpticsError::NonFinite("field amplitude"));
        }
        Ok(ComplexField { geometry, data })
    }

    pub fn geometry(&self) -> &OpticalGeometry {
        &self.geometry
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    /// Σ|u|².
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Unitary 2D DFT of the field, standard frequency ordering.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut ws = FftWorkspace::new(self.geometry.grid_n);
        let mut data = self.data.clone();
        ws.forward(&mut data);
        data
    }

    /// Inverse of [`ComplexField::spectrum`].
    pub fn from_spectrum(geometry: OpticalGeometry, mut spectrum: Vec<Complex64>) -> Result<Self> {
        let expected = geometry.grid_n * geometry.grid_n;
        if spectrum.len() != expected {
            return Err(OpticsError::SizeMismatch {
                expected,
                got: spectrum.len(),
            });
        }
        let mut ws = FftWorkspace::new(geometry.grid_n);
        ws.inverse(&mut spectrum);
        Ok(ComplexField {
            geometry,
            data: spectrum,
        })
    }

    /// Standard inner product ⟨self, other⟩ = Σ self · conj(other).
    pub fn inner(&self, other: &ComplexField) -> Complex64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b.conj())
            .sum()
    }
}

/// Free-space transfer function for one propagation distance.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationKernel {
    geometry: OpticalGeometry,
    distance: f64,
    transfer: Vec<Complex64>,
}

impl PropagationKernel {
    pub fn geometry(&self) -> &OpticalGeometry {
        &self.geometry
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    /// Transfer values, row-major over (fy, fx) in standard DFT ordering.
    pub fn transfer(&self) -> &[Complex64] {
        &self.transfer
    }

    /// Anti-aliasing band limit 1/(λ·sqrt((2·Δf·|d|)² + 1)).
    pub fn band_limit(&self) -> f64 {
        band_limit(&self.geometry, self.distance)
    }

    /// Kernel whose transfer is the elementwise product of two kernels on the same grid.
    pub fn compose(&self, other: &PropagationKernel) -> Result<PropagationKernel> {
        if self.geometry != other.geometry {
            return Err(OpticsError::GeometryMismatch);
        }
        Ok(PropagationKernel {
            geometry: self.geometry,
            distance: self.distance + other.distance,
            transfer: self
                .transfer
                .iter()
                .zip(&other.transfer)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }
}

pub fn band_limit(geometry: &OpticalGeometry, distance: f64) -> f64 {
    let t = 2.0 * geometry.frequency_step() * distance.abs();
    1.0 / (geometry.wavelength * (t * t + 1.0).sqrt())
}

/// Builds the band-limited angular-spectrum transfer function.
pub fn make_kernel(geometry: OpticalGeometry, distance: f64) -> Result<PropagationKernel> {
    if !distance.is_finite() {
        return Err(OpticsError::NonFinite("propagation distance"));
    }
    let n = geometry.grid_n;
    let f_lim = band_limit(&geometry, distance);
    let inv_lambda_sq = 1.0 / (geometry.wavelength * geometry.wavelength);
    let freqs: Vec<f64> = (0..n).map(|k| geometry.frequency(k)).collect();
    let mut transfer = Vec::with_capacity(n * n);
    for &fy in &freqs {
        for &fx in &freqs {
            let arg = inv_lambda_sq - fx * fx - fy * fy;
            let value = if arg > 0.0 && fx.abs() <= f_lim && fy.abs() <= f_lim {
                Complex64::from_polar(1.0, 2.0 * PI * distance * arg.sqrt())
            } else {
                Complex64::default()
            };
            transfer.push(value);
        }
    }
    Ok(PropagationKernel {
        geometry,
        distance,
        transfer,
    })
}

fn check_same(field: &ComplexField, kernel: &PropagationKernel) -> Result<()> {
    if field.geometry != kernel.geometry {
        return Err(OpticsError::GeometryMismatch);
    }
    Ok(())
}

/// Propagates `field` by the kernel's distance.
pub fn propagate(field: &ComplexField, kernel: &PropagationKernel) -> Result<ComplexField> {
    filter(field, kernel, false)
}

/// Adjoint of [`propagate`]: applies the conjugated transfer function.
pub fn adjoint_propagate(field: &ComplexField, kernel: &PropagationKernel) -> Result<ComplexField> {
    filter(field, kernel, true)
}

fn filter(field: &ComplexField, kernel: &PropagationKernel, conjugate: bool) -> Result<ComplexField> {
    check_same(field, kernel)?;
    let n = field.geometry.grid_n;
    let mut ws = FftWorkspace::new(n);
    let mut data = field.data.clone();
    ws.filter(&mut data, &kernel.transfer, conjugate, 0..n, 0..n);
    Ok(ComplexField {
        geometry: field.geometry,
        data,
    })
}

fn check_window_len(geometry: &OpticalGeometry, len: usize) -> Result<()> {
    let expected = geometry.active_n * geometry.active_n;
    if len != expected {
        return Err(OpticsError::SizeMismatch { expected, got: len });
    }
    Ok(())
}

/// Multiplies the active window by exp(i·φ) and blocks everything outside it.
pub fn apply_phase(field: &ComplexField, phase: &[f64]) -> Result<ComplexField> {
    let g = field.geometry;
    check_window_len(&g, phase.len())?;
    if phase.iter().any(|p| !p.is_finite()) {
        return Err(OpticsError::NonFinite("phase"));
    }
    let mut out = ComplexField::zeros(g);
    let a = g.active_n;
    for r in 0..a {
        for c in 0..a {
            let idx = g.window_index(r, c);
            out.data[idx] = field.data[idx] * Complex64::cis(phase[r * a + c]);
        }
    }
    Ok(out)
}

/// Binary transmittance over the active window; opaque outside it.
pub fn apply_amplitude_mask(field: &ComplexField, bits: &[u8]) -> Result<ComplexField> {
    let g = field.geometry;
    check_window_len(&g, bits.len())?;
    let mut out = ComplexField::zeros(g);
    let a = g.active_n;
    for r in 0..a {
        for c in 0..a {
            let idx = g.window_index(r, c);
            out.data[idx] = match bits[r * a + c] {
                0 => Complex64::default(),
                1 => field.data[idx],
                other => {
                    return Err(OpticsError::InvalidGeometry(format!(
                        "amplitude mask values must be 0 or 1, got {other}"
                    )))
                }
            };
        }
    }
    Ok(out)
}

/// Per-pixel |u|².
pub fn intensity(field: &ComplexField) -> Vec<f64> {
    field.data.iter().map(|v| v.norm_sqr()).collect()
}

/// Illumination profile across the active window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Illumination {
    /// Unit-amplitude plane wave.
    #[default]
    Uniform,
    /// Gaussian beam with the given 1/e² intensity diameter, centered on the window.
    Gaussian { diameter_m: f64 },
}

impl Illumination {
    /// Incident field on the full grid.
    pub fn field(&self, geometry: OpticalGeometry, amplitude: f64) -> ComplexField {
        match *self {
            Illumination::Uniform => {
                ComplexField::uniform(geometry, Complex64::new(amplitude, 0.0))
            }
            Illumination::Gaussian { diameter_m } => {
                let n = geometry.grid_n;
                let w = diameter_m / 2.0;
                let center = (n as f64 - 1.0) / 2.0;
                let mut data = Vec::with_capacity(n * n);
                for r in 0..n {
                    for c in 0..n {
                        let y = (r as f64 - center) * geometry.pitch;
                        let x = (c as f64 - center) * geometry.pitch;
                        let a = amplitude * (-(x * x + y * y) / (w * w)).exp();
                        data.push(Complex64::new(a, 0.0));
                    }
                }
                ComplexField { geometry, data }
            }
        }
    }
}

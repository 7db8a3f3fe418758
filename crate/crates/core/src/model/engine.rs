//! Allocation-light forward and backward sweeps through the diffractive stack.

use num_complex::Complex64;

use super::{DetectorRegion, DonnModel};
use crate::optics::{make_kernel, FftWorkspace, OpticalGeometry, PropagationKernel, Result};

/// Transfer functions for every gap of a model, shared between worker threads.
#[derive(Debug, Clone)]
pub(crate) struct StackKernels {
    pub(crate) geometry: OpticalGeometry,
    pub(crate) kernels: Vec<PropagationKernel>,
}

impl StackKernels {
    pub(crate) fn for_model(model: &DonnModel) -> Result<Self> {
        let geometry = *model.geometry();
        let kernels = model
            .distances()
            .iter()
            .map(|&d| make_kernel(geometry, d))
            .collect::<Result<Vec<_>>>()?;
        Ok(StackKernels { geometry, kernels })
    }
}

/// Intermediate fields kept for the backward sweep.
pub(crate) struct ForwardTrace {
    /// Active-window field right after each phase layer.
    pub(crate) modulated: Vec<Vec<Complex64>>,
    /// Camera-plane field on the full grid (rows outside the window are zero
    /// unless the full plane was requested).
    pub(crate) camera: Vec<Complex64>,
}

/// Per-thread simulation state.
pub(crate) struct Simulator<'k> {
    kernels: &'k StackKernels,
    ws: FftWorkspace,
    buf: Vec<Complex64>,
}

impl<'k> Simulator<'k> {
    pub(crate) fn new(kernels: &'k StackKernels) -> Self {
        let n = kernels.geometry.grid_n();
        Simulator {
            kernels,
            ws: FftWorkspace::new(n),
            buf: vec![Complex64::default(); n * n],
        }
    }

    /// Runs input plane → camera. `input` holds the active-window field after the
    /// input mask; `full_camera` requests every camera row rather than the window rows.
    pub(crate) fn forward(
        &mut self,
        layers: &[Vec<f64>],
        input: &[Complex64],
        full_camera: bool,
        keep_trace: bool,
    ) -> ForwardTrace {
        let g = self.kernels.geometry;
        let n = g.grid_n();
        let a = g.active_n();
        let window = g.window();
        self.buf.fill(Complex64::default());
        scatter_window(&g, input, &mut self.buf);

        let mut modulated = Vec::with_capacity(if keep_trace { layers.len() } else { 0 });
        for (layer, kernel) in layers.iter().zip(&self.kernels.kernels) {
            self.ws.filter(
                &mut self.buf,
                kernel.transfer(),
                false,
                window.clone(),
                window.clone(),
            );
            let mut win = gather_window(&g, &self.buf);
            for (v, &phi) in win.iter_mut().zip(layer) {
                *v *= Complex64::cis(phi);
            }
            self.buf.fill(Complex64::default());
            scatter_window(&g, &win, &mut self.buf);
            if keep_trace {
                modulated.push(win);
            }
        }

        let last = &self.kernels.kernels[layers.len()];
        let out_rows = if full_camera { 0..n } else { window.clone() };
        self.ws
            .filter(&mut self.buf, last.transfer(), false, window, out_rows);
        debug_assert_eq!(a * a, input.len());
        ForwardTrace {
            modulated,
            camera: self.buf.clone(),
        }
    }

    /// Propagates the camera-plane sensitivity `seed` (= 2·∂L/∂I · u) back through the
    /// stack and returns ∂L/∂φ for every layer.
    pub(crate) fn backward(
        &mut self,
        layers: &[Vec<f64>],
        trace: &ForwardTrace,
        seed: Vec<Complex64>,
    ) -> Vec<Vec<f64>> {
        let g = self.kernels.geometry;
        let window = g.window();
        let mut b = seed;
        let mut grads = vec![Vec::new(); layers.len()];
        for l in (0..layers.len()).rev() {
            let kernel = &self.kernels.kernels[l + 1];
            self.ws
                .filter(&mut b, kernel.transfer(), true, window.clone(), window.clone());
            let win = gather_window(&g, &b);
            let u = &trace.modulated[l];
            // dL/dφ = Re(conj(b) · i · u)
            grads[l] = win
                .iter()
                .zip(u)
                .map(|(bv, uv)| -(bv.conj() * uv).im)
                .collect();
            if l > 0 {
                let back: Vec<Complex64> = win
                    .iter()
                    .zip(&layers[l])
                    .map(|(bv, &phi)| bv * Complex64::cis(-phi))
                    .collect();
                b.fill(Complex64::default());
                scatter_window(&g, &back, &mut b);
            }
        }
        grads
    }
}

pub(crate) fn gather_window(g: &OpticalGeometry, grid: &[Complex64]) -> Vec<Complex64> {
    let n = g.grid_n();
    let a = g.active_n();
    let o = g.offset();
    let mut out = Vec::with_capacity(a * a);
    for r in 0..a {
        let start = (r + o) * n + o;
        out.extend_from_slice(&grid[start..start + a]);
    }
    out
}

pub(crate) fn scatter_window(g: &OpticalGeometry, window: &[Complex64], grid: &mut [Complex64]) {
    let n = g.grid_n();
    let a = g.active_n();
    let o = g.offset();
    for r in 0..a {
        let start = (r + o) * n + o;
        grid[start..start + a].copy_from_slice(&window[r * a..(r + 1) * a]);
    }
}

/// Integrated intensity per detector region.
pub(crate) fn region_sums(
    g: &OpticalGeometry,
    regions: &[DetectorRegion],
    camera: &[Complex64],
) -> Vec<f64> {
    regions
        .iter()
        .map(|reg| {
            let mut s = 0.0;
            for r in reg.y0..reg.y0 + reg.height {
                for c in reg.x0..reg.x0 + reg.width {
                    s += camera[g.window_index(r, c)].norm_sqr();
                }
            }
            s
        })
        .collect()
}

/// Camera-plane sensitivity 2·(∂L/∂S_k)·u over each region, zero elsewhere.
pub(crate) fn region_seed(
    g: &OpticalGeometry,
    regions: &[DetectorRegion],
    camera: &[Complex64],
    dl_dsums: &[f64],
) -> Vec<Complex64> {
    let mut seed = vec![Complex64::default(); camera.len()];
    for (reg, &w) in regions.iter().zip(dl_dsums) {
        for r in reg.y0..reg.y0 + reg.height {
            for c in reg.x0..reg.x0 + reg.width {
                let i = g.window_index(r, c);
                seed[i] = camera[i] * (2.0 * w);
            }
        }
    }
    seed
}

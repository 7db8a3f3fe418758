//! Square 2D FFT with unitary scaling and optional row pruning.
//!
//! Fields in the diffractive stack are zero outside the modulated window and are
//! only read back inside it, so the first row pass may skip rows known to be zero
//! and the last row pass may skip rows nobody reads. Skipped output rows are
//! zeroed.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

fn plan_cache() -> &'static Mutex<HashMap<usize, Arc<Fft2>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft2>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Fft2 {
    /// Shared plan for an `n × n` grid.
    pub(crate) fn for_size(n: usize) -> Arc<Fft2> {
        let mut cache = plan_cache().lock().expect("fft plan cache poisoned");
        cache
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::<f64>::new();
                let forward = planner.plan_fft_forward(n);
                let inverse = planner.plan_fft_inverse(n);
                let scratch_len = forward
                    .get_inplace_scratch_len()
                    .max(inverse.get_inplace_scratch_len());
                Arc::new(Fft2 {
                    n,
                    forward,
                    inverse,
                    scratch_len,
                })
            })
            .clone()
    }
}

/// Reusable buffers for one thread of propagation work.
pub(crate) struct FftWorkspace {
    plan: Arc<Fft2>,
    transposed: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl FftWorkspace {
    pub(crate) fn new(n: usize) -> Self {
        let plan = Fft2::for_size(n);
        let scratch = vec![Complex64::default(); plan.scratch_len];
        FftWorkspace {
            transposed: vec![Complex64::default(); n * n],
            scratch,
            plan,
        }
    }

    /// Multiplies the spectrum of `data` by `transfer` (or its conjugate) in place.
    ///
    /// `transfer` must be symmetric under transposition; the product is taken in
    /// the transposed spectral layout.
    pub(crate) fn filter(
        &mut self,
        data: &mut [Complex64],
        transfer: &[Complex64],
        conjugate: bool,
        input_rows: Range<usize>,
        output_rows: Range<usize>,
    ) {
        let n = self.plan.n;
        debug_assert_eq!(data.len(), n * n);
        debug_assert_eq!(transfer.len(), n * n);
        let scale = 1.0 / (n as f64);

        let rows = &mut data[input_rows.start * n..input_rows.end * n];
        self.plan
            .forward
            .process_with_scratch(rows, &mut self.scratch);
        for r in (0..input_rows.start).chain(input_rows.end..n) {
            data[r * n..(r + 1) * n].fill(Complex64::default());
        }
        transpose(data, &mut self.transposed, n);
        self.plan
            .forward
            .process_with_scratch(&mut self.transposed, &mut self.scratch);

        let norm = scale * scale;
        if conjugate {
            for (v, h) in self.transposed.iter_mut().zip(transfer) {
                *v *= h.conj() * norm;
            }
        } else {
            for (v, h) in self.transposed.iter_mut().zip(transfer) {
                *v *= h * norm;
            }
        }

        self.plan
            .inverse
            .process_with_scratch(&mut self.transposed, &mut self.scratch);
        transpose(&self.transposed, data, n);
        let rows = &mut data[output_rows.start * n..output_rows.end * n];
        self.plan.inverse.process_with_scratch(rows, &mut self.scratch);
        for r in (0..output_rows.start).chain(output_rows.end..n) {
            data[r * n..(r + 1) * n].fill(Complex64::default());
        }
    }

    /// Unitary forward transform in natural (row-major) layout.
    pub(crate) fn forward(&mut self, data: &mut [Complex64]) {
        self.full_pass(data, false);
    }

    /// Unitary inverse transform in natural (row-major) layout.
    pub(crate) fn inverse(&mut self, data: &mut [Complex64]) {
        self.full_pass(data, true);
    }

    fn full_pass(&mut self, data: &mut [Complex64], inverse: bool) {
        let n = self.plan.n;
        let fft = if inverse {
            &self.plan.inverse
        } else {
            &self.plan.forward
        };
        fft.process_with_scratch(data, &mut self.scratch);
        transpose(data, &mut self.transposed, n);
        fft.process_with_scratch(&mut self.transposed, &mut self.scratch);
        transpose(&self.transposed, data, n);
        let scale = 1.0 / n as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    for rb in (0..n).step_by(BLOCK) {
        for cb in (0..n).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(n) {
                for c in cb..(cb + BLOCK).min(n) {
                    dst[c * n + r] = src[r * n + c];
                }
            }
        }
    }
}

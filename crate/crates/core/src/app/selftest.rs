//! Small-grid property checks run by `donn selftest`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::DonnModel;
use crate::optics::{
    self, adjoint_propagate, make_kernel, propagate, ComplexField, OpticalGeometry, PropagationKernel,
};
use crate::train::{grad, loss};

pub type AdjointFn = fn(&ComplexField, &PropagationKernel) -> optics::Result<ComplexField>;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub const GRADIENT_TOLERANCE: f64 = 1e-4;
pub const ENERGY_TOLERANCE: f64 = 1e-9;
pub const RECIPROCITY_TOLERANCE: f64 = 1e-9;
pub const ADJOINT_TOLERANCE: f64 = 1e-10;
pub const PLANE_WAVE_TOLERANCE: f64 = 1e-9;

pub fn run_selftest() -> Vec<CheckResult> {
    run_selftest_with(adjoint_propagate)
}

/// Same suite with a caller-supplied adjoint, so a broken one can be shown to fail.
pub fn run_selftest_with(adjoint: AdjointFn) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let (max_rel, checked) = gradient_check(7, 60);
    out.push(CheckResult {
        name: "gradient",
        passed: max_rel <= GRADIENT_TOLERANCE && checked >= 60,
        detail: format!("max relative error {max_rel:.3e} over {checked} pixels"),
    });
    let g = OpticalGeometry::new(532e-9, 36e-6, 32, 12).expect("valid geometry");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = 0.05;
    let k = make_kernel(g, d).expect("kernel");
    let back = make_kernel(g, -d).expect("kernel");

    let u = passband_field(&k, &mut rng);
    let energy = relative(propagate(&u, &k).expect("propagate").energy(), u.energy());
    out.push(CheckResult {
        name: "energy",
        passed: energy <= ENERGY_TOLERANCE,
        detail: format!("relative energy change {energy:.3e}"),
    });

    let round = propagate(&propagate(&u, &k).expect("propagate"), &back).expect("propagate");
    let recip = relative_l2(round.data(), u.data());
    out.push(CheckResult {
        name: "reciprocity",
        passed: recip <= RECIPROCITY_TOLERANCE,
        detail: format!("relative L2 error {recip:.3e}"),
    });

    let a = random_field(g, &mut rng);
    let b = random_field(g, &mut rng);
    let lhs = propagate(&a, &k).expect("propagate").inner(&b);
    let rhs = a.inner(&adjoint(&b, &k).expect("adjoint"));
    let adj = (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(f64::MIN_POSITIVE);
    out.push(CheckResult {
        name: "adjoint",
        passed: adj <= ADJOINT_TOLERANCE,
        detail: format!("inner-product mismatch {adj:.3e}"),
    });

    let plane = ComplexField::uniform(g, Complex64::new(1.0, 0.0));
    let moved = propagate(&plane, &k).expect("propagate");
    let phase = Complex64::from_polar(1.0, 2.0 * PI * d / g.wavelength());
    let expected: Vec<Complex64> = plane.data().iter().map(|v| v * phase).collect();
    let pw = relative_l2(moved.data(), &expected);
    out.push(CheckResult {
        name: "plane-wave",
        passed: pw <= PLANE_WAVE_TOLERANCE,
        detail: format!("relative L2 error {pw:.3e}"),
    });
    out
}

/// Adjoint gradient vs central differences (h = 1e−5) on a 32-grid, 12-window,
/// two-layer, two-class model. Returns the worst relative error and the count.
pub fn gradient_check(seed: u64, samples: usize) -> (f64, usize) {
    let g = OpticalGeometry::new(532e-9, 36e-6, 32, 12).expect("valid geometry");
    let model = DonnModel::random(g, vec!["a".into(), "b".into()], 2, 0.05, seed).expect("model");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let bits: Vec<u8> = (0..144).map(|_| rng.gen_range(0..2)).collect();
    let (target, scale, h) = (1, 20.0, 1e-5);
    let analytic = grad(&model, &bits, target, scale).expect("gradient").layers;
    let eval = |layers: Vec<Vec<f64>>| {
        let m = model.with_layers(layers).expect("same shape");
        loss(&m.forward(&bits).expect("forward").region_sums, target, scale)
    };
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let l = rng.gen_range(0..2);
        let p = rng.gen_range(0..144);
        let mut plus = model.layers().to_vec();
        plus[l][p] += h;
        let mut minus = model.layers().to_vec();
        minus[l][p] -= h;
        let fd = (eval(plus) - eval(minus)) / (2.0 * h);
        let a = analytic[l][p];
        worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-6));
    }
    (worst, samples)
}

fn random_field(g: OpticalGeometry, rng: &mut ChaCha8Rng) -> ComplexField {
    let data = (0..g.grid_n() * g.grid_n())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    ComplexField::from_data(g, data).expect("sized field")
}

/// Random field whose spectrum lies where the kernel passes light.
fn passband_field(k: &PropagationKernel, rng: &mut ChaCha8Rng) -> ComplexField {
    let g = *k.geometry();
    let mut spectrum = random_field(g, rng).spectrum();
    for (s, t) in spectrum.iter_mut().zip(k.transfer()) {
        if t.norm() == 0.0 {
            *s = Complex64::default();
        }
    }
    ComplexField::from_spectrum(g, spectrum).expect("sized spectrum")
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn relative_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(Complex64::norm_sqr).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

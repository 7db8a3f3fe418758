mod common;

use num_complex::Complex64;

#[test]
fn oracle_is_symmetric_and_decays() {
    let n = 16;
    let mut src = vec![Complex64::default(); n * n];
    src[8 * n + 8] = Complex64::new(1.0, 0.0);
    let out = common::rayleigh_sommerfeld(&src, n, 10e-6, 532e-9, 1e-3);
    assert!((out[8 * n + 5] - out[8 * n + 11]).norm() < 1e-12 * out[8 * n + 5].norm());
    assert!((out[5 * n + 8] - out[8 * n + 5]).norm() < 1e-12 * out[8 * n + 5].norm());
    assert!(out[8 * n + 8].norm() > out[0].norm());
}

#[test]
fn angular_spectrum_matches_direct_summation() {
    let err = common::rs_oracle_error();
    assert!(err <= 0.02, "relative L2 {err}");
}

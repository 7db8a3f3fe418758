#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;

use donn::encode::{encode_bits, encode_record, one_hot_encode, EncoderConfig, FeatureSchema, FieldValue};
use donn::rl::cartpole::{state_to_image, CartPoleState};

pub fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn lines(name: &str) -> Vec<String> {
    fs::read_to_string(golden(name))
        .unwrap()
        .lines()
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

fn bits(line: &str) -> Vec<u8> {
    line.bytes().map(|b| b - b'0').collect()
}

fn mos2_record(line: &str) -> Vec<FieldValue> {
    line.split(',')
        .map(|f| match f {
            "true" => FieldValue::Bool(true),
            "false" => FieldValue::Bool(false),
            other => FieldValue::Text(other.to_string()),
        })
        .collect()
}

/// Number of golden samples that disagree, per pipeline.
pub struct GoldenReport {
    pub mos2: (usize, usize),
    pub mos2_width: usize,
    pub drug: (usize, usize),
    pub cartpole: (usize, usize),
}

pub fn check_goldens() -> GoldenReport {
    let schema = FeatureSchema::from_json(&fs::read_to_string(golden("mos2_schema.json")).unwrap()).unwrap();
    let cfg = EncoderConfig::mos2();
    let onehots = lines("mos2_onehot.txt");
    let images = lines("mos2_images.txt");
    let mut bad = 0;
    let records = lines("mos2_records.csv");
    for (i, rec) in records.iter().enumerate() {
        let r = mos2_record(rec);
        if one_hot_encode(&r, &schema).unwrap() != bits(&onehots[i])
            || encode_record(&r, &schema, &cfg).unwrap() != bits(&images[i])
        {
            bad += 1;
        }
    }
    let mos2 = (bad, records.len());

    let cfg = EncoderConfig::drug();
    let inputs = lines("drug_bits.txt");
    let images = lines("drug_images.txt");
    let bad = inputs
        .iter()
        .zip(&images)
        .filter(|(i, o)| encode_bits(&bits(i), &cfg).unwrap() != bits(o))
        .count();
    let drug = (bad, inputs.len());

    let states = lines("cartpole_states.csv");
    let images = lines("cartpole_images.txt");
    let bad = states
        .iter()
        .zip(&images)
        .filter(|(s, o)| {
            let v: Vec<f64> = s.split(',').map(|x| x.parse().unwrap()).collect();
            let state = CartPoleState { x: v[0], theta: v[1], x_dot: v[2], theta_dot: v[3] };
            state_to_image(&state).unwrap() != bits(o)
        })
        .count();
    GoldenReport {
        mos2,
        mos2_width: schema.width(),
        drug,
        cartpole: (bad, states.len()),
    }
}

use num_complex::Complex64;

/// Direct first-kind Rayleigh–Sommerfeld summation of a sampled field onto a
/// parallel plane at distance `d`, same grid.
pub fn rayleigh_sommerfeld(field: &[Complex64], n: usize, pitch: f64, wavelength: f64, d: f64) -> Vec<Complex64> {
    let k = 2.0 * std::f64::consts::PI / wavelength;
    let mut out = vec![Complex64::default(); n * n];
    for (src, u) in field.iter().enumerate().filter(|(_, u)| u.norm() > 0.0) {
        let (sy, sx) = ((src / n) as f64, (src % n) as f64);
        for (dst, o) in out.iter_mut().enumerate() {
            let dy = ((dst / n) as f64 - sy) * pitch;
            let dx = ((dst % n) as f64 - sx) * pitch;
            let r = (dx * dx + dy * dy + d * d).sqrt();
            let h = Complex64::new(1.0 / r, -k) * Complex64::from_polar(1.0, k * r) * (d / (2.0 * std::f64::consts::PI * r * r));
            *o += u * h * pitch * pitch;
        }
    }
    out
}

/// Relative L2 difference between the library propagation and the direct sum
/// over the central quarter of a 32×32 grid (point source, 5 mm, 532 nm).
pub fn rs_oracle_error() -> f64 {
    use donn::optics::{make_kernel, propagate, ComplexField, OpticalGeometry};
    let (n, pitch, wavelength, d) = (32, 9.2e-6, 532e-9, 5e-3);
    let g = OpticalGeometry::new(wavelength, pitch, n, n).unwrap();
    let mut data = vec![Complex64::default(); n * n];
    data[(n / 2) * n + n / 2] = Complex64::new(1.0, 0.0);
    let ours = propagate(&ComplexField::from_data(g, data.clone()).unwrap(), &make_kernel(g, d).unwrap()).unwrap();
    let oracle = rayleigh_sommerfeld(&data, n, pitch, wavelength, d);
    let (mut num, mut den) = (0.0, 0.0);
    for y in n / 2 - n / 8..n / 2 + n / 8 {
        for x in n / 2 - n / 8..n / 2 + n / 8 {
            num += (ours.data()[y * n + x] - oracle[y * n + x]).norm_sqr();
            den += oracle[y * n + x].norm_sqr();
        }
    }
    (num / den).sqrt()
}

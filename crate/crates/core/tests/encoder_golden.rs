mod common;

use std::collections::BTreeSet;

use donn::data::tasks::synth_drug;
use donn::encode::lasso_select;
use donn::encode::EncoderConfig;

#[test]
fn matches_reference_images() {
    let r = common::check_goldens();
    assert_eq!(r.mos2_width, 81);
    assert_eq!(r.mos2.0, 0, "material records differ");
    assert_eq!(r.drug.0, 0, "mutation images differ");
    assert_eq!(r.cartpole.0, 0, "cart-pole images differ");
    assert!(r.mos2.1 > 0 && r.drug.1 > 0 && r.cartpole.1 > 0);
}

#[test]
fn encoder_presets() {
    assert_eq!((EncoderConfig::mos2().reshape_rows, EncoderConfig::mos2().threshold), (9, 0.1));
    assert_eq!((EncoderConfig::drug().reshape_rows, EncoderConfig::drug().threshold), (12, 0.5));
    assert_eq!((EncoderConfig::cartpole().reshape_rows, EncoderConfig::cartpole().threshold), (10, 0.01));
}

#[test]
fn drug_selection_keeps_144() {
    let (rows, y) = synth_drug(300, 500, 9);
    let sel = lasso_select(&rows, &y, 144).unwrap();
    assert_eq!(sel.len(), 144);
    assert_eq!(sel.iter().collect::<BTreeSet<_>>().len(), 144);
    assert!(sel.iter().all(|&i| i < 500));
}

//! Phase-layer training: loss, adjoint gradients, Adam, evaluation.

mod adam;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::LabeledImageDataset;
use crate::model::engine::{gather_window, region_seed, region_sums, Simulator, StackKernels};
use crate::model::{argmax, masked_input, DonnModel, ModelError};
use crate::optics::{Illumination, OpticsError};
use crate::seed::substream;
pub use adam::Adam;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("{0} dataset is empty")]
    EmptyDataset(&'static str),
    #[error("label {label} at sample {index} is outside the model's {classes} classes")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        classes: usize,
    },
    #[error("dataset images have side {got}, model expects {expected}")]
    ImageSize { expected: usize, got: usize },
}

impl From<OpticsError> for TrainError {
    fn from(e: OpticsError) -> Self {
        TrainError::Model(e.into())
    }
}

pub type Result<T> = std::result::Result<T, TrainError>;

fn default_learning_rate() -> f64 {
    0.01
}
fn default_batch_size() -> usize {
    32
}
fn default_epochs() -> usize {
    50
}
fn default_softmax_scale() -> f64 {
    20.0
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Softmax temperature α applied to sum-normalized region intensities.
    #[serde(default = "default_softmax_scale")]
    pub softmax_scale: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: default_learning_rate(),
            batch_size: default_batch_size(),
            epochs: default_epochs(),
            softmax_scale: default_softmax_scale(),
            seed: 0,
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if !(self.softmax_scale.is_finite() && self.softmax_scale > 0.0) {
            return bad("softmax_scale must be > 0");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("adam epsilon must be > 0");
        }
        Ok(())
    }
}

/// Loss value with its gradient with respect to the raw region sums.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub d_sums: Vec<f64>,
    /// True when every region sum was zero and the log K fallback was used.
    pub zero_signal: bool,
}

/// Softmax cross-entropy over sum-normalized region intensities.
pub fn loss_and_grad(region_sums: &[f64], target: usize, scale: f64) -> LossGrad {
    let k = region_sums.len();
    let total: f64 = region_sums.iter().sum();
    if !(total > 0.0) {
        return LossGrad {
            loss: (k as f64).ln(),
            d_sums: vec![0.0; k],
            zero_signal: true,
        };
    }
    let normalized: Vec<f64> = region_sums.iter().map(|s| s / total).collect();
    let logits: Vec<f64> = normalized.iter().map(|s| scale * s).collect();
    let top = argmax(&logits);
    let max = logits[top];
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let rest: f64 = exps.iter().enumerate().filter(|&(i, _)| i != top).map(|(_, e)| e).sum();
    let z = 1.0 + rest;
    let loss = (max - logits[target]) + rest.ln_1p();
    // dL/dŝ_k = α(p_k − δ_kt); dL/dS_k = (dL/dŝ_k − Σ_j dL/dŝ_j ŝ_j) / T
    let d_norm: Vec<f64> = exps
        .iter()
        .enumerate()
        .map(|(i, e)| scale * (e / z - if i == target { 1.0 } else { 0.0 }))
        .collect();
    let mean: f64 = d_norm.iter().zip(&normalized).map(|(g, s)| g * s).sum();
    LossGrad {
        loss,
        d_sums: d_norm.iter().map(|g| (g - mean) / total).collect(),
        zero_signal: false,
    }
}

/// Scalar loss; see [`loss_and_grad`].
pub fn loss(region_sums: &[f64], target: usize, scale: f64) -> f64 {
    loss_and_grad(region_sums, target, scale).loss
}

/// Per-sample loss, prediction and phase gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGradient {
    pub loss: f64,
    pub predicted: usize,
    pub zero_signal: bool,
    /// ∂L/∂φ for each layer, row-major over the active window.
    pub layers: Vec<Vec<f64>>,
}

fn check_target(model: &DonnModel, target: usize, index: usize) -> Result<()> {
    if target >= model.class_count() {
        return Err(TrainError::LabelOutOfRange {
            index,
            label: target,
            classes: model.class_count(),
        });
    }
    Ok(())
}

/// Loss and exact phase gradients for one sample via an adjoint sweep.
pub fn grad(model: &DonnModel, input_bits: &[u8], target: usize, scale: f64) -> Result<SampleGradient> {
    check_target(model, target, 0)?;
    let kernels = StackKernels::for_model(model)?;
    let mut sim = Simulator::new(&kernels);
    let incident = Illumination::Uniform.field(*model.geometry(), 1.0);
    let input = masked_input(model.geometry(), input_bits, &incident)?;
    Ok(sample_gradient(model, &mut sim, &input, target, scale))
}

fn sample_gradient(
    model: &DonnModel,
    sim: &mut Simulator<'_>,
    input: &[num_complex::Complex64],
    target: usize,
    scale: f64,
) -> SampleGradient {
    let g = model.geometry();
    let trace = sim.forward(model.layers(), input, false, true);
    let sums = region_sums(g, model.regions(), &trace.camera);
    let lg = loss_and_grad(&sums, target, scale);
    let layers = if lg.zero_signal {
        vec![vec![0.0; g.active_n() * g.active_n()]; model.layers().len()]
    } else {
        let seed = region_seed(g, model.regions(), &trace.camera, &lg.d_sums);
        sim.backward(model.layers(), &trace, seed)
    };
    SampleGradient {
        loss: lg.loss,
        predicted: argmax(&sums),
        zero_signal: lg.zero_signal,
        layers,
    }
}

/// Classification metrics over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<u64>>,
    /// Mean sum-normalized region intensities, indexed by true class.
    pub mean_normalized_sums: Vec<Vec<f64>>,
    /// Samples whose camera regions received no light.
    pub zero_signal_samples: usize,
    #[serde(skip)]
    pub mean_camera: Vec<Vec<f64>>,
}

fn check_dataset(model: &DonnModel, data: &LabeledImageDataset, name: &'static str) -> Result<()> {
    if data.is_empty() {
        return Err(TrainError::EmptyDataset(name));
    }
    if data.side() != model.geometry().active_n() {
        return Err(TrainError::ImageSize {
            expected: model.geometry().active_n(),
            got: data.side(),
        });
    }
    for (i, &label) in data.labels().iter().enumerate() {
        check_target(model, label, i)?;
    }
    Ok(())
}

struct Readout {
    sums: Vec<f64>,
    camera_window: Vec<f64>,
}

/// Accuracy, confusion matrix and per-class mean readouts.
pub fn evaluate(model: &DonnModel, data: &LabeledImageDataset) -> Result<Evaluation> {
    check_dataset(model, data, "evaluation")?;
    let g = *model.geometry();
    let kernels = StackKernels::for_model(model)?;
    let incident = Illumination::Uniform.field(g, 1.0);
    let readouts: Vec<Readout> = data
        .images()
        .par_iter()
        .map_init(
            || Simulator::new(&kernels),
            |sim, image| {
                let input = masked_input(&g, image, &incident).expect("validated image size");
                let trace = sim.forward(model.layers(), &input, false, false);
                Readout {
                    sums: region_sums(&g, model.regions(), &trace.camera),
                    camera_window: gather_window(&g, &trace.camera)
                        .iter()
                        .map(|v| v.norm_sqr())
                        .collect(),
                }
            },
        )
        .collect();

    let k = model.class_count();
    let px = g.active_n() * g.active_n();
    let mut confusion = vec![vec![0u64; k]; k];
    let mut mean_sums = vec![vec![0.0; k]; k];
    let mut mean_camera = vec![vec![0.0; px]; k];
    let mut per_class = vec![0usize; k];
    let mut zero_signal = 0;
    for (r, &label) in readouts.iter().zip(data.labels()) {
        let predicted = argmax(&r.sums);
        confusion[label][predicted] += 1;
        per_class[label] += 1;
        let total: f64 = r.sums.iter().sum();
        if total > 0.0 {
            for (m, s) in mean_sums[label].iter_mut().zip(&r.sums) {
                *m += s / total;
            }
        } else {
            zero_signal += 1;
        }
        for (m, v) in mean_camera[label].iter_mut().zip(&r.camera_window) {
            *m += v;
        }
    }
    for c in 0..k {
        if per_class[c] > 0 {
            let n = per_class[c] as f64;
            mean_sums[c].iter_mut().for_each(|v| *v /= n);
            mean_camera[c].iter_mut().for_each(|v| *v /= n);
        }
    }
    let correct: u64 = (0..k).map(|c| confusion[c][c]).sum();
    Ok(Evaluation {
        accuracy: correct as f64 / data.len() as f64,
        confusion,
        mean_normalized_sums: mean_sums,
        zero_signal_samples: zero_signal,
        mean_camera,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub zero_signal_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub test: Evaluation,
    /// Excluded from the serialized report so reruns stay byte-identical.
    #[serde(skip)]
    pub wall_clock_seconds: f64,
}

impl TrainReport {
    pub fn test_accuracy(&self) -> f64 {
        self.test.accuracy
    }

    /// Per-epoch table followed by the confusion matrix.
    pub fn to_table(&self, labels: &[String]) -> String {
        let mut out = String::from("epoch      loss  train_acc\n");
        for e in &self.epochs {
            out.push_str(&format!("{:>5}  {:>8.5}  {:>9.4}\n", e.epoch, e.loss, e.train_accuracy));
        }
        out.push_str(&format!("\ntest accuracy: {:.4}\n\n", self.test.accuracy));
        out.push_str(&format_confusion(&self.test.confusion, labels));
        out
    }
}

/// Aligned integer grid, rows = true class, columns = predicted class.
pub fn format_confusion(confusion: &[Vec<u64>], labels: &[String]) -> String {
    let width = confusion
        .iter()
        .flatten()
        .map(|v| v.to_string().len())
        .chain(labels.iter().map(|l| l.len()))
        .max()
        .unwrap_or(1);
    let label_w = labels.iter().map(|l| l.len()).max().unwrap_or(0).max(4);
    let mut out = format!("{:>label_w$}", "true");
    for l in labels {
        out.push_str(&format!(" {l:>width$}"));
    }
    out.push('\n');
    for (row, l) in confusion.iter().zip(labels) {
        out.push_str(&format!("{l:>label_w$}"));
        for v in row {
            out.push_str(&format!(" {v:>width$}"));
        }
        out.push('\n');
    }
    out
}

/// Minibatch Adam over seeded shuffles; returns the final-epoch model.
///
/// Per-sample passes run on the current rayon pool; the batch gradient is the mean
/// of per-sample gradients summed in sample order, so results do not depend on the
/// worker count.
pub fn train(
    model: &DonnModel,
    train_set: &LabeledImageDataset,
    test_set: &LabeledImageDataset,
    config: &TrainConfig,
) -> Result<(DonnModel, TrainReport)> {
    train_with_progress(model, train_set, test_set, config, |_| {})
}

pub fn train_with_progress(
    model: &DonnModel,
    train_set: &LabeledImageDataset,
    test_set: &LabeledImageDataset,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(DonnModel, TrainReport)> {
    config.validate()?;
    check_dataset(model, train_set, "training")?;
    check_dataset(model, test_set, "test")?;
    let started = Instant::now();

    let g = *model.geometry();
    let kernels = StackKernels::for_model(model)?;
    let incident = Illumination::Uniform.field(g, 1.0);
    let inputs: Vec<Vec<num_complex::Complex64>> = train_set
        .images()
        .iter()
        .map(|img| masked_input(&g, img, &incident))
        .collect::<std::result::Result<_, _>>()?;

    let mut current = model.clone();
    let param_count: usize = current.layers().iter().map(Vec::len).sum();
    let mut adam = Adam::new(param_count, config.learning_rate, config.beta1, config.beta2, config.epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(substream(config.seed, "shuffle"));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut zero_signal = 0usize;
        for batch in order.chunks(config.batch_size) {
            let snapshot = &current;
            let samples: Vec<SampleGradient> = batch
                .par_iter()
                .map_init(
                    || Simulator::new(&kernels),
                    |sim, &i| {
                        sample_gradient(snapshot, sim, &inputs[i], train_set.labels()[i], config.softmax_scale)
                    },
                )
                .collect();
            let mut mean = vec![0.0; param_count];
            for (s, &i) in samples.iter().zip(batch) {
                loss_sum += s.loss;
                correct += usize::from(s.predicted == train_set.labels()[i]);
                zero_signal += usize::from(s.zero_signal);
                for (m, v) in mean.iter_mut().zip(s.layers.iter().flatten()) {
                    *m += v;
                }
            }
            let n = batch.len() as f64;
            mean.iter_mut().for_each(|m| *m /= n);
            let mut params: Vec<&mut f64> = current.layers_mut().iter_mut().flatten().collect();
            adam.step(&mut params, &mean);
        }
        let stats = EpochStats {
            epoch: epoch + 1,
            loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            zero_signal_samples: zero_signal,
        };
        on_epoch(&stats);
        epochs.push(stats);
    }

    let test = evaluate(&current, test_set)?;
    Ok((
        current,
        TrainReport {
            epochs,
            test,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::OpticalGeometry;

    #[test]
    fn uniform_sums_give_log_k() {
        for k in 2..6 {
            let l = loss(&vec![3.0; k], 1, 20.0);
            assert!((l - (k as f64).ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn one_hot_sums_closed_form() {
        let alpha = 20.0_f64;
        for k in 2..5 {
            let mut sums = vec![0.0; k];
            sums[1] = 7.0;
            let expected = ((k as f64 - 1.0) * (-alpha).exp()).ln_1p();
            let got = loss(&sums, 1, alpha);
            assert!((got - expected).abs() < 1e-15, "{k}: {got} vs {expected}");
        }
    }

    #[test]
    fn loss_scale_invariant_and_nonnegative() {
        let sums = [0.3, 1.7, 0.9];
        let a = loss(&sums, 2, 20.0);
        let b = loss(&sums.map(|s| s * 123.0), 2, 20.0);
        assert!((a - b).abs() < 1e-13);
        assert!(a >= 0.0);
    }

    #[test]
    fn zero_sums_fall_back() {
        let lg = loss_and_grad(&[0.0, 0.0, 0.0], 0, 20.0);
        assert_eq!(lg.loss, 3f64.ln());
        assert_eq!(lg.d_sums, vec![0.0; 3]);
        assert!(lg.zero_signal);
    }

    #[test]
    fn loss_gradient_matches_finite_difference() {
        let sums = [0.4, 1.1, 0.7];
        let lg = loss_and_grad(&sums, 1, 20.0);
        let h = 1e-6;
        for i in 0..3 {
            let mut p = sums;
            let mut m = sums;
            p[i] += h;
            m[i] -= h;
            let fd = (loss(&p, 1, 20.0) - loss(&m, 1, 20.0)) / (2.0 * h);
            assert!((fd - lg.d_sums[i]).abs() < 1e-7, "{fd} vs {}", lg.d_sums[i]);
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig { epochs: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { batch_size: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { learning_rate: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn grad_rejects_bad_target() {
        let g = OpticalGeometry::new(532e-9, 36e-6, 32, 12).unwrap();
        let m = DonnModel::random(g, vec!["a".into(), "b".into()], 2, 0.05, 1).unwrap();
        assert!(matches!(
            grad(&m, &[1; 144], 2, 20.0),
            Err(TrainError::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn confusion_table_is_aligned() {
        let t = format_confusion(&[vec![10, 2], vec![0, 123]], &["no".into(), "yes".into()]);
        assert_eq!(t, "true  no yes\n  no  10   2\n yes   0 123\n");
    }
}

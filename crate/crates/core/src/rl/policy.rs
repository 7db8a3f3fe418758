//! Teacher distillation and closed-loop DONN control.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::cartpole::{env_reset, env_step, state_to_image_sized, Action, CartPoleState, X_LIMIT};
use super::qnet::QNet;
use super::{Result, RlError};
use crate::data::{LabeledImageDataset, SplitTag};
use crate::model::pgm::{write_bits_pgm, write_pgm16};
use crate::model::{DonnModel, Predictor};
use crate::seed::substream;

pub const ACTION_NAMES: [&str; 2] = ["left", "right"];
pub const DEFAULT_MAX_STEPS: usize = 200;

/// Reset seed of distillation episode `i`.
pub fn episode_seed(seed: u64, i: usize) -> u64 {
    substream(seed, &format!("distill{i}"))
}

/// Greedy teacher rollouts labeled with the teacher's action at every step.
pub fn distill(
    teacher: &QNet,
    episodes: usize,
    seed: u64,
    max_steps: usize,
    target_n: usize,
) -> Result<LabeledImageDataset> {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for i in 0..episodes {
        let mut state = env_reset(episode_seed(seed, i));
        for _ in 0..max_steps {
            let action = teacher.greedy(&state.to_array());
            images.push(state_to_image_sized(&state, target_n)?);
            labels.push(action);
            let step = env_step(&state, Action::from_index(action))?;
            if step.done {
                break;
            }
            state = step.state;
        }
    }
    let names = ACTION_NAMES.iter().map(|s| s.to_string()).collect();
    Ok(LabeledImageDataset::new(target_n, images, labels, names, SplitTag::All, seed)?)
}

/// Closed-loop record of a DONN-controlled episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// Steps taken before failure; equals `max_steps` when the pole never fell.
    pub survived: usize,
    /// State before each action.
    pub states: Vec<CartPoleState>,
    pub actions: Vec<Action>,
    pub images: Vec<Vec<u8>>,
    pub region_sums: Vec<Vec<f64>>,
    /// Camera intensity over the active window, kept only when requested.
    pub cameras: Vec<Vec<f64>>,
}

pub fn donn_rollout(model: &DonnModel, seed: u64, max_steps: usize, keep_cameras: bool) -> Result<Rollout> {
    if model.class_count() != 2 {
        return Err(RlError::Config(format!(
            "a cart-pole policy needs 2 classes, model has {}",
            model.class_count()
        )));
    }
    let predictor = Predictor::new(model)?;
    let g = *model.geometry();
    let target_n = g.active_n();
    let mut out = Rollout {
        survived: 0,
        states: Vec::new(),
        actions: Vec::new(),
        images: Vec::new(),
        region_sums: Vec::new(),
        cameras: Vec::new(),
    };
    let mut state = env_reset(seed);
    for t in 0..max_steps {
        let image = state_to_image_sized(&state, target_n)?;
        let camera = predictor.forward(&image)?;
        let action = Action::from_index(camera.predicted);
        if keep_cameras {
            let (n, a, off) = (g.grid_n(), g.active_n(), g.offset());
            out.cameras.push(
                (0..a * a)
                    .map(|i| camera.intensity[(off + i / a) * n + off + i % a])
                    .collect(),
            );
        }
        out.states.push(state);
        out.actions.push(action);
        out.images.push(image);
        out.region_sums.push(camera.region_sums);
        let step = env_step(&state, action)?;
        out.survived = t + 1;
        if step.done {
            out.survived = t;
            break;
        }
        state = step.state;
    }
    Ok(out)
}

/// Fraction of `data` on which the model picks the labeled (teacher) action.
pub fn action_agreement(model: &DonnModel, data: &LabeledImageDataset) -> Result<f64> {
    Ok(crate::train::evaluate(model, data)?.accuracy)
}

/// Mean survival of a uniformly random policy.
pub fn random_policy_baseline(episodes: usize, seed: u64, max_steps: usize) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let mut total = 0usize;
    for i in 0..episodes {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(substream(seed, &format!("random{i}")));
        let mut state = env_reset(substream(seed, &format!("baseline{i}")));
        for _ in 0..max_steps {
            let step = env_step(&state, Action::from_index(rng.gen_range(0..2)))?;
            if step.done {
                break;
            }
            total += 1;
            state = step.state;
        }
    }
    Ok(total as f64 / episodes.max(1) as f64)
}

/// Writes `rollout.csv` and four frame sequences: pendulum, input, camera and
/// detector readout.
pub fn export_rollout(rollout: &Rollout, side: usize, dir: &Path) -> Result<()> {
    let frames = dir.join("frames");
    fs::create_dir_all(&frames)?;
    let mut csv = String::from("step,x,theta,x_dot,theta_dot,action,region_sum_left,region_sum_right\n");
    for (t, (s, a)) in rollout.states.iter().zip(&rollout.actions).enumerate() {
        let sums = &rollout.region_sums[t];
        writeln!(
            csv,
            "{t},{},{},{},{},{},{},{}",
            s.x,
            s.theta,
            s.x_dot,
            s.theta_dot,
            ACTION_NAMES[a.index()],
            sums[0],
            sums[1]
        )
        .expect("write to string");
        let (w, h, pic) = render_pendulum(s);
        write_pgm16(frames.join(format!("pendulum_{t:04}.pgm")), w, h, &pic)?;
        write_bits_pgm(frames.join(format!("input_{t:04}.pgm")), side, &rollout.images[t])?;
        if let Some(cam) = rollout.cameras.get(t) {
            write_pgm16(frames.join(format!("camera_{t:04}.pgm")), side, side, cam)?;
        }
        let (w, h, bars) = render_readout(sums, a.index());
        write_pgm16(frames.join(format!("readout_{t:04}.pgm")), w, h, &bars)?;
    }
    fs::write(dir.join("rollout.csv"), csv)?;
    Ok(())
}

fn render_pendulum(s: &CartPoleState) -> (usize, usize, Vec<f64>) {
    let (w, h) = (240usize, 120usize);
    let mut img = vec![0.0; w * h];
    let mut put = |x: f64, y: f64, v: f64| {
        if x >= 0.0 && y >= 0.0 && (x as usize) < w && (y as usize) < h {
            img[y as usize * w + x as usize] = v;
        }
    };
    let ground = 100.0;
    for x in 0..w {
        put(x as f64, ground, 0.4);
    }
    let cx = (s.x + X_LIMIT) / (2.0 * X_LIMIT) * (w - 1) as f64;
    for dy in 0..10 {
        for dx in -10..=10 {
            put(cx + f64::from(dx), ground - 10.0 + f64::from(dy), 0.7);
        }
    }
    let len = 60.0;
    for k in 0..=120 {
        let r = len * f64::from(k) / 120.0;
        put(cx + r * s.theta.sin(), ground - 10.0 - r * s.theta.cos(), 1.0);
    }
    (w, h, img)
}

fn render_readout(sums: &[f64], chosen: usize) -> (usize, usize, Vec<f64>) {
    let (w, h) = (60usize, 100usize);
    let max = sums.iter().cloned().fold(0.0, f64::max);
    let mut img = vec![0.0; w * h];
    for (k, &s) in sums.iter().enumerate().take(2) {
        let height = if max > 0.0 { (s / max * (h - 10) as f64).round() as usize } else { 0 };
        let level = if k == chosen { 1.0 } else { 0.5 };
        for y in h - height..h {
            for x in 10 + 25 * k..25 + 25 * k {
                img[y * w + x] = level;
            }
        }
    }
    (w, h, img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::OpticalGeometry;

    fn toy_model(seed: u64) -> DonnModel {
        let g = OpticalGeometry::new(532e-9, 36e-6, 64, 40).unwrap();
        DonnModel::random(g, vec!["left".into(), "right".into()], 2, 0.05, seed).unwrap()
    }

    #[test]
    fn distill_counts_and_labels() {
        let teacher = QNet::new(16, 2);
        let data = distill(&teacher, 3, 7, 50, 40).unwrap();
        let expected: usize = (0..3)
            .map(|i| {
                let mut s = env_reset(episode_seed(7, i));
                let mut n = 0;
                for _ in 0..50 {
                    n += 1;
                    let st = env_step(&s, Action::from_index(teacher.greedy(&s.to_array()))).unwrap();
                    if st.done {
                        break;
                    }
                    s = st.state;
                }
                n
            })
            .sum();
        assert_eq!(data.len(), expected);
        assert!(data.labels().iter().all(|&l| l < 2));
        assert_eq!(data, distill(&teacher, 3, 7, 50, 40).unwrap());
    }

    #[test]
    fn rollout_honors_max_steps() {
        let m = toy_model(1);
        let r = donn_rollout(&m, 3, 5, true).unwrap();
        assert!(r.survived <= 5);
        assert!(r.states.len() <= 5);
        assert_eq!(r.cameras.len(), r.states.len());
        assert_eq!(r, donn_rollout(&m, 3, 5, true).unwrap());
    }

    #[test]
    fn export_writes_frames() {
        let m = toy_model(2);
        let r = donn_rollout(&m, 1, 3, true).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_rollout(&r, 40, dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("rollout.csv")).unwrap();
        assert_eq!(csv.lines().count(), r.states.len() + 1);
        for panel in ["pendulum", "input", "camera", "readout"] {
            let f = dir.path().join(format!("frames/{panel}_0000.pgm"));
            assert!(fs::read(f).unwrap().starts_with(b"P5\n"));
        }
    }

    #[test]
    fn random_baseline_is_short() {
        let b = random_policy_baseline(50, 0, 200).unwrap();
        assert!(b > 5.0 && b < 100.0, "{b}");
    }
}

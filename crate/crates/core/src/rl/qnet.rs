//! 4 → 64 → 64 → 2 ReLU network with manual backpropagation.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Result, RlError};

pub const INPUTS: usize = 4;
pub const OUTPUTS: usize = 2;
pub const QNET_FILE_VERSION: u64 = 1;

/// Flat parameter layout: w1 (h×4), b1, w2 (h×h), b2, w3 (2×h), b3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QNet {
    version: u64,
    hidden: usize,
    params: Vec<f64>,
}

/// Activations kept for the backward pass.
struct Cache {
    h1: Vec<f64>,
    h2: Vec<f64>,
}

fn param_count(h: usize) -> usize {
    h * INPUTS + h + h * h + h + OUTPUTS * h + OUTPUTS
}

impl QNet {
    /// Uniform ±1/√fan_in initialization.
    pub fn new(hidden: usize, seed: u64) -> QNet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(hidden));
        for (fan_in, count) in [
            (INPUTS, hidden * INPUTS + hidden),
            (hidden, hidden * hidden + hidden),
            (hidden, OUTPUTS * hidden + OUTPUTS),
        ] {
            let bound = 1.0 / (fan_in as f64).sqrt();
            params.extend((0..count).map(|_| rng.gen_range(-bound..bound)));
        }
        QNet {
            version: QNET_FILE_VERSION,
            hidden,
            params,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> [usize; 6] {
        let h = self.hidden;
        let w1 = 0;
        let b1 = w1 + h * INPUTS;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let w3 = b2 + h;
        let b3 = w3 + OUTPUTS * h;
        [w1, b1, w2, b2, w3, b3]
    }

    fn forward_cached(&self, x: &[f64; INPUTS]) -> ([f64; OUTPUTS], Cache) {
        let h = self.hidden;
        let p = &self.params;
        let [w1, b1, w2, b2, w3, b3] = self.offsets();
        let h1: Vec<f64> = (0..h)
            .map(|i| {
                let z = p[b1 + i] + (0..INPUTS).map(|j| p[w1 + i * INPUTS + j] * x[j]).sum::<f64>();
                z.max(0.0)
            })
            .collect();
        let h2: Vec<f64> = (0..h)
            .map(|i| {
                let row = &p[w2 + i * h..w2 + (i + 1) * h];
                let z = p[b2 + i] + row.iter().zip(&h1).map(|(w, a)| w * a).sum::<f64>();
                z.max(0.0)
            })
            .collect();
        let mut q = [0.0; OUTPUTS];
        for (k, qk) in q.iter_mut().enumerate() {
            let row = &p[w3 + k * h..w3 + (k + 1) * h];
            *qk = p[b3 + k] + row.iter().zip(&h2).map(|(w, a)| w * a).sum::<f64>();
        }
        (q, Cache { h1, h2 })
    }

    pub fn q_values(&self, state: &[f64; INPUTS]) -> [f64; OUTPUTS] {
        self.forward_cached(state).0
    }

    /// Greedy action; ties go to the lower index.
    pub fn greedy(&self, state: &[f64; INPUTS]) -> usize {
        let q = self.q_values(state);
        usize::from(q[1] > q[0])
    }

    /// Adds dL/dθ for one sample with output gradient `dq` into `grad`.
    fn backward(&self, x: &[f64; INPUTS], cache: &Cache, dq: &[f64; OUTPUTS], grad: &mut [f64]) {
        let h = self.hidden;
        let p = &self.params;
        let [w1, b1, w2, b2, w3, b3] = self.offsets();
        let mut d2 = vec![0.0; h];
        for k in 0..OUTPUTS {
            if dq[k] == 0.0 {
                continue;
            }
            grad[b3 + k] += dq[k];
            for i in 0..h {
                grad[w3 + k * h + i] += dq[k] * cache.h2[i];
                d2[i] += dq[k] * p[w3 + k * h + i];
            }
        }
        let mut d1 = vec![0.0; h];
        for i in 0..h {
            if cache.h2[i] <= 0.0 {
                continue;
            }
            let g = d2[i];
            grad[b2 + i] += g;
            for j in 0..h {
                grad[w2 + i * h + j] += g * cache.h1[j];
                d1[j] += g * p[w2 + i * h + j];
            }
        }
        for i in 0..h {
            if cache.h1[i] <= 0.0 {
                continue;
            }
            grad[b1 + i] += d1[i];
            for j in 0..INPUTS {
                grad[w1 + i * INPUTS + j] += d1[i] * x[j];
            }
        }
    }

    /// Mean Huber loss of Q(s, a) against `targets`, and its parameter gradient.
    pub fn td_loss_grad(&self, states: &[[f64; INPUTS]], actions: &[usize], targets: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let n = states.len() as f64;
        let mut loss = 0.0;
        for ((s, &a), &t) in states.iter().zip(actions).zip(targets) {
            let (q, cache) = self.forward_cached(s);
            let err = q[a] - t;
            let (l, g) = if err.abs() <= 1.0 {
                (0.5 * err * err, err)
            } else {
                (err.abs() - 0.5, err.signum())
            };
            loss += l / n;
            let mut dq = [0.0; OUTPUTS];
            dq[a] = g / n;
            self.backward(s, &cache, &dq, &mut grad);
        }
        (loss, grad)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<QNet> {
        let net: QNet = serde_json::from_str(text).map_err(|e| RlError::Malformed(e.to_string()))?;
        if net.version != QNET_FILE_VERSION {
            return Err(RlError::Malformed(format!("unsupported network version {}", net.version)));
        }
        if net.hidden == 0 || net.params.len() != param_count(net.hidden) {
            return Err(RlError::Malformed(format!(
                "{} parameters do not fit hidden width {}",
                net.params.len(),
                net.hidden
            )));
        }
        if net.params.iter().any(|p| !p.is_finite()) {
            return Err(RlError::Malformed("non-finite weight".into()));
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<QNet> {
        QNet::from_json(&std::fs::read_to_string(path)?)
    }
}

/// r + γ·max Q(s′) unless the episode ended.
pub fn bellman_target(reward: f64, next_q_max: f64, done: bool, gamma: f64) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * next_q_max
    }
}

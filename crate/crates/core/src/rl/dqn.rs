//! Deep Q-learning teacher.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cartpole::{env_reset, env_step, Action, CartPoleState};
use super::qnet::{bellman_target, QNet};
use super::{Result, RlError};
use crate::seed::substream;
use crate::train::Adam;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Exponential decay constant, in environment steps.
    pub epsilon_decay: f64,
    /// Optimizer steps between target-network copies.
    pub target_sync: usize,
    pub learning_rate: f64,
    pub hidden: usize,
    /// Transitions collected before the first update.
    pub learning_starts: usize,
    pub max_episodes: usize,
    pub goal_steps: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            replay_capacity: 10_000,
            batch_size: 64,
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay: 1000.0,
            target_sync: 200,
            learning_rate: 1e-3,
            hidden: 64,
            learning_starts: 64,
            max_episodes: 600,
            goal_steps: 200,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(RlError::Config(m.to_string()));
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("replay capacity must hold at least one batch");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon bounds must lie in [0, 1]");
        }
        if !(self.epsilon_decay > 0.0) || !(self.learning_rate > 0.0) {
            return bad("epsilon decay and learning rate must be positive");
        }
        if self.target_sync == 0 || self.hidden == 0 || self.max_episodes == 0 || self.goal_steps == 0 {
            return bad("target sync, hidden width, episode and goal counts must be positive");
        }
        Ok(())
    }

    pub fn epsilon(&self, steps: usize) -> f64 {
        self.epsilon_end
            + (self.epsilon_start - self.epsilon_end) * (-(steps as f64) / self.epsilon_decay).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: CartPoleState,
    pub action: Action,
    pub reward: f64,
    pub next_state: CartPoleState,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnReport {
    /// Training (ε-greedy) episode lengths.
    pub episode_lengths: Vec<usize>,
    /// Greedy evaluation length after each training episode.
    pub greedy_lengths: Vec<usize>,
    pub optimizer_steps: usize,
    pub converged: bool,
}

/// Steps a greedy policy survives from `start`, capped at `max_steps`.
pub fn greedy_episode(net: &QNet, start: CartPoleState, max_steps: usize) -> Result<usize> {
    let mut state = start;
    for t in 0..max_steps {
        let step = env_step(&state, Action::from_index(net.greedy(&state.to_array())))?;
        if step.done {
            return Ok(t);
        }
        state = step.state;
    }
    Ok(max_steps)
}

/// Trains until a greedy episode from `env_reset(seed)` lasts `goal_steps`.
/// Returns the network and report either way; check `report.converged` or use
/// [`dqn_train`] for the strict form.
pub fn dqn_train_report(config: &DqnConfig, seed: u64) -> Result<(QNet, DqnReport)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, "rl"));
    let mut online = QNet::new(config.hidden, substream(seed, "rl-init"));
    let mut target = online.clone();
    let mut adam = Adam::new(online.params().len(), config.learning_rate, 0.9, 0.999, 1e-8);
    let mut replay: VecDeque<Transition> = VecDeque::with_capacity(config.replay_capacity);
    let eval_start = env_reset(seed);
    let mut report = DqnReport {
        episode_lengths: Vec::new(),
        greedy_lengths: Vec::new(),
        optimizer_steps: 0,
        converged: false,
    };
    let mut env_steps = 0usize;
    for episode in 0..config.max_episodes {
        let mut state = env_reset(substream(seed, &format!("episode{episode}")));
        let mut length = 0;
        for _ in 0..config.goal_steps {
            let action = if rng.gen::<f64>() < config.epsilon(env_steps) {
                Action::from_index(rng.gen_range(0..2))
            } else {
                Action::from_index(online.greedy(&state.to_array()))
            };
            let step = env_step(&state, action)?;
            if replay.len() == config.replay_capacity {
                replay.pop_front();
            }
            replay.push_back(Transition {
                state,
                action,
                reward: step.reward,
                next_state: step.state,
                done: step.done,
            });
            env_steps += 1;
            length += 1;
            if replay.len() >= config.learning_starts.max(config.batch_size) {
                let batch: Vec<&Transition> = (0..config.batch_size)
                    .map(|_| &replay[rng.gen_range(0..replay.len())])
                    .collect();
                let states: Vec<[f64; 4]> = batch.iter().map(|t| t.state.to_array()).collect();
                let actions: Vec<usize> = batch.iter().map(|t| t.action.index()).collect();
                let targets: Vec<f64> = batch
                    .iter()
                    .map(|t| {
                        let q = target.q_values(&t.next_state.to_array());
                        bellman_target(t.reward, q[0].max(q[1]), t.done, config.gamma)
                    })
                    .collect();
                let (_, grad) = online.td_loss_grad(&states, &actions, &targets);
                adam.step_slice(online.params_mut(), &grad);
                report.optimizer_steps += 1;
                if report.optimizer_steps.is_multiple_of(config.target_sync) {
                    target = online.clone();
                }
            }
            if step.done {
                break;
            }
            state = step.state;
        }
        report.episode_lengths.push(length);
        let greedy = greedy_episode(&online, eval_start, config.goal_steps)?;
        report.greedy_lengths.push(greedy);
        if greedy >= config.goal_steps {
            report.converged = true;
            break;
        }
    }
    Ok((online, report))
}

/// Like [`dqn_train_report`] but failing when the goal is never reached.
pub fn dqn_train(config: &DqnConfig, seed: u64) -> Result<(QNet, DqnReport)> {
    let (net, report) = dqn_train_report(config, seed)?;
    if !report.converged {
        return Err(RlError::NotConverged {
            episodes: report.episode_lengths.len(),
            best: report.greedy_lengths.iter().copied().max().unwrap_or(0),
        });
    }
    Ok((net, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_schedule() {
        let c = DqnConfig::default();
        assert_eq!(c.epsilon(0), 1.0);
        assert!((c.epsilon(1000) - (0.05 + 0.95 * (-1.0f64).exp())).abs() < 1e-15);
        assert!(c.epsilon(100_000) - 0.05 < 1e-12);
    }

    #[test]
    fn short_runs_are_deterministic() {
        let c = DqnConfig {
            max_episodes: 8,
            learning_starts: 64,
            ..DqnConfig::default()
        };
        let a = dqn_train_report(&c, 5).unwrap();
        let b = dqn_train_report(&c, 5).unwrap();
        assert_eq!(a.1, b.1);
        assert_eq!(a.0, b.0);
        assert!(a.1.optimizer_steps > 0);
    }

    #[test]
    fn strict_form_reports_failure() {
        let c = DqnConfig {
            max_episodes: 1,
            ..DqnConfig::default()
        };
        assert!(matches!(dqn_train(&c, 1), Err(RlError::NotConverged { episodes: 1, .. })));
    }

    #[test]
    fn rejects_bad_config() {
        let c = DqnConfig {
            gamma: 1.5,
            ..DqnConfig::default()
        };
        assert!(c.validate().is_err());
    }
}

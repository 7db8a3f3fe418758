//! Cart-pole control: environment, DQN teacher, distillation into a DONN and
//! closed-loop rollout.

pub mod cartpole;
pub mod dqn;
pub mod policy;
pub mod qnet;

use thiserror::Error;

use crate::data::DataError;
use crate::encode::EncodeError;
use crate::model::ModelError;

pub use cartpole::{env_reset, env_step, state_to_image, Action, CartPoleState, Step};
pub use dqn::{dqn_train, dqn_train_report, DqnConfig, DqnReport};
pub use policy::{distill, donn_rollout, export_rollout, Rollout};
pub use qnet::QNet;

#[derive(Debug, Error)]
pub enum RlError {
    #[error("cart-pole state is not finite")]
    NonFinite,
    #[error("teacher did not reach the goal within {episodes} episodes (best greedy run {best} steps)")]
    NotConverged { episodes: usize, best: usize },
    #[error("invalid reinforcement-learning config: {0}")]
    Config(String),
    #[error("malformed network file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] crate::train::TrainError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RlError>;

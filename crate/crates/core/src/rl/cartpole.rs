//! Cart-pole dynamics and the state → image encoding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Result, RlError};
use crate::encode::{
    encode_record, EncoderConfig, FeatureDescriptor, FeatureSchema, FieldValue, Normalization,
};
use crate::seed::substream;

pub const GRAVITY: f64 = 9.8;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
pub const TOTAL_MASS: f64 = CART_MASS + POLE_MASS;
/// Half the pole length.
pub const POLE_HALF_LENGTH: f64 = 0.5;
pub const FORCE: f64 = 10.0;
pub const TAU: f64 = 0.02;
pub const X_LIMIT: f64 = 4.8;
pub const THETA_LIMIT: f64 = 0.418;
pub const STATE_BINS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartPoleState {
    pub x: f64,
    pub theta: f64,
    pub x_dot: f64,
    pub theta_dot: f64,
}

impl CartPoleState {
    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.theta, self.x_dot, self.theta_dot]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Outside the live region.
    pub fn failed(&self) -> bool {
        self.x.abs() > X_LIMIT || self.theta.abs() > THETA_LIMIT
    }
}

impl std::ops::Neg for CartPoleState {
    type Output = CartPoleState;

    fn neg(self) -> CartPoleState {
        CartPoleState {
            x: -self.x,
            theta: -self.theta,
            x_dot: -self.x_dot,
            theta_dot: -self.theta_dot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Left,
    Right,
}

impl Action {
    pub fn index(self) -> usize {
        match self {
            Action::Left => 0,
            Action::Right => 1,
        }
    }

    pub fn from_index(i: usize) -> Action {
        if i == 0 {
            Action::Left
        } else {
            Action::Right
        }
    }

    pub fn force(self) -> f64 {
        match self {
            Action::Left => -FORCE,
            Action::Right => FORCE,
        }
    }

    pub fn flipped(self) -> Action {
        match self {
            Action::Left => Action::Right,
            Action::Right => Action::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: CartPoleState,
    pub reward: f64,
    pub done: bool,
}

/// Every component uniform in [−0.05, 0.05].
pub fn env_reset(seed: u64) -> CartPoleState {
    let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, "reset"));
    let mut draw = || rng.gen_range(-0.05..=0.05);
    CartPoleState {
        x: draw(),
        theta: draw(),
        x_dot: draw(),
        theta_dot: draw(),
    }
}

/// Second derivatives (ẍ, θ̈) under force `f`.
pub fn accelerations(s: &CartPoleState, f: f64) -> (f64, f64) {
    let (sin, cos) = s.theta.sin_cos();
    let temp = (f + POLE_MASS * POLE_HALF_LENGTH * s.theta_dot * s.theta_dot * sin) / TOTAL_MASS;
    let theta_acc = (GRAVITY * sin - cos * temp)
        / (POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / TOTAL_MASS));
    let x_acc = temp - POLE_MASS * POLE_HALF_LENGTH * theta_acc * cos / TOTAL_MASS;
    (x_acc, theta_acc)
}

/// One explicit-Euler step of length [`TAU`].
pub fn env_step(state: &CartPoleState, action: Action) -> Result<Step> {
    if !state.is_finite() {
        return Err(RlError::NonFinite);
    }
    let (x_acc, theta_acc) = accelerations(state, action.force());
    let next = CartPoleState {
        x: state.x + TAU * state.x_dot,
        x_dot: state.x_dot + TAU * x_acc,
        theta: state.theta + TAU * state.theta_dot,
        theta_dot: state.theta_dot + TAU * theta_acc,
    };
    if !next.is_finite() {
        return Err(RlError::NonFinite);
    }
    Ok(Step {
        state: next,
        reward: 1.0,
        done: next.failed(),
    })
}

/// Four 25-bin features: x and θ linear over the live region, the velocities
/// through a sigmoid.
pub fn state_schema() -> FeatureSchema {
    let linear = |name: &str, limit: f64| FeatureDescriptor::Discretized {
        name: name.into(),
        min: -limit,
        max: limit,
        bins: STATE_BINS,
        normalization: Normalization::Linear,
    };
    let sigmoid = |name: &str| FeatureDescriptor::Discretized {
        name: name.into(),
        min: 0.0,
        max: 1.0,
        bins: STATE_BINS,
        normalization: Normalization::Sigmoid,
    };
    FeatureSchema::new(vec![
        linear("x", X_LIMIT),
        linear("theta", THETA_LIMIT),
        sigmoid("x_dot"),
        sigmoid("theta_dot"),
    ])
    .expect("valid cart-pole schema")
}

fn state_record(state: &CartPoleState) -> Vec<FieldValue> {
    // terminal states sit just past the limits; pin them to the edge bins
    vec![
        FieldValue::Number(state.x.clamp(-X_LIMIT, X_LIMIT)),
        FieldValue::Number(state.theta.clamp(-THETA_LIMIT, THETA_LIMIT)),
        FieldValue::Number(state.x_dot),
        FieldValue::Number(state.theta_dot),
    ]
}

/// Length-100 one-hot vector before reshaping.
pub fn state_one_hot(state: &CartPoleState) -> Result<Vec<u8>> {
    Ok(crate::encode::one_hot_encode(&state_record(state), &state_schema())?)
}

/// Binary `target_n × target_n` input image.
pub fn state_to_image_sized(state: &CartPoleState, target_n: usize) -> Result<Vec<u8>> {
    if !state.is_finite() {
        return Err(RlError::NonFinite);
    }
    let config = EncoderConfig {
        target_n,
        ..EncoderConfig::cartpole()
    };
    Ok(encode_record(&state_record(state), &state_schema(), &config)?)
}

/// Binary 100×100 input image.
pub fn state_to_image(state: &CartPoleState) -> Result<Vec<u8>> {
    state_to_image_sized(state, EncoderConfig::cartpole().target_n)
}

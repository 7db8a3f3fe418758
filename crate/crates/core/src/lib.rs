//! Simulation, training and task toolkit for reconfigurable diffractive optical
//! neural networks.
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN too

pub mod app;
pub mod data;
pub mod encode;
pub mod model;
pub mod optics;
pub mod rl;
pub mod seed;
pub mod train;

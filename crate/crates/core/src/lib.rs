//! Adaptive state observers for linear time-invariant plants whose scalar
//! output is corrupted by a bounded disturbance.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod num;
pub mod observers;
pub mod plant;
pub mod regression;
pub mod robust;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix64 = num::Matrix<f64>;
pub type Signal64 = num::Signal<f64>;
pub type Trajectory64 = num::Trajectory<f64>;
pub type TimeGrid64 = num::TimeGrid<f64>;
pub type LtiPlant64 = plant::LtiPlant<f64>;

pub type Matrix32 = num::Matrix<f32>;
pub type Signal32 = num::Signal<f32>;
pub type Trajectory32 = num::Trajectory<f32>;
pub type TimeGrid32 = num::TimeGrid<f32>;
pub type LtiPlant32 = plant::LtiPlant<f32>;

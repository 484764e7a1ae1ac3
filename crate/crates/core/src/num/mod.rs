//! Dense linear algebra, sampled signals and RK4 integration shared by the
//! estimation modules.

mod matrix;
mod ode;
mod signal;

pub(crate) use matrix::dot;
pub use matrix::Matrix;
pub use ode::{integrate, integrate_driven, rk4_step};
pub use signal::{Interpolation, Signal, TimeGrid, Trajectory};

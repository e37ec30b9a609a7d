//! Simulation and grey-box identification of a three-wheeled
//! omnidirectional robot.
//!
//! The pipeline mirrors a bench calibration: fit motor friction from
//! steady-state voltage/speed samples, then fit the wheel controller gains and
//! the body's yaw inertia so the simulated response matches a logged one.

// `!(x > 0.0)` is how validation rejects NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// 3-vector loops index several arrays in step
#![allow(clippy::needless_range_loop)]

pub mod actuation;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod io;
pub mod kinematics;
pub mod signals;

pub use actuation::{AccelLimiter, EncoderModel, MotorParams, MotorState, PidGains, PidState};
pub use config::ConfigDocument;
pub use dynamics::{BodyParams, Robot, RobotState, SimConfig, SimOutput};
pub use error::{Error, Result};
pub use kinematics::{BodyVelocity, Pose, RobotGeometry, WheelSpeeds};
pub use signals::{ExcitationProfile, LogRow, ResponseLog, ResponseSignal, Segment};

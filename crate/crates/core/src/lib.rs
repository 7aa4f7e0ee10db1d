//! Simulation and stability analysis for differential-drive robots whose
//! wheels slip.
//!
//! Longitudinal slip scales each wheel's effective speed by an unknown
//! parameter `a >= 1`; lateral slip skews the body velocity sideways. The
//! crate models that kinematics, provides a tracking controller that
//! estimates the slip parameters online, and offers the analysis tools that
//! go with it:
//!
//! - [`kinematics`]: poses, body/wheel velocity maps, slip state.
//! - [`slip`]: built-in and table-driven slip profiles over time.
//! - [`reference`]: the built-in reference trajectory and its inputs.
//! - [`controller`]: control law, estimate update rule, Lyapunov functions.
//! - [`error_dynamics`]: the closed-loop error field and its decomposition
//!   into nominal, vanishing, and non-vanishing parts.
//! - [`simulator`]: fixed-step RK4 closed-loop runs with full-precision
//!   CSV logs.
//! - [`stability`]: frozen-time linearization, closed-form characteristic
//!   polynomial, determinant-free stability certificate, time scans.
//! - [`tuning`]: tracking-cost functional and gain grid search.
//!
//! Everything is deterministic: the same configuration produces
//! byte-identical outputs regardless of thread count.

pub mod controller;
pub mod error;
pub mod error_dynamics;
pub mod kinematics;
pub mod reference;
pub mod simulator;
pub mod slip;
pub mod stability;
pub mod tuning;
mod util;

pub use controller::{ControllerGains, PoseError, SlipEstimates};
pub use error::{Error, Result};
pub use error_dynamics::AugmentedError;
pub use kinematics::{BodyVelocity, RobotGeometry, RobotPose, SlipState, WheelSpeeds};
pub use reference::{ReferenceInput, ReferenceTrajectory};
pub use simulator::{ControllerMode, SimulationConfig, TrajectoryLog};
pub use slip::{SlipProfile, SlipTable};
pub use stability::{FrozenParams, Quintic, StabilityVerdict};
pub use tuning::{TuningResult, TuningSpec};
pub use util::fmt_float;

//! Differential-drive kinematics under wheel slip.
//!
//! Longitudinal slip enters through per-wheel parameters `a = 1/(1 - i) >= 1`
//! (`i` is the slip factor), which scale the wheel-to-body velocity map.
//! Lateral slip enters through `sigma = tan(alpha)`, which skews the heading
//! direction of the platform velocity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wheel spacing `b` and wheel radius `r`, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotGeometry {
    pub wheel_spacing: f64,
    pub wheel_radius: f64,
}

impl RobotGeometry {
    pub fn new(wheel_spacing: f64, wheel_radius: f64) -> Result<Self> {
        let geom = RobotGeometry {
            wheel_spacing,
            wheel_radius,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wheel_spacing.is_finite() && self.wheel_spacing > 0.0) {
            return Err(Error::domain(format!(
                "wheel_spacing = {} must be finite and > 0",
                self.wheel_spacing
            )));
        }
        if !(self.wheel_radius.is_finite() && self.wheel_radius > 0.0) {
            return Err(Error::domain(format!(
                "wheel_radius = {} must be finite and > 0",
                self.wheel_radius
            )));
        }
        Ok(())
    }
}

/// Geometry of the simulated platform.
impl Default for RobotGeometry {
    fn default() -> Self {
        RobotGeometry {
            wheel_spacing: 0.1624,
            wheel_radius: 0.0825,
        }
    }
}

/// Planar pose (x, y, theta). Heading is kept unwrapped: integrators and
/// error signals rely on `theta` being continuous in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Body-frame velocity input: forward speed `v_x` and yaw rate `omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyVelocity {
    pub v_x: f64,
    pub omega: f64,
}

/// Angular wheel speeds (left, right), in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelSpeeds {
    pub omega_l: f64,
    pub omega_r: f64,
}

/// Instantaneous slip condition: longitudinal parameters `a_l, a_r >= 1`,
/// lateral parameter `sigma = tan(alpha)`, and the time derivatives of the
/// longitudinal parameters (zero for frozen or stepwise-constant slip).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipState {
    pub a_l: f64,
    pub a_r: f64,
    pub sigma: f64,
    pub a_l_dot: f64,
    pub a_r_dot: f64,
}

impl SlipState {
    pub fn new(a_l: f64, a_r: f64, sigma: f64, a_l_dot: f64, a_r_dot: f64) -> Result<Self> {
        let slip = SlipState {
            a_l,
            a_r,
            sigma,
            a_l_dot,
            a_r_dot,
        };
        slip.validate()?;
        Ok(slip)
    }

    /// Frozen slip with no lateral component.
    pub fn constant(a_l: f64, a_r: f64) -> Result<Self> {
        SlipState::new(a_l, a_r, 0.0, 0.0, 0.0)
    }

    /// The no-slip condition `a_l = a_r = 1`, `sigma = 0`.
    pub fn ideal() -> Self {
        SlipState {
            a_l: 1.0,
            a_r: 1.0,
            sigma: 0.0,
            a_l_dot: 0.0,
            a_r_dot: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("a_l", self.a_l), ("a_r", self.a_r)] {
            if !(value.is_finite() && value >= 1.0) {
                return Err(Error::domain(format!(
                    "slip parameter {name} = {value} must be finite and >= 1"
                )));
            }
        }
        for (name, value) in [
            ("sigma", self.sigma),
            ("a_l_dot", self.a_l_dot),
            ("a_r_dot", self.a_r_dot),
        ] {
            if !value.is_finite() {
                return Err(Error::domain(format!("{name} = {value} must be finite")));
            }
        }
        Ok(())
    }
}

/// Time derivative of a pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseRate {
    pub x_dot: f64,
    pub y_dot: f64,
    pub theta_dot: f64,
}

/// Ideal unicycle kinematics: `(v cos(theta), v sin(theta), omega)`.
pub fn pose_rate_no_slip(q: &RobotPose, eta: &BodyVelocity) -> PoseRate {
    let (sin_t, cos_t) = q.theta.sin_cos();
    PoseRate {
        x_dot: eta.v_x * cos_t,
        y_dot: eta.v_x * sin_t,
        theta_dot: eta.omega,
    }
}

/// Unicycle kinematics skewed by lateral slip:
/// `x_dot = v (cos(theta) + sigma sin(theta))`,
/// `y_dot = v (sin(theta) - sigma cos(theta))`,
/// `theta_dot = omega`.
///
/// The planar speed satisfies `x_dot^2 + y_dot^2 = v^2 (1 + sigma^2)`.
pub fn pose_rate_with_lateral_slip(q: &RobotPose, eta: &BodyVelocity, sigma: f64) -> PoseRate {
    let (sin_t, cos_t) = q.theta.sin_cos();
    PoseRate {
        x_dot: eta.v_x * (cos_t + sigma * sin_t),
        y_dot: eta.v_x * (sin_t - sigma * cos_t),
        theta_dot: eta.omega,
    }
}

/// Body velocity realized by wheel speeds under longitudinal slip:
/// `v_x = (r/2)(omega_l/a_l + omega_r/a_r)`,
/// `omega = (r/b)(omega_r/a_r - omega_l/a_l)`.
pub fn wheel_to_body(
    xi: &WheelSpeeds,
    slip: &SlipState,
    geom: &RobotGeometry,
) -> Result<BodyVelocity> {
    if !(slip.a_l >= 1.0 && slip.a_r >= 1.0) {
        return Err(Error::domain(format!(
            "wheel_to_body requires physical slip parameters >= 1, got a_l = {}, a_r = {}",
            slip.a_l, slip.a_r
        )));
    }
    let r = geom.wheel_radius;
    let b = geom.wheel_spacing;
    let left = xi.omega_l / slip.a_l;
    let right = xi.omega_r / slip.a_r;
    Ok(BodyVelocity {
        v_x: 0.5 * r * (left + right),
        omega: (r / b) * (right - left),
    })
}

/// Wheel speeds that realize a commanded body velocity for given (or
/// estimated) slip parameters:
/// `omega_l = a_l (2 v_x - b omega) / (2r)`,
/// `omega_r = a_r (2 v_x + b omega) / (2r)`.
///
/// Exact inverse of [`wheel_to_body`]. Accepts any positive `a_l`, `a_r`:
/// adaptive estimates may transiently sit below 1 and remain valid inputs,
/// while non-positive values would make the map singular or direction-flipping.
pub fn body_to_wheel(
    eta: &BodyVelocity,
    a_l: f64,
    a_r: f64,
    geom: &RobotGeometry,
) -> Result<WheelSpeeds> {
    for (name, value) in [("a_l", a_l), ("a_r", a_r)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::domain(format!(
                "body_to_wheel requires {name} > 0, got {value}"
            )));
        }
    }
    Ok(wheel_command(eta, a_l, a_r, geom))
}

/// Unchecked body-to-wheel map for the integration hot path, where estimate
/// positivity is maintained by the integrator's projection step.
pub(crate) fn wheel_command(
    eta: &BodyVelocity,
    a_l: f64,
    a_r: f64,
    geom: &RobotGeometry,
) -> WheelSpeeds {
    let two_r = 2.0 * geom.wheel_radius;
    let b_omega = geom.wheel_spacing * eta.omega;
    WheelSpeeds {
        omega_l: a_l * (2.0 * eta.v_x - b_omega) / two_r,
        omega_r: a_r * (2.0 * eta.v_x + b_omega) / two_r,
    }
}

/// Longitudinal slip parameter `a = 1/(1 - i)` from a slip factor `i` in
/// `[0, 1)`.
pub fn slip_factor_to_parameter(i: f64) -> Result<f64> {
    if !(i.is_finite() && (0.0..1.0).contains(&i)) {
        return Err(Error::domain(format!(
            "slip factor i = {i} must lie in [0, 1)"
        )));
    }
    Ok(1.0 / (1.0 - i))
}

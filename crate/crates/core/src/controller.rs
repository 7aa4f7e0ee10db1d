//! Tracking controller with per-wheel adaptation of longitudinal slip.
//!
//! The command is computed in body-frame error coordinates. The turn-rate
//! command must be evaluated before the speed command, which consumes it.
//! Slip estimates evolve by a gradient-style update driven by the same error
//! signals; setting both adaptation gains to zero turns adaptation off.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_dynamics::AugmentedError;
use crate::kinematics::{body_to_wheel, BodyVelocity, RobotGeometry, RobotPose, WheelSpeeds};

/// Tracking gains `k1, k2, k3` (strictly positive) and adaptation gains
/// `gamma1, gamma2` (non-negative; zero disables adaptation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerGains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl ControllerGains {
    pub fn new(k1: f64, k2: f64, k3: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        let gains = ControllerGains {
            k1,
            k2,
            k3,
            gamma1,
            gamma2,
        };
        gains.validate()?;
        Ok(gains)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("k1", self.k1), ("k2", self.k2), ("k3", self.k3)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::domain(format!(
                    "gain {name} = {value} must be finite and > 0"
                )));
            }
        }
        for (name, value) in [("gamma1", self.gamma1), ("gamma2", self.gamma2)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::domain(format!(
                    "adaptation gain {name} = {value} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }

    /// Combined gain `k4 = 1 + k2 k3^2`.
    pub fn k4(&self) -> f64 {
        1.0 + self.k2 * self.k3 * self.k3
    }
}

/// Body-frame pose error `(e1, e2, e3)`: longitudinal, lateral, heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseError {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
}

impl PoseError {
    pub fn norm(&self) -> f64 {
        (self.e1 * self.e1 + self.e2 * self.e2 + self.e3 * self.e3).sqrt()
    }
}

/// Current estimates of the longitudinal slip parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlipEstimates {
    pub a_l_hat: f64,
    pub a_r_hat: f64,
}

impl SlipEstimates {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("a_l_hat", self.a_l_hat), ("a_r_hat", self.a_r_hat)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::domain(format!(
                    "slip estimate {name} = {value} must be finite and > 0"
                )));
            }
        }
        Ok(())
    }
}

/// Reference-pose error expressed in the platform's body frame:
/// `e1 = cos(theta_p) dx + sin(theta_p) dy`,
/// `e2 = -sin(theta_p) dx + cos(theta_p) dy`,
/// `e3 = theta_ref - theta_p`,
/// with `(dx, dy) = (x_ref - x_p, y_ref - y_p)`.
///
/// The heading difference is taken raw: both headings are unwrapped, and the
/// control law depends on `e3` itself, not on a wrapped representative.
pub fn pose_error(q_ref: &RobotPose, q_p: &RobotPose) -> PoseError {
    let dx = q_ref.x - q_p.x;
    let dy = q_ref.y - q_p.y;
    let (sin_t, cos_t) = q_p.theta.sin_cos();
    PoseError {
        e1: cos_t * dx + sin_t * dy,
        e2: -sin_t * dx + cos_t * dy,
        e3: q_ref.theta - q_p.theta,
    }
}

/// Inverse of [`pose_error`]: the platform pose that produces error `e`
/// against reference pose `q_ref`.
pub fn pose_from_error(q_ref: &RobotPose, e: &PoseError) -> RobotPose {
    let theta_p = q_ref.theta - e.e3;
    let (sin_t, cos_t) = theta_p.sin_cos();
    RobotPose {
        x: q_ref.x - (cos_t * e.e1 - sin_t * e.e2),
        y: q_ref.y - (sin_t * e.e1 + cos_t * e.e2),
        theta: theta_p,
    }
}

/// Velocity command:
/// `omega_c = omega_ref + (v_ref/2) (k2 (e2 + k3 e3) + sin(e3)/k3)`,
/// `v_c = v_ref cos(e3) - k3 e3 omega_c + k1 e1`.
///
/// `omega_c` is computed first; the speed command uses it.
pub fn control_law(
    e: &PoseError,
    eta_ref: &BodyVelocity,
    gains: &ControllerGains,
) -> BodyVelocity {
    let omega_c = eta_ref.omega
        + 0.5
            * eta_ref.v_x
            * (gains.k2 * (e.e2 + gains.k3 * e.e3) + e.e3.sin() / gains.k3);
    let v_c = eta_ref.v_x * e.e3.cos() - gains.k3 * e.e3 * omega_c + gains.k1 * e.e1;
    BodyVelocity { v_x: v_c, omega: omega_c }
}

/// Slip-estimate update driven by the commanded per-side speeds
/// `Omega1 = v_c + (b/2) omega_c` (right) and `Omega2 = v_c - (b/2) omega_c`
/// (left):
///
/// `d/dt a_l_hat = gamma1 Omega2 [ (e2/b + 1/2) e1
///     - ((e1 + k3)/b)(e2 + k3 e3) - sin(e3)/(b k2) ]`
/// `d/dt a_r_hat = gamma2 Omega1 [ -(e2/b - 1/2) e1
///     + ((e1 + k3)/b)(e2 + k3 e3) + sin(e3)/(b k2) ]`
///
/// Each rate is linear in its adaptation gain.
pub fn update_rule(
    e: &PoseError,
    eta_c: &BodyVelocity,
    gains: &ControllerGains,
    geom: &RobotGeometry,
) -> (f64, f64) {
    let b = geom.wheel_spacing;
    let half_b_omega = 0.5 * b * eta_c.omega;
    let omega1 = eta_c.v_x + half_b_omega;
    let omega2 = eta_c.v_x - half_b_omega;
    let combined = e.e2 + gains.k3 * e.e3;
    let shared = (e.e1 + gains.k3) / b * combined + e.e3.sin() / (b * gains.k2);
    let a_l_hat_dot = gains.gamma1 * omega2 * ((e.e2 / b + 0.5) * e.e1 - shared);
    let a_r_hat_dot = gains.gamma2 * omega1 * (-(e.e2 / b - 0.5) * e.e1 + shared);
    (a_l_hat_dot, a_r_hat_dot)
}

/// Wheel-speed command realizing `eta_c` under the current slip estimates.
pub fn effective_input(
    eta_c: &BodyVelocity,
    estimates: &SlipEstimates,
    geom: &RobotGeometry,
) -> Result<WheelSpeeds> {
    body_to_wheel(eta_c, estimates.a_l_hat, estimates.a_r_hat, geom)
}

/// Tracking Lyapunov function
/// `V = e1^2/2 + (e2 + k3 e3)^2/2 + (1 - cos(e3))/k2`.
pub fn lyapunov_v(e: &PoseError, gains: &ControllerGains) -> f64 {
    let combined = e.e2 + gains.k3 * e.e3;
    0.5 * e.e1 * e.e1 + 0.5 * combined * combined + (1.0 - e.e3.cos()) / gains.k2
}

/// Augmented Lyapunov function
/// `V_a = V + a_l_tilde^2/(2 gamma1 a_l) + a_r_tilde^2/(2 gamma2 a_r)`,
/// where `a_l, a_r` are the true slip parameters. Requires strictly positive
/// adaptation gains to be finite for nonzero estimate errors.
pub fn lyapunov_v_a(
    e_a: &AugmentedError,
    a_l: f64,
    a_r: f64,
    gains: &ControllerGains,
) -> f64 {
    lyapunov_v(&e_a.pose(), gains)
        + e_a.a_l_tilde * e_a.a_l_tilde / (2.0 * gains.gamma1 * a_l)
        + e_a.a_r_tilde * e_a.a_r_tilde / (2.0 * gains.gamma2 * a_r)
}

/// Decay comparison function
/// `W = k1 e1^2 + (k2 k3 mu / 2)(e2 + k3 e3)^2 + (mu / (2 k2 k3)) sin^2(e3)`.
///
/// Wherever the reference speed satisfies `v_ref >= mu`, `W` lower-bounds the
/// decay rate `-dV_a/dt` along closed-loop trajectories under frozen slip.
pub fn decay_w(e_a: &AugmentedError, mu: f64, gains: &ControllerGains) -> f64 {
    let e = e_a.pose();
    let combined = e.e2 + gains.k3 * e.e3;
    let sin_e3 = e.e3.sin();
    gains.k1 * e.e1 * e.e1
        + 0.5 * gains.k2 * gains.k3 * mu * combined * combined
        + mu / (2.0 * gains.k2 * gains.k3) * sin_e3 * sin_e3
}

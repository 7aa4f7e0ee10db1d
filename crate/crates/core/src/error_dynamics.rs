//! Closed-loop dynamics in two equivalent coordinate systems.
//!
//! The augmented error state stacks the body-frame pose error with the two
//! slip-estimate errors `a_tilde = a_hat - a`. Its time derivative splits
//! into three parts:
//!
//! * [`nominal_field`]: the frozen-slip adaptive loop (`f_a`),
//! * [`vanishing_field`]: the lateral-slip coupling that vanishes with the
//!   error and estimate errors (`g`),
//! * [`nonvanishing_field`]: the pure disturbance from lateral slip and slip
//!   parameter drift (`g_n`).
//!
//! [`pose_space_field`] is the same closed loop expressed over the raw
//! platform pose and estimates; the simulator advances that form, and the
//! split form is what the stability analysis linearizes.

use crate::controller::{control_law, pose_error, update_rule, ControllerGains, PoseError, SlipEstimates};
use crate::error::Result;
use crate::kinematics::{
    pose_rate_with_lateral_slip, wheel_command, wheel_to_body, BodyVelocity, PoseRate,
    RobotGeometry, RobotPose, SlipState,
};

/// Pose error plus slip-estimate errors, ordered
/// `(e1, e2, e3, a_l_tilde, a_r_tilde)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedError {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub a_l_tilde: f64,
    pub a_r_tilde: f64,
}

impl AugmentedError {
    pub fn from_parts(e: PoseError, a_l_tilde: f64, a_r_tilde: f64) -> Self {
        AugmentedError {
            e1: e.e1,
            e2: e.e2,
            e3: e.e3,
            a_l_tilde,
            a_r_tilde,
        }
    }

    pub fn pose(&self) -> PoseError {
        PoseError {
            e1: self.e1,
            e2: self.e2,
            e3: self.e3,
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.e1, self.e2, self.e3, self.a_l_tilde, self.a_r_tilde]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        AugmentedError {
            e1: v[0],
            e2: v[1],
            e3: v[2],
            a_l_tilde: v[3],
            a_r_tilde: v[4],
        }
    }

    pub fn norm(&self) -> f64 {
        self.as_array().iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Per-side commanded speeds and the lateral offsets that appear throughout
/// the split dynamics.
struct Couplings {
    eta_c: BodyVelocity,
    /// `v_c + (b/2) omega_c` (right side).
    omega1: f64,
    /// `v_c - (b/2) omega_c` (left side).
    omega2: f64,
    /// `e2/b - 1/2`.
    omega3: f64,
    /// `e2/b + 1/2`.
    omega4: f64,
}

fn couplings(
    e: &PoseError,
    eta_ref: &BodyVelocity,
    gains: &ControllerGains,
    geom: &RobotGeometry,
) -> Couplings {
    let eta_c = control_law(e, eta_ref, gains);
    let b = geom.wheel_spacing;
    let half_b_omega = 0.5 * b * eta_c.omega;
    Couplings {
        omega1: eta_c.v_x + half_b_omega,
        omega2: eta_c.v_x - half_b_omega,
        omega3: e.e2 / b - 0.5,
        omega4: e.e2 / b + 0.5,
        eta_c,
    }
}

/// Frozen-slip part `f_a` of the augmented error derivative:
///
/// ```text
/// e1'      = D_r O3 O1 + v_ref cos(e3) - D_l O4 O2
/// e2'      = D_l O2 e1/b + v_ref sin(e3) - D_r O1 e1/b
/// e3'      = omega_ref - D_r O1 / b + D_l O2 / b
/// a_l_til' = (update rule, left)
/// a_r_til' = (update rule, right)
/// ```
///
/// with `D_l = 1 + a_l_tilde/a_l`, `D_r = 1 + a_r_tilde/a_r`,
/// `O1 = v_c + (b/2) omega_c`, `O2 = v_c - (b/2) omega_c`,
/// `O3 = e2/b - 1/2`, `O4 = e2/b + 1/2`.
pub fn nominal_field(
    e_a: &AugmentedError,
    eta_ref: &BodyVelocity,
    slip: &SlipState,
    gains: &ControllerGains,
    geom: &RobotGeometry,
) -> [f64; 5] {
    let e = e_a.pose();
    let c = couplings(&e, eta_ref, gains, geom);
    let d_l = 1.0 + e_a.a_l_tilde / slip.a_l;
    let d_r = 1.0 + e_a.a_r_tilde / slip.a_r;
    let b = geom.wheel_spacing;
    let (sin_e3, cos_e3) = e.e3.sin_cos();

    let right = d_r * c.omega1;
    let left = d_l * c.omega2;
    let (a_l_dot, a_r_dot) = update_rule(&e, &c.eta_c, gains, geom);
    [
        d_r * c.omega3 * c.omega1 + eta_ref.v_x * cos_e3 - d_l * c.omega4 * c.omega2,
        left * e.e1 / b + eta_ref.v_x * sin_e3 - right * e.e1 / b,
        eta_ref.omega - right / b + left / b,
        a_l_dot,
        a_r_dot,
    ]
}

/// Lateral-slip coupling `g`, nonzero only in the lateral error component:
///
/// `g_2 = sigma [ (a_l_tilde/(2 a_l)) O2 + (a_r_tilde/(2 a_r)) O1
///         - k3 e3 omega_c + k1 e1 ]`.
///
/// Vanishes when `sigma = 0` or when all error components vanish.
pub fn vanishing_field(
    e_a: &AugmentedError,
    eta_ref: &BodyVelocity,
    slip: &SlipState,
    gains: &ControllerGains,
    geom: &RobotGeometry,
) -> [f64; 5] {
    let e = e_a.pose();
    let c = couplings(&e, eta_ref, gains, geom);
    let g2 = slip.sigma
        * (e_a.a_l_tilde / (2.0 * slip.a_l) * c.omega2
            + e_a.a_r_tilde / (2.0 * slip.a_r) * c.omega1
            - gains.k3 * e.e3 * c.eta_c.omega
            + gains.k1 * e.e1);
    [0.0, g2, 0.0, 0.0, 0.0]
}

/// Non-vanishing disturbance `g_n = (0, sigma v_ref cos(e3), 0, -a_l', -a_r')`:
/// lateral slip pushes on the lateral error even at zero tracking error, and
/// slip drift pushes on the estimate errors.
pub fn nonvanishing_field(
    e_a: &AugmentedError,
    eta_ref: &BodyVelocity,
    slip: &SlipState,
) -> [f64; 5] {
    [
        0.0,
        slip.sigma * eta_ref.v_x * e_a.e3.cos(),
        0.0,
        -slip.a_l_dot,
        -slip.a_r_dot,
    ]
}

/// Sum of the three parts: the full augmented error derivative.
pub fn total_field(
    e_a: &AugmentedError,
    eta_ref: &BodyVelocity,
    slip: &SlipState,
    gains: &ControllerGains,
    geom: &RobotGeometry,
) -> [f64; 5] {
    let f = nominal_field(e_a, eta_ref, slip, gains, geom);
    let g = vanishing_field(e_a, eta_ref, slip, gains, geom);
    let gn = nonvanishing_field(e_a, eta_ref, slip);
    let mut out = [0.0; 5];
    for i in 0..5 {
        out[i] = f[i] + g[i] + gn[i];
    }
    out
}

/// Rates of the raw closed-loop state `(q_p, a_l_hat, a_r_hat)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSpaceRate {
    pub pose: PoseRate,
    pub a_l_hat_dot: f64,
    pub a_r_hat_dot: f64,
}

/// Closed-loop field over the raw platform state: commands from the control
/// law, wheel speeds through the estimated inverse map, realized body
/// velocity through the true slip map, pose rate skewed by lateral slip, and
/// estimates driven by the update rule.
///
/// Fails if the estimates leave the positive domain of the inverse map.
pub fn pose_space_field(
    q_p: &RobotPose,
    estimates: &SlipEstimates,
    q_ref: &RobotPose,
    eta_ref: &BodyVelocity,
    slip: &SlipState,
    gains: &ControllerGains,
    geom: &RobotGeometry,
) -> Result<PoseSpaceRate> {
    estimates.validate()?;
    let e = pose_error(q_ref, q_p);
    let eta_c = control_law(&e, eta_ref, gains);
    let xi = wheel_command(&eta_c, estimates.a_l_hat, estimates.a_r_hat, geom);
    let eta = wheel_to_body(&xi, slip, geom)?;
    let pose = pose_rate_with_lateral_slip(q_p, &eta, slip.sigma);
    let (a_l_hat_dot, a_r_hat_dot) = update_rule(&e, &eta_c, gains, geom);
    Ok(PoseSpaceRate {
        pose,
        a_l_hat_dot,
        a_r_hat_dot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::pose_from_error;
    use crate::slip::SlipProfile;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn tuned_gains() -> ControllerGains {
        ControllerGains::new(1.44, 10.0, 1.83, 3.0, 3.0).unwrap()
    }

    /// Direct route: differentiate the error transform along the pose-space
    /// closed loop. Independent of the printed split-field expressions.
    fn error_rate_via_pose_space(
        e_a: &AugmentedError,
        q_ref: &RobotPose,
        eta_ref: &BodyVelocity,
        slip: &SlipState,
        gains: &ControllerGains,
        geom: &RobotGeometry,
    ) -> [f64; 5] {
        let q_p = pose_from_error(q_ref, &e_a.pose());
        let estimates = SlipEstimates {
            a_l_hat: slip.a_l + e_a.a_l_tilde,
            a_r_hat: slip.a_r + e_a.a_r_tilde,
        };
        let rate = pose_space_field(&q_p, &estimates, q_ref, eta_ref, slip, gains, geom).unwrap();
        let q_ref_rate = crate::kinematics::pose_rate_no_slip(q_ref, eta_ref);

        let (sin_t, cos_t) = q_p.theta.sin_cos();
        let dxd = q_ref_rate.x_dot - rate.pose.x_dot;
        let dyd = q_ref_rate.y_dot - rate.pose.y_dot;
        let e = e_a.pose();
        [
            rate.pose.theta_dot * e.e2 + cos_t * dxd + sin_t * dyd,
            -rate.pose.theta_dot * e.e1 - sin_t * dxd + cos_t * dyd,
            q_ref_rate.theta_dot - rate.pose.theta_dot,
            rate.a_l_hat_dot - slip.a_l_dot,
            rate.a_r_hat_dot - slip.a_r_dot,
        ]
    }

    #[test]
    fn split_fields_sum_to_the_direct_error_rate() {
        let gains = tuned_gains();
        let geom = RobotGeometry::default();
        let profile = SlipProfile::validation();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..400 {
            let t = rng.gen_range(0.0..70.0);
            let slip = profile.evaluate(t);
            let eta_ref = crate::reference::reference_input(t).body_velocity();
            let q_ref = RobotPose {
                x: rng.gen_range(-5.0..5.0),
                y: rng.gen_range(-5.0..5.0),
                theta: rng.gen_range(-3.0..3.0),
            };
            let e_a = AugmentedError {
                e1: rng.gen_range(-1.0..1.0),
                e2: rng.gen_range(-1.0..1.0),
                e3: rng.gen_range(-1.0..1.0),
                a_l_tilde: rng.gen_range(0.2 - slip.a_l..1.0),
                a_r_tilde: rng.gen_range(0.2 - slip.a_r..1.0),
            };
            let split = total_field(&e_a, &eta_ref, &slip, &gains, &geom);
            let direct = error_rate_via_pose_space(&e_a, &q_ref, &eta_ref, &slip, &gains, &geom);
            for i in 0..5 {
                assert_relative_eq!(
                    split[i],
                    direct[i],
                    max_relative = 1e-10,
                    epsilon = 1e-11
                );
            }
        }
    }

    #[test]
    fn perfect_tracking_is_an_equilibrium_of_the_nominal_field() {
        let gains = tuned_gains();
        let geom = RobotGeometry::default();
        let slip = SlipState::constant(5.0 / 3.0, 2.5).unwrap();
        let eta_ref = BodyVelocity { v_x: 0.5, omega: 0.3 };
        let zero = AugmentedError {
            e1: 0.0,
            e2: 0.0,
            e3: 0.0,
            a_l_tilde: 0.0,
            a_r_tilde: 0.0,
        };
        let f = nominal_field(&zero, &eta_ref, &slip, &gains, &geom);
        for (i, value) in f.iter().enumerate() {
            assert!(value.abs() < 1e-15, "component {i} = {value}");
        }
    }

    #[test]
    fn coupling_term_vanishes_without_lateral_slip() {
        let gains = tuned_gains();
        let geom = RobotGeometry::default();
        let slip = SlipState::constant(1.4, 2.0).unwrap();
        let eta_ref = BodyVelocity { v_x: 0.4, omega: -0.2 };
        let e_a = AugmentedError {
            e1: 0.3,
            e2: -0.2,
            e3: 0.4,
            a_l_tilde: 0.5,
            a_r_tilde: -0.4,
        };
        assert_eq!(vanishing_field(&e_a, &eta_ref, &slip, &gains, &geom), [0.0; 5]);
        assert_eq!(nonvanishing_field(&e_a, &eta_ref, &slip), [0.0; 5]);
    }

    #[test]
    fn disturbance_term_is_independent_of_tracking_error_scale() {
        // g_n row 2 depends on e3 only through cos(e3); rows 4 and 5 copy the
        // negated slip drift.
        let slip = SlipState {
            a_l: 1.5,
            a_r: 2.0,
            sigma: 0.2,
            a_l_dot: 0.03,
            a_r_dot: -0.05,
        };
        let eta_ref = BodyVelocity { v_x: 0.5, omega: 0.1 };
        let e_a = AugmentedError {
            e1: 1.0,
            e2: -2.0,
            e3: 0.0,
            a_l_tilde: 3.0,
            a_r_tilde: -1.0,
        };
        let gn = nonvanishing_field(&e_a, &eta_ref, &slip);
        assert_relative_eq!(gn[1], 0.2 * 0.5);
        assert_eq!(gn[3], -0.03);
        assert_eq!(gn[4], 0.05);
        assert_eq!((gn[0], gn[2]), (0.0, 0.0));
    }

    #[test]
    fn split_fields_match_finite_difference_of_pose_space_integration() {
        // Short two-sided integration of the pose-space loop, then a central
        // difference of the reconstructed augmented error.
        let gains = tuned_gains();
        let geom = RobotGeometry::default();
        let profile = SlipProfile::validation();
        // Small enough that second-order truncation clears the tolerance at
        // field curvatures of ~1e7, large enough to stay above cancellation.
        let delta = 1e-6;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        for _ in 0..50 {
            let t = rng.gen_range(1.0..69.0);
            let slip = profile.evaluate(t);
            let q_ref = RobotPose {
                x: rng.gen_range(-2.0..2.0),
                y: rng.gen_range(-2.0..2.0),
                theta: rng.gen_range(-2.0..2.0),
            };
            let e_a = AugmentedError {
                e1: rng.gen_range(-0.8..0.8),
                e2: rng.gen_range(-0.8..0.8),
                e3: rng.gen_range(-0.8..0.8),
                a_l_tilde: rng.gen_range(0.3 - slip.a_l..0.8),
                a_r_tilde: rng.gen_range(0.3 - slip.a_r..0.8),
            };
            let q_p = pose_from_error(&q_ref, &e_a.pose());
            let estimates = SlipEstimates {
                a_l_hat: slip.a_l + e_a.a_l_tilde,
                a_r_hat: slip.a_r + e_a.a_r_tilde,
            };

            // Reference input frozen at time t for the whole probe: the field
            // under test is evaluated at exactly (t, state), so the probe must
            // differentiate state transport only.
            let eta_ref = crate::reference::reference_input(t).body_velocity();
            let field = |tau: f64, y: &[f64; 8]| -> [f64; 8] {
                let q_ref_probe = RobotPose { x: y[0], y: y[1], theta: y[2] };
                let q_p_probe = RobotPose { x: y[3], y: y[4], theta: y[5] };
                let est_probe = SlipEstimates { a_l_hat: y[6], a_r_hat: y[7] };
                let slip_probe = profile.evaluate(tau);
                let ref_rate = crate::kinematics::pose_rate_no_slip(&q_ref_probe, &eta_ref);
                let rate = pose_space_field(
                    &q_p_probe, &est_probe, &q_ref_probe, &eta_ref, &slip_probe, &gains, &geom,
                )
                .unwrap();
                [
                    ref_rate.x_dot,
                    ref_rate.y_dot,
                    ref_rate.theta_dot,
                    rate.pose.x_dot,
                    rate.pose.y_dot,
                    rate.pose.theta_dot,
                    rate.a_l_hat_dot,
                    rate.a_r_hat_dot,
                ]
            };
            let y0 = [
                q_ref.x,
                q_ref.y,
                q_ref.theta,
                q_p.x,
                q_p.y,
                q_p.theta,
                estimates.a_l_hat,
                estimates.a_r_hat,
            ];
            let reconstruct = |y: &[f64; 8], tau: f64| -> [f64; 5] {
                let qr = RobotPose { x: y[0], y: y[1], theta: y[2] };
                let qp = RobotPose { x: y[3], y: y[4], theta: y[5] };
                let s = profile.evaluate(tau);
                let e = pose_error(&qr, &qp);
                [e.e1, e.e2, e.e3, y[6] - s.a_l, y[7] - s.a_r]
            };
            let forward = crate::simulator::rk4_step(&field, t, &y0, delta);
            let backward = crate::simulator::rk4_step(&field, t, &y0, -delta);
            let ef = reconstruct(&forward, t + delta);
            let eb = reconstruct(&backward, t - delta);

            // The field under test uses the analytic slip drift at time t.
            let split = total_field(&e_a, &eta_ref, &slip, &gains, &geom);
            for i in 0..5 {
                let fd = (ef[i] - eb[i]) / (2.0 * delta);
                assert!(
                    (split[i] - fd).abs() <= 1e-5 * split[i].abs().max(1.0),
                    "component {i} at t = {t}: field {} vs probe {fd}",
                    split[i]
                );
            }
        }
    }

    #[test]
    fn pose_space_field_rejects_nonpositive_estimates() {
        let gains = tuned_gains();
        let geom = RobotGeometry::default();
        let slip = SlipState::ideal();
        let q = RobotPose { x: 0.0, y: 0.0, theta: 0.0 };
        let eta_ref = BodyVelocity { v_x: 0.5, omega: 0.0 };
        let bad = SlipEstimates { a_l_hat: -0.1, a_r_hat: 1.0 };
        assert!(pose_space_field(&q, &bad, &q, &eta_ref, &slip, &gains, &geom).is_err());
    }
}

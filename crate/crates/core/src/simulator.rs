//! Fixed-step closed-loop simulation.
//!
//! The reference pose is co-integrated with the platform state on one grid
//! (state layout: reference pose, platform pose, slip estimates), which keeps
//! the two phases aligned exactly. Integration segments are split at
//! reference-input and slip-profile discontinuities so no RK4 step straddles
//! a jump.

use std::io::{self, Write};

use crate::controller::{
    control_law, lyapunov_v_a, pose_error, update_rule, ControllerGains, SlipEstimates,
};
use crate::error::{Error, Result};
use crate::error_dynamics::AugmentedError;
use crate::kinematics::{
    pose_rate_no_slip, pose_rate_with_lateral_slip, wheel_command, wheel_to_body, BodyVelocity,
    RobotGeometry, RobotPose, WheelSpeeds,
};
use crate::reference::{reference_input, SEGMENT_BOUNDARIES};
use crate::slip::SlipProfile;
use crate::util::{fmt_float, Timeline};

/// Lower bound enforced on slip estimates after every integration step. The
/// update law alone does not keep estimates away from zero under aggressive
/// adaptation gains, and the inverse wheel map needs them positive.
pub const ESTIMATE_FLOOR: f64 = 0.05;

/// Which controller drives the platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    /// Adaptive controller: slip estimates evolve by the update rule.
    Akc,
    /// Non-adaptive baseline: estimates pinned at 1, update disabled.
    Nkc,
}

/// One classical Runge-Kutta step of size `h` for `y' = f(t, y)`.
pub fn rk4_step<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    h: f64,
) -> [f64; N] {
    let k1 = f(t, y);
    let mut stage = [0.0; N];
    for i in 0..N {
        stage[i] = y[i] + 0.5 * h * k1[i];
    }
    let k2 = f(t + 0.5 * h, &stage);
    for i in 0..N {
        stage[i] = y[i] + 0.5 * h * k2[i];
    }
    let k3 = f(t + 0.5 * h, &stage);
    for i in 0..N {
        stage[i] = y[i] + h * k3[i];
    }
    let k4 = f(t + h, &stage);
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Everything a closed-loop run needs.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub geometry: RobotGeometry,
    pub gains: ControllerGains,
    pub mode: ControllerMode,
    pub slip: SlipProfile,
    pub initial_pose: RobotPose,
    pub initial_estimates: SlipEstimates,
    pub t_final: f64,
    pub step: f64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.gains.validate()?;
        self.initial_estimates.validate()?;
        for (name, value) in [
            ("initial_pose.x", self.initial_pose.x),
            ("initial_pose.y", self.initial_pose.y),
            ("initial_pose.theta", self.initial_pose.theta),
        ] {
            if !value.is_finite() {
                return Err(Error::domain(format!("{name} = {value} must be finite")));
            }
        }
        // Timeline construction re-checks t_final and step; validate here so
        // config errors surface before any work happens.
        Timeline::new(self.t_final, self.step, &[])?;
        Ok(())
    }
}

/// One log sample of a closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub q_ref: RobotPose,
    pub q_p: RobotPose,
    pub error: crate::controller::PoseError,
    pub a_l_hat: f64,
    pub a_r_hat: f64,
    pub a_l_tilde: f64,
    pub a_r_tilde: f64,
    pub eta_c: BodyVelocity,
    pub xi: WheelSpeeds,
    pub a_l: f64,
    pub a_r: f64,
    pub sigma: f64,
    pub v_a: f64,
}

/// Uniform-grid log of a closed-loop run; the first row is at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub mode: ControllerMode,
    pub geometry: RobotGeometry,
    pub step: f64,
    pub rows: Vec<LogRow>,
    /// Number of post-step projections that clipped an estimate to
    /// [`ESTIMATE_FLOOR`].
    pub floor_events: usize,
}

impl TrajectoryLog {
    pub fn duration(&self) -> f64 {
        self.rows.last().map(|r| r.t).unwrap_or(0.0)
    }

    /// Augmented error at row `i`.
    pub fn augmented_error(&self, i: usize) -> AugmentedError {
        let row = &self.rows[i];
        AugmentedError::from_parts(row.error, row.a_l_tilde, row.a_r_tilde)
    }

    /// Writes the full-precision CSV log.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "t,x_ref,y_ref,theta_ref,x_p,y_p,theta_p,e1,e2,e3,al_hat,ar_hat,\
             al_tilde,ar_tilde,v_c,omega_c,omega_l,omega_r,a_l,a_r,sigma,V_a"
        )?;
        for r in &self.rows {
            let fields = [
                r.t,
                r.q_ref.x,
                r.q_ref.y,
                r.q_ref.theta,
                r.q_p.x,
                r.q_p.y,
                r.q_p.theta,
                r.error.e1,
                r.error.e2,
                r.error.e3,
                r.a_l_hat,
                r.a_r_hat,
                r.a_l_tilde,
                r.a_r_tilde,
                r.eta_c.v_x,
                r.eta_c.omega,
                r.xi.omega_l,
                r.xi.omega_r,
                r.a_l,
                r.a_r,
                r.sigma,
                r.v_a,
            ];
            let line: Vec<String> = fields.iter().map(|&x| fmt_float(x)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

const STATE_NAMES: [&str; 8] = [
    "x_ref", "y_ref", "theta_ref", "x_p", "y_p", "theta_p", "a_l_hat", "a_r_hat",
];

/// Runs the closed loop over `[0, t_final]` and logs every grid sample.
///
/// The reference starts at the origin pose. In `Nkc` mode the estimate states
/// are pinned at 1 and the update rule is disabled; the run is then
/// bit-identical to an `Akc` run with zero adaptation gains and unit initial
/// estimates. Returns an error if the state stops being finite.
pub fn simulate(config: &SimulationConfig) -> Result<TrajectoryLog> {
    config.validate()?;
    let mut breaks: Vec<f64> = SEGMENT_BOUNDARIES.to_vec();
    breaks.extend(config.slip.discontinuities());
    let timeline = Timeline::new(config.t_final, config.step, &breaks)?;

    let geom = config.geometry;
    let gains = config.gains;
    let mode = config.mode;
    let profile = &config.slip;

    let field = |t: f64, y: &[f64; 8]| -> [f64; 8] {
        let eta_ref = reference_input(t).body_velocity();
        let slip = profile.evaluate(t);
        let q_ref = RobotPose {
            x: y[0],
            y: y[1],
            theta: y[2],
        };
        let q_p = RobotPose {
            x: y[3],
            y: y[4],
            theta: y[5],
        };
        let (a_l_hat, a_r_hat) = match mode {
            ControllerMode::Akc => (y[6], y[7]),
            ControllerMode::Nkc => (1.0, 1.0),
        };
        let ref_rate = pose_rate_no_slip(&q_ref, &eta_ref);
        let e = pose_error(&q_ref, &q_p);
        let eta_c = control_law(&e, &eta_ref, &gains);
        let xi = wheel_command(&eta_c, a_l_hat, a_r_hat, &geom);
        let eta = wheel_to_body(&xi, &slip, &geom)
            .expect("slip profiles guarantee parameters >= 1");
        let pose_rate = pose_rate_with_lateral_slip(&q_p, &eta, slip.sigma);
        let (dl, dr) = match mode {
            ControllerMode::Akc => update_rule(&e, &eta_c, &gains, &geom),
            ControllerMode::Nkc => (0.0, 0.0),
        };
        [
            ref_rate.x_dot,
            ref_rate.y_dot,
            ref_rate.theta_dot,
            pose_rate.x_dot,
            pose_rate.y_dot,
            pose_rate.theta_dot,
            dl,
            dr,
        ]
    };

    let log_row = |t: f64, y: &[f64; 8]| -> LogRow {
        let q_ref = RobotPose {
            x: y[0],
            y: y[1],
            theta: y[2],
        };
        let q_p = RobotPose {
            x: y[3],
            y: y[4],
            theta: y[5],
        };
        let (a_l_hat, a_r_hat) = match mode {
            ControllerMode::Akc => (y[6], y[7]),
            ControllerMode::Nkc => (1.0, 1.0),
        };
        let slip = profile.evaluate(t);
        let error = pose_error(&q_ref, &q_p);
        let eta_c = control_law(&error, &reference_input(t).body_velocity(), &gains);
        let xi = wheel_command(&eta_c, a_l_hat, a_r_hat, &geom);
        let a_l_tilde = a_l_hat - slip.a_l;
        let a_r_tilde = a_r_hat - slip.a_r;
        let e_a = AugmentedError::from_parts(error, a_l_tilde, a_r_tilde);
        LogRow {
            t,
            q_ref,
            q_p,
            error,
            a_l_hat,
            a_r_hat,
            a_l_tilde,
            a_r_tilde,
            eta_c,
            xi,
            a_l: slip.a_l,
            a_r: slip.a_r,
            sigma: slip.sigma,
            v_a: lyapunov_v_a(&e_a, slip.a_l, slip.a_r, &gains),
        }
    };

    let initial_estimates = match mode {
        ControllerMode::Akc => config.initial_estimates,
        ControllerMode::Nkc => SlipEstimates {
            a_l_hat: 1.0,
            a_r_hat: 1.0,
        },
    };
    let mut y = [
        0.0,
        0.0,
        0.0,
        config.initial_pose.x,
        config.initial_pose.y,
        config.initial_pose.theta,
        initial_estimates.a_l_hat,
        initial_estimates.a_r_hat,
    ];

    let mut floor_events = 0usize;
    let mut rows = Vec::with_capacity(timeline.n_steps() + 1);
    rows.push(log_row(0.0, &y));
    for k in 0..timeline.n_steps() {
        let mut t = timeline.time(k);
        let t_next = timeline.time(k + 1);
        for &p in timeline.interior(k) {
            y = rk4_step(&field, t, &y, p - t);
            t = p;
        }
        y = rk4_step(&field, t, &y, t_next - t);

        if mode == ControllerMode::Akc {
            for a_hat in &mut y[6..8] {
                if *a_hat < ESTIMATE_FLOOR {
                    *a_hat = ESTIMATE_FLOOR;
                    floor_events += 1;
                }
            }
        }
        if let Some(bad) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                t: t_next,
                what: format!("{} = {}", STATE_NAMES[bad], y[bad]),
            });
        }
        rows.push(log_row(t_next, &y));
    }

    Ok(TrajectoryLog {
        mode,
        geometry: geom,
        step: timeline.step(),
        rows,
        floor_events,
    })
}

/// Ultimate bound of a logged run: the supremum of the augmented error norm
/// from `transient` on, and the first time after which the norm never again
/// exceeds that bound (with a relative slack of 1e-9).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UltimateBound {
    pub u_b: f64,
    pub t_settle: f64,
}

pub fn measure_ultimate_bound(log: &TrajectoryLog, transient: f64) -> Result<UltimateBound> {
    if log.rows.is_empty() || !(transient >= 0.0 && transient < log.duration()) {
        return Err(Error::domain(format!(
            "transient = {transient} must lie in [0, {})",
            log.duration()
        )));
    }
    let norms: Vec<f64> = (0..log.rows.len())
        .map(|i| log.augmented_error(i).norm())
        .collect();
    let u_b = log
        .rows
        .iter()
        .zip(&norms)
        .filter(|(row, _)| row.t >= transient)
        .map(|(_, &n)| n)
        .fold(f64::MIN, f64::max);
    let threshold = u_b * (1.0 + 1e-9);
    let last_exceed = norms.iter().rposition(|&n| n > threshold);
    let t_settle = match last_exceed {
        Some(i) if i + 1 < log.rows.len() => log.rows[i + 1].t,
        Some(_) => log.duration(),
        None => log.rows[0].t,
    };
    Ok(UltimateBound { u_b, t_settle })
}

//! Built-in reference maneuver and its feasibility checks.
//!
//! The maneuver accelerates smoothly to a straight cruise, decelerates to a
//! stop, drives an S-sequence of four alternating arcs, then accelerates back
//! to a straight cruise. Speed is continuous everywhere; its derivative jumps
//! at segment boundaries, which integrators treat as forced grid points.

use std::io::{self, Write};

use crate::error::Result;
use crate::kinematics::{pose_rate_no_slip, BodyVelocity, RobotGeometry, RobotPose};
use crate::simulator::rk4_step;
use crate::util::{fmt_float, Timeline};

/// Times where the reference input switches segments (speed derivative or
/// turn-rate sign jumps).
pub const SEGMENT_BOUNDARIES: [f64; 8] = [5.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0];

/// Reference speed and turn rate with their time derivatives (right limits
/// at segment boundaries).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceInput {
    pub v: f64,
    pub omega: f64,
    pub v_dot: f64,
    pub omega_dot: f64,
}

impl ReferenceInput {
    pub fn body_velocity(&self) -> BodyVelocity {
        BodyVelocity {
            v_x: self.v,
            omega: self.omega,
        }
    }
}

/// Reference input at time `t` (in seconds):
///
/// - `[0, 5)`   ramp up:    `v = 0.25 (1 - cos(pi t / 5))`, `omega = 0`
/// - `[5, 20)`  cruise:     `v = 0.5`
/// - `[20, 25)` ramp down:  `v = 0.25 (1 + cos(pi t / 5))`
/// - `[25, 45)` four arcs:  `v = 0.15 pi (1 - cos(2 pi t / 5))`,
///   `omega = -v/1.5` on `[25,30) u [35,40)`, `+v/1.5` on `[30,35) u [40,45)`
/// - `[45, 50)` ramp up:    `v = 0.25 (1 + cos(pi t / 5))`
/// - `[50, inf)` cruise:    `v = 0.5`
///
/// `v` is continuous at every boundary. Times before 0 extend the first
/// segment's formula, which keeps derivative probes near `t = 0` meaningful.
pub fn reference_input(t: f64) -> ReferenceInput {
    use std::f64::consts::PI;
    let (v, omega, v_dot, omega_dot);
    if t < 5.0 {
        v = 0.25 * (1.0 - (PI * t / 5.0).cos());
        v_dot = 0.05 * PI * (PI * t / 5.0).sin();
        omega = 0.0;
        omega_dot = 0.0;
    } else if t < 20.0 {
        v = 0.5;
        v_dot = 0.0;
        omega = 0.0;
        omega_dot = 0.0;
    } else if t < 25.0 {
        v = 0.25 * (1.0 + (PI * t / 5.0).cos());
        v_dot = -0.05 * PI * (PI * t / 5.0).sin();
        omega = 0.0;
        omega_dot = 0.0;
    } else if t < 45.0 {
        v = 0.15 * PI * (1.0 - (2.0 * PI * t / 5.0).cos());
        v_dot = 0.06 * PI * PI * (2.0 * PI * t / 5.0).sin();
        // Arc direction alternates every 5 s: -, +, -, +.
        let arc_index = ((t - 25.0) / 5.0).floor() as i64;
        let sign = if arc_index % 2 == 0 { -1.0 } else { 1.0 };
        omega = sign * v / 1.5;
        omega_dot = sign * v_dot / 1.5;
    } else if t < 50.0 {
        v = 0.25 * (1.0 + (PI * t / 5.0).cos());
        v_dot = -0.05 * PI * (PI * t / 5.0).sin();
        omega = 0.0;
        omega_dot = 0.0;
    } else {
        v = 0.5;
        v_dot = 0.0;
        omega = 0.0;
        omega_dot = 0.0;
    }
    ReferenceInput {
        v,
        omega,
        v_dot,
        omega_dot,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSample {
    pub t: f64,
    pub pose: RobotPose,
    pub input: ReferenceInput,
}

/// Reference pose trajectory sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub samples: Vec<ReferenceSample>,
    pub step: f64,
}

impl ReferenceTrajectory {
    /// Writes `t,x_ref,y_ref,theta_ref,v_ref,omega_ref` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x_ref,y_ref,theta_ref,v_ref,omega_ref")?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_float(s.t),
                fmt_float(s.pose.x),
                fmt_float(s.pose.y),
                fmt_float(s.pose.theta),
                fmt_float(s.input.v),
                fmt_float(s.input.omega)
            )?;
        }
        Ok(())
    }
}

/// Integrates the reference unicycle from the origin pose over `[0, t_final]`
/// with fixed-step RK4, aligning steps to segment boundaries.
pub fn generate_reference(t_final: f64, step: f64) -> Result<ReferenceTrajectory> {
    let timeline = Timeline::new(t_final, step, &SEGMENT_BOUNDARIES)?;
    let field = |t: f64, y: &[f64; 3]| -> [f64; 3] {
        let pose = RobotPose {
            x: y[0],
            y: y[1],
            theta: y[2],
        };
        let rate = pose_rate_no_slip(&pose, &reference_input(t).body_velocity());
        [rate.x_dot, rate.y_dot, rate.theta_dot]
    };

    let mut y = [0.0_f64; 3];
    let mut samples = Vec::with_capacity(timeline.n_steps() + 1);
    let push = |samples: &mut Vec<ReferenceSample>, t: f64, y: &[f64; 3]| {
        samples.push(ReferenceSample {
            t,
            pose: RobotPose {
                x: y[0],
                y: y[1],
                theta: y[2],
            },
            input: reference_input(t),
        });
    };
    push(&mut samples, 0.0, &y);
    for k in 0..timeline.n_steps() {
        let mut t = timeline.time(k);
        let t_next = timeline.time(k + 1);
        for &p in timeline.interior(k) {
            y = rk4_step(&field, t, &y, p - t);
            t = p;
        }
        y = rk4_step(&field, t, &y, t_next - t);
        push(&mut samples, t_next, &y);
    }
    Ok(ReferenceTrajectory {
        samples,
        step: timeline.step(),
    })
}

/// Persistent-excitation style feasibility report over a time window: infima
/// of the reference speed and of `|2 v_ref +- b omega_ref|`, checked against
/// the thresholds `mu1` and `mu2`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub inf_v: f64,
    /// Infimum of `|2 v_ref + b omega_ref|`.
    pub inf_abs_v1: f64,
    /// Infimum of `|2 v_ref - b omega_ref|`.
    pub inf_abs_v2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu1_ok: bool,
    pub mu2_ok: bool,
    /// Merged sample spans `[start, end]` where either bound fails.
    pub violations: Vec<(f64, f64)>,
}

/// Samples the reference input on a uniform grid and reports where the
/// excitation bounds `v_ref >= mu1` and `|2 v_ref +- b omega_ref| >= mu2`
/// fail. Violations are reported, not raised.
pub fn check_assumption_bounds(
    t_start: f64,
    t_end: f64,
    sample_dt: f64,
    mu1: f64,
    mu2: f64,
    geom: &RobotGeometry,
) -> Result<AssumptionReport> {
    let window_ok = t_start.is_finite() && t_end.is_finite() && t_end > t_start;
    if !(window_ok && sample_dt.is_finite() && sample_dt > 0.0) {
        return Err(crate::error::Error::domain(format!(
            "need finite t_end > t_start and sample_dt > 0, got [{t_start}, {t_end}] at {sample_dt}"
        )));
    }
    let n = ((t_end - t_start) / sample_dt).ceil() as usize;
    let b = geom.wheel_spacing;
    let mut inf_v = f64::INFINITY;
    let mut inf_abs_v1 = f64::INFINITY;
    let mut inf_abs_v2 = f64::INFINITY;
    let mut violations: Vec<(f64, f64)> = Vec::new();
    let mut open: Option<f64> = None;
    let mut last_t = t_start;
    for k in 0..=n {
        let t = (t_start + k as f64 * sample_dt).min(t_end);
        let input = reference_input(t);
        let v1 = (2.0 * input.v + b * input.omega).abs();
        let v2 = (2.0 * input.v - b * input.omega).abs();
        inf_v = inf_v.min(input.v);
        inf_abs_v1 = inf_abs_v1.min(v1);
        inf_abs_v2 = inf_abs_v2.min(v2);
        let violated = input.v < mu1 || v1 < mu2 || v2 < mu2;
        match (violated, open) {
            (true, None) => open = Some(t),
            (false, Some(start)) => {
                violations.push((start, last_t));
                open = None;
            }
            _ => {}
        }
        last_t = t;
    }
    if let Some(start) = open {
        violations.push((start, last_t));
    }
    Ok(AssumptionReport {
        inf_v,
        inf_abs_v1,
        inf_abs_v2,
        mu1,
        mu2,
        mu1_ok: inf_v >= mu1,
        mu2_ok: inf_abs_v1 >= mu2 && inf_abs_v2 >= mu2,
        violations,
    })
}

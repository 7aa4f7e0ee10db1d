//! Gain selection by grid search over a tracking-cost functional.
//!
//! The cost integrates a quadratic penalty on the pose error and on the
//! wheel-speed deviation from the reference over one logged run. Candidate
//! gain triples come from per-axis grids (log-spaced by convention); each
//! candidate is simulated independently, so the sweep parallelizes freely
//! without affecting the result.

use rayon::prelude::*;

use crate::controller::ControllerGains;
use crate::error::{Error, Result};
use crate::kinematics::wheel_command;
use crate::reference::reference_input;
use crate::simulator::{simulate, ControllerMode, SimulationConfig, TrajectoryLog};

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) {
        return Err(Error::domain(format!(
            "log grid needs 0 < lo < hi, got [{lo}, {hi}]"
        )));
    }
    if n < 2 {
        return Err(Error::domain("log grid needs at least two points"));
    }
    let (lg_lo, lg_hi) = (lo.log10(), hi.log10());
    Ok((0..n)
        .map(|j| {
            if j == 0 {
                lo
            } else if j == n - 1 {
                hi
            } else {
                10f64.powf(lg_lo + j as f64 * (lg_hi - lg_lo) / (n - 1) as f64)
            }
        })
        .collect())
}

/// Grid-search problem statement: which gains to try, how to weigh the cost,
/// and the scenario every candidate is run on. The scenario's `gains` and
/// `mode` fields are replaced per candidate.
#[derive(Debug, Clone)]
pub struct TuningSpec {
    pub mode: ControllerMode,
    pub k1_grid: Vec<f64>,
    pub k2_grid: Vec<f64>,
    pub k3_grid: Vec<f64>,
    pub gamma1: f64,
    pub gamma2: f64,
    pub q_weight: [[f64; 3]; 3],
    pub r_weight: [[f64; 2]; 2],
    pub scenario: SimulationConfig,
}

fn check_symmetric(m: &[&[f64]], name: &str) -> Result<()> {
    for (i, row) in m.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::domain(format!("{name}[{i}][{j}] must be finite")));
            }
            if (v - m[j][i]).abs() > 1e-12 * v.abs().max(1.0) {
                return Err(Error::domain(format!("{name} must be symmetric")));
            }
        }
    }
    Ok(())
}

impl TuningSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, grid) in [
            ("k1", &self.k1_grid),
            ("k2", &self.k2_grid),
            ("k3", &self.k3_grid),
        ] {
            if grid.is_empty() {
                return Err(Error::domain(format!("{name} grid is empty")));
            }
            if let Some(bad) = grid.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::domain(format!(
                    "{name} grid value {bad} must be positive and finite"
                )));
            }
        }
        if !(self.gamma1 >= 0.0 && self.gamma2 >= 0.0)
            || !self.gamma1.is_finite()
            || !self.gamma2.is_finite()
        {
            return Err(Error::domain("adaptation gains must be finite and >= 0"));
        }
        let q = &self.q_weight;
        check_symmetric(&[&q[0], &q[1], &q[2]], "Q")?;
        // Sylvester: leading principal minors of Q strictly positive.
        let m2 = q[0][0] * q[1][1] - q[0][1] * q[1][0];
        let m3 = q[0][0] * (q[1][1] * q[2][2] - q[1][2] * q[2][1])
            - q[0][1] * (q[1][0] * q[2][2] - q[1][2] * q[2][0])
            + q[0][2] * (q[1][0] * q[2][1] - q[1][1] * q[2][0]);
        if !(q[0][0] > 0.0 && m2 > 0.0 && m3 > 0.0) {
            return Err(Error::domain("Q must be positive definite"));
        }
        let r = &self.r_weight;
        check_symmetric(&[&r[0], &r[1]], "R")?;
        let half_tr = (r[0][0] + r[1][1]) / 2.0;
        let det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
        let min_eig = half_tr - (half_tr * half_tr - det).max(0.0).sqrt();
        let scale = r.iter().flatten().fold(0.0f64, |m, &x| m.max(x.abs()));
        if min_eig < -1e-12 * scale.max(1.0) {
            return Err(Error::domain("R must be positive semidefinite"));
        }
        self.scenario.validate()
    }

    /// Candidate gain triples in row-major grid order (k1 outermost).
    pub fn candidates(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.k1_grid.len() * self.k2_grid.len() * self.k3_grid.len());
        for &k1 in &self.k1_grid {
            for &k2 in &self.k2_grid {
                for &k3 in &self.k3_grid {
                    out.push((k1, k2, k3));
                }
            }
        }
        out
    }
}

fn quad3(m: &[[f64; 3]; 3], v: [f64; 3]) -> f64 {
    let mut acc = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            acc += v[i] * m[i][j] * v[j];
        }
    }
    acc
}

fn quad2(m: &[[f64; 2]; 2], v: [f64; 2]) -> f64 {
    v[0] * (m[0][0] * v[0] + m[0][1] * v[1]) + v[1] * (m[1][0] * v[0] + m[1][1] * v[1])
}

/// Tracking cost of one logged run by trapezoidal quadrature:
/// the integral of `e' Q e + (xi - xi_ref)' R (xi - xi_ref)`.
///
/// The wheel-speed reference depends on the controller that produced the
/// log: the adaptive mode measures commanded wheel speeds against the
/// slip-aware reference `xi_ref` built from the true parameters, while the
/// baseline mode compares both sides through the ideal no-slip map.
pub fn cost_f(log: &TrajectoryLog, q: &[[f64; 3]; 3], r: &[[f64; 2]; 2]) -> f64 {
    if log.rows.len() < 2 {
        return 0.0;
    }
    let last = log.rows.len() - 1;
    let mut total = 0.0;
    for (k, row) in log.rows.iter().enumerate() {
        let e = [row.error.e1, row.error.e2, row.error.e3];
        let eta_ref = reference_input(row.t).body_velocity();
        let (a_l, a_r) = match log.mode {
            ControllerMode::Akc => (row.a_l, row.a_r),
            ControllerMode::Nkc => (1.0, 1.0),
        };
        let xi_ref = wheel_command(&eta_ref, a_l, a_r, &log.geometry);
        let d = [
            row.xi.omega_l - xi_ref.omega_l,
            row.xi.omega_r - xi_ref.omega_r,
        ];
        let weight = if k == 0 || k == last { 0.5 } else { 1.0 };
        total += weight * (quad3(q, e) + quad2(r, d));
    }
    total * log.step
}

/// One evaluated grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEntry {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub cost: f64,
}

/// Full sweep outcome: the argmin and every evaluated point in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningResult {
    pub best: ControllerGains,
    pub best_cost: f64,
    pub entries: Vec<CostEntry>,
    /// Candidates whose simulation failed; they carry infinite cost and are
    /// excluded from the argmin.
    pub failures: usize,
}

impl TuningResult {
    /// Writes the full cost table at full precision.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        use crate::util::fmt_float;
        writeln!(w, "k1,k2,k3,F")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_float(e.k1),
                fmt_float(e.k2),
                fmt_float(e.k3),
                fmt_float(e.cost)
            )?;
        }
        Ok(())
    }
}

/// Simulates every grid point and returns the cheapest.
///
/// Failed runs (diverging candidates) are kept in the table with cost
/// `+inf`. Ties break toward the lexicographically smallest `(k1, k2, k3)`,
/// so the result does not depend on thread scheduling.
pub fn grid_search(spec: &TuningSpec) -> Result<TuningResult> {
    spec.validate()?;
    let candidates = spec.candidates();
    let entries: Vec<CostEntry> = candidates
        .par_iter()
        .map(|&(k1, k2, k3)| {
            let mut config = spec.scenario.clone();
            config.gains = ControllerGains {
                k1,
                k2,
                k3,
                gamma1: spec.gamma1,
                gamma2: spec.gamma2,
            };
            config.mode = spec.mode;
            let cost = match simulate(&config) {
                Ok(log) => cost_f(&log, &spec.q_weight, &spec.r_weight),
                Err(_) => f64::INFINITY,
            };
            CostEntry { k1, k2, k3, cost }
        })
        .collect();

    let failures = entries.iter().filter(|e| !e.cost.is_finite()).count();
    let mut best: Option<&CostEntry> = None;
    for e in entries.iter().filter(|e| e.cost.is_finite()) {
        let better = match best {
            None => true,
            Some(b) => {
                e.cost < b.cost
                    || (e.cost == b.cost && (e.k1, e.k2, e.k3) < (b.k1, b.k2, b.k3))
            }
        };
        if better {
            best = Some(e);
        }
    }
    let best = best.ok_or_else(|| Error::domain("every grid candidate failed to simulate"))?;
    Ok(TuningResult {
        best: ControllerGains {
            k1: best.k1,
            k2: best.k2,
            k3: best.k3,
            gamma1: spec.gamma1,
            gamma2: spec.gamma2,
        },
        best_cost: best.cost,
        entries,
        failures,
    })
}

/// Extracts the 2D cost slice with grid axis `axis` (0 = k1, 1 = k2,
/// 2 = k3) held at `value`. Rows are `(first remaining axis, second
/// remaining axis, cost)` in table order.
pub fn cost_surface_slice(
    result: &TuningResult,
    axis: usize,
    value: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    if axis > 2 {
        return Err(Error::domain(format!("axis {axis} out of range 0..=2")));
    }
    let rows: Vec<(f64, f64, f64)> = result
        .entries
        .iter()
        .filter(|e| [e.k1, e.k2, e.k3][axis] == value)
        .map(|e| {
            let kept: Vec<f64> = [e.k1, e.k2, e.k3]
                .into_iter()
                .enumerate()
                .filter(|&(i, _)| i != axis)
                .map(|(_, v)| v)
                .collect();
            (kept[0], kept[1], e.cost)
        })
        .collect();
    if rows.is_empty() {
        return Err(Error::domain(format!(
            "value {value} is not on grid axis {axis}"
        )));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::SlipEstimates;
    use crate::kinematics::{RobotGeometry, RobotPose};
    use crate::slip::SlipProfile;
    use approx::assert_relative_eq;

    const Q_IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    const R_DEFAULT: [[f64; 2]; 2] = [[0.05, 0.0], [0.0, 0.05]];

    fn scenario(mode: ControllerMode, t_final: f64, step: f64) -> SimulationConfig {
        SimulationConfig {
            geometry: RobotGeometry::default(),
            gains: ControllerGains::new(1.44, 10.0, 1.83, 3.0, 3.0).unwrap(),
            mode,
            slip: SlipProfile::training(),
            initial_pose: RobotPose {
                x: 0.5,
                y: -0.75,
                theta: -std::f64::consts::FRAC_PI_6,
            },
            initial_estimates: SlipEstimates {
                a_l_hat: 1.6,
                a_r_hat: 1.2,
            },
            t_final,
            step,
        }
    }

    #[test]
    fn log_grid_reproduces_the_twenty_point_decades() {
        let grid = log_grid(0.1, 10.0, 20).unwrap();
        assert_eq!(grid.len(), 20);
        assert_eq!(grid[0], 0.1);
        assert_eq!(grid[19], 10.0);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        // The grid points behind the commonly quoted gain values.
        assert!((grid[11] - 1.4384).abs() < 1e-3);
        assert!((grid[12] - 1.8330).abs() < 1e-3);
        assert!((grid[4] - 0.2637).abs() < 1e-3);
        assert!(log_grid(0.0, 1.0, 5).is_err());
        assert!(log_grid(1.0, 0.5, 5).is_err());
        assert!(log_grid(0.1, 10.0, 1).is_err());
    }

    #[test]
    fn constant_unit_error_integrates_to_one() {
        // Hand-built log: e = (1, 0, 0) on [0, 1], wheel speeds on
        // reference, identity Q. The trapezoid rule is exact.
        let mut config = scenario(ControllerMode::Nkc, 1.0, 0.01);
        config.slip = SlipProfile::constant(1.0, 1.0).unwrap();
        config.initial_pose = RobotPose {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        };
        let mut log = simulate(&config).unwrap();
        for row in &mut log.rows {
            row.error.e1 = 1.0;
            row.error.e2 = 0.0;
            row.error.e3 = 0.0;
            let eta_ref = reference_input(row.t).body_velocity();
            row.xi = wheel_command(&eta_ref, 1.0, 1.0, &log.geometry);
        }
        assert_relative_eq!(cost_f(&log, &Q_IDENTITY, &R_DEFAULT), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn perfect_tracking_without_slip_costs_nothing() {
        let mut config = scenario(ControllerMode::Akc, 1.0, 1e-3);
        config.slip = SlipProfile::constant(1.0, 1.0).unwrap();
        config.initial_pose = RobotPose {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        };
        config.initial_estimates = SlipEstimates {
            a_l_hat: 1.0,
            a_r_hat: 1.0,
        };
        let log = simulate(&config).unwrap();
        assert!(cost_f(&log, &Q_IDENTITY, &R_DEFAULT) < 1e-18);
    }

    #[test]
    fn cost_matches_an_independent_quadrature() {
        let config = scenario(ControllerMode::Akc, 5.0, 0.01);
        let log = simulate(&config).unwrap();
        let integrand: Vec<f64> = log
            .rows
            .iter()
            .map(|row| {
                let e = [row.error.e1, row.error.e2, row.error.e3];
                let eta_ref = reference_input(row.t).body_velocity();
                let xi_ref = wheel_command(&eta_ref, row.a_l, row.a_r, &log.geometry);
                let d = [
                    row.xi.omega_l - xi_ref.omega_l,
                    row.xi.omega_r - xi_ref.omega_r,
                ];
                e.iter().map(|x| x * x).sum::<f64>() + 0.05 * d.iter().map(|x| x * x).sum::<f64>()
            })
            .collect();
        let oracle: f64 = integrand
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]) * log.step)
            .sum();
        assert_relative_eq!(
            cost_f(&log, &Q_IDENTITY, &R_DEFAULT),
            oracle,
            max_relative = 1e-12
        );
    }

    #[test]
    fn truncating_the_log_never_raises_the_cost() {
        let config = scenario(ControllerMode::Akc, 4.0, 0.01);
        let log = simulate(&config).unwrap();
        let full = cost_f(&log, &Q_IDENTITY, &R_DEFAULT);
        let mut truncated = log.clone();
        truncated.rows.truncate(201);
        let half = cost_f(&truncated, &Q_IDENTITY, &R_DEFAULT);
        assert!(half <= full + 1e-15, "half {half} vs full {full}");
    }

    #[test]
    fn singleton_grid_returns_its_only_point() {
        let spec = TuningSpec {
            mode: ControllerMode::Akc,
            k1_grid: vec![1.44],
            k2_grid: vec![10.0],
            k3_grid: vec![1.83],
            gamma1: 3.0,
            gamma2: 3.0,
            q_weight: Q_IDENTITY,
            r_weight: R_DEFAULT,
            scenario: scenario(ControllerMode::Akc, 2.0, 5e-3),
        };
        let result = grid_search(&spec).unwrap();
        assert_eq!(result.entries.len(), 1);
        assert_eq!(result.best.k1, 1.44);
        assert_eq!(result.best.k2, 10.0);
        assert_eq!(result.best.k3, 1.83);
        assert!(result.best_cost.is_finite());
        assert_eq!(result.failures, 0);
        assert_relative_eq!(result.best_cost, result.entries[0].cost);
    }

    #[test]
    fn sweep_matches_a_sequential_loop() {
        let spec = TuningSpec {
            mode: ControllerMode::Nkc,
            k1_grid: vec![0.5, 2.0],
            k2_grid: vec![10.0],
            k3_grid: vec![0.3, 1.83],
            gamma1: 3.0,
            gamma2: 3.0,
            q_weight: Q_IDENTITY,
            r_weight: R_DEFAULT,
            scenario: scenario(ControllerMode::Nkc, 2.0, 5e-3),
        };
        let result = grid_search(&spec).unwrap();
        assert_eq!(result.entries.len(), 4);

        let mut sequential = Vec::new();
        for &(k1, k2, k3) in &spec.candidates() {
            let mut config = spec.scenario.clone();
            config.gains = ControllerGains {
                k1,
                k2,
                k3,
                gamma1: spec.gamma1,
                gamma2: spec.gamma2,
            };
            config.mode = spec.mode;
            let log = simulate(&config).unwrap();
            sequential.push(cost_f(&log, &spec.q_weight, &spec.r_weight));
        }
        for (entry, cost) in result.entries.iter().zip(&sequential) {
            assert_eq!(entry.cost, *cost, "parallel and sequential sweeps diverge");
        }
        let repeat = grid_search(&spec).unwrap();
        assert_eq!(repeat, result);
    }

    #[test]
    fn surface_slice_extracts_a_plane() {
        let entries: Vec<CostEntry> = [
            (1.0, 5.0, 0.1, 3.0),
            (1.0, 5.0, 0.2, 2.0),
            (1.0, 7.0, 0.1, 4.0),
            (1.0, 7.0, 0.2, 5.0),
            (2.0, 5.0, 0.1, 1.0),
            (2.0, 5.0, 0.2, 6.0),
            (2.0, 7.0, 0.1, 7.0),
            (2.0, 7.0, 0.2, 8.0),
        ]
        .iter()
        .map(|&(k1, k2, k3, cost)| CostEntry { k1, k2, k3, cost })
        .collect();
        let result = TuningResult {
            best: ControllerGains::new(2.0, 5.0, 0.1, 3.0, 3.0).unwrap(),
            best_cost: 1.0,
            entries,
            failures: 0,
        };
        let slice = cost_surface_slice(&result, 1, 5.0).unwrap();
        assert_eq!(slice.len(), 4);
        assert_eq!(slice[0], (1.0, 0.1, 3.0));
        assert!(slice.contains(&(2.0, 0.1, 1.0)), "slice keeps the optimum");
        assert!(cost_surface_slice(&result, 3, 5.0).is_err());
        assert!(cost_surface_slice(&result, 1, 6.0).is_err());
    }

    #[test]
    fn bad_weights_are_rejected() {
        let mut spec = TuningSpec {
            mode: ControllerMode::Akc,
            k1_grid: vec![1.0],
            k2_grid: vec![1.0],
            k3_grid: vec![1.0],
            gamma1: 3.0,
            gamma2: 3.0,
            q_weight: Q_IDENTITY,
            r_weight: R_DEFAULT,
            scenario: scenario(ControllerMode::Akc, 1.0, 1e-2),
        };
        spec.q_weight[2][2] = -1.0;
        assert!(spec.validate().is_err());
        spec.q_weight = Q_IDENTITY;
        spec.r_weight = [[0.05, 0.1], [-0.1, 0.05]];
        assert!(spec.validate().is_err());
        spec.r_weight = [[0.0, 0.0], [0.0, 0.0]];
        assert!(spec.validate().is_ok(), "zero R is semidefinite");
        spec.k2_grid.clear();
        assert!(spec.validate().is_err());
    }
}

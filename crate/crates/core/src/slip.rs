//! Time-indexed slip scenarios fed to the simulator.
//!
//! Three built-in profiles cover the usual experiment set: a frozen
//! condition, a stepwise "training" condition with one window per wheel, and
//! a smooth "validation" condition that mixes decaying longitudinal
//! oscillations with a pulse of lateral slip. Arbitrary conditions load from
//! CSV tables and are interpolated linearly.

use std::io::Read;

use crate::error::{Error, Result};
use crate::kinematics::SlipState;

/// 5/3 on the left wheel inside its training window.
const TRAINING_A_L: f64 = 5.0 / 3.0;
/// 5/2 on the right wheel inside its training window.
const TRAINING_A_R: f64 = 5.0 / 2.0;
const TRAINING_L_WINDOW: (f64, f64) = (15.0, 50.0);
const TRAINING_R_WINDOW: (f64, f64) = (30.0, 65.0);

/// A slip scenario evaluable at any time `t >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum SlipProfile {
    /// Frozen longitudinal slip, no lateral slip.
    Constant { a_l: f64, a_r: f64 },
    /// Stepwise slip: `a_l = 5/3` on `[15, 50)`, `a_r = 5/2` on `[30, 65)`,
    /// `a = 1` outside the windows, `sigma = 0`.
    Training,
    /// Smooth time-varying slip on both wheels plus a lateral pulse whose
    /// amplitude is multiplied by `sigma_scale` (1.0 for the nominal case).
    Validation { sigma_scale: f64 },
    /// Piecewise-linear interpolation of tabulated samples.
    Table(SlipTable),
}

impl SlipProfile {
    pub fn constant(a_l: f64, a_r: f64) -> Result<Self> {
        // Construction is the single validation point; evaluation is total.
        SlipState::constant(a_l, a_r)?;
        Ok(SlipProfile::Constant { a_l, a_r })
    }

    pub fn training() -> Self {
        SlipProfile::Training
    }

    pub fn validation() -> Self {
        SlipProfile::Validation { sigma_scale: 1.0 }
    }

    pub fn validation_scaled(sigma_scale: f64) -> Result<Self> {
        if !sigma_scale.is_finite() {
            return Err(Error::domain(format!(
                "sigma_scale = {sigma_scale} must be finite"
            )));
        }
        Ok(SlipProfile::Validation { sigma_scale })
    }

    /// Slip condition at time `t`.
    pub fn evaluate(&self, t: f64) -> SlipState {
        match self {
            SlipProfile::Constant { a_l, a_r } => SlipState {
                a_l: *a_l,
                a_r: *a_r,
                sigma: 0.0,
                a_l_dot: 0.0,
                a_r_dot: 0.0,
            },
            SlipProfile::Training => evaluate_training(t),
            SlipProfile::Validation { sigma_scale } => {
                let mut s = evaluate_validation(t);
                s.sigma *= sigma_scale;
                s
            }
            SlipProfile::Table(table) => table.sample(t),
        }
    }

    /// Time instants where the profile (or its derivative) jumps. The
    /// integrator aligns segment boundaries to these so that no integration
    /// step straddles a jump.
    pub fn discontinuities(&self) -> Vec<f64> {
        match self {
            SlipProfile::Constant { .. } | SlipProfile::Validation { .. } => Vec::new(),
            SlipProfile::Training => vec![
                TRAINING_L_WINDOW.0,
                TRAINING_R_WINDOW.0,
                TRAINING_L_WINDOW.1,
                TRAINING_R_WINDOW.1,
            ],
            SlipProfile::Table(table) => table.rows.iter().map(|r| r.t).collect(),
        }
    }

    /// Supremum of `max(a_l, a_r)` over `[0, horizon]`, estimated on a 1 ms
    /// sampling grid.
    pub fn max_slip_params(&self, horizon: f64) -> f64 {
        let dt = 1e-3;
        let n = (horizon / dt).ceil() as usize;
        let mut sup = f64::MIN;
        for k in 0..=n {
            let t = (k as f64 * dt).min(horizon);
            let s = self.evaluate(t);
            sup = sup.max(s.a_l.max(s.a_r));
        }
        sup
    }
}

/// Frozen slip profile evaluation; rejects parameters below 1.
pub fn evaluate_constant(t: f64, a_l: f64, a_r: f64) -> Result<SlipState> {
    let _ = t;
    SlipState::constant(a_l, a_r)
}

/// Stepwise training profile. Steps carry zero derivative on either side;
/// the jump itself is handled by integration-segment alignment.
pub fn evaluate_training(t: f64) -> SlipState {
    let in_window = |w: (f64, f64)| t >= w.0 && t < w.1;
    SlipState {
        a_l: if in_window(TRAINING_L_WINDOW) { TRAINING_A_L } else { 1.0 },
        a_r: if in_window(TRAINING_R_WINDOW) { TRAINING_A_R } else { 1.0 },
        sigma: 0.0,
        a_l_dot: 0.0,
        a_r_dot: 0.0,
    }
}

/// Smooth validation profile:
/// `a_l(t) = 1 / (0.7 + 0.3 e^(-0.1 t) cos(1.1 t))`,
/// `a_r(t) = 1 / (0.4 + 0.6 e^(-0.08 t) sin^2(0.02 t^2))`,
/// `sigma(t) = 3 e^(-0.03 t) sinc(t - 35)`,
/// with the unnormalized `sinc(x) = sin(x)/x`, `sinc(0) = 1`.
///
/// Both denominators stay in `[0.4, 1.0]`, so `a_l, a_r in [1, 2.5]`.
/// Derivatives are analytic.
pub fn evaluate_validation(t: f64) -> SlipState {
    let env_l = 0.3 * (-0.1 * t).exp();
    let (sin_l, cos_l) = (1.1 * t).sin_cos();
    let den_l = 0.7 + env_l * cos_l;
    let a_l = 1.0 / den_l;
    // d/dt den_l = env_l (-0.1 cos - 1.1 sin); a_l_dot = -den_l_dot / den_l^2
    let a_l_dot = a_l * a_l * env_l * (0.1 * cos_l + 1.1 * sin_l);

    let env_r = 0.6 * (-0.08 * t).exp();
    let u = 0.02 * t * t;
    let sin_u = u.sin();
    let den_r = 0.4 + env_r * sin_u * sin_u;
    let a_r = 1.0 / den_r;
    let den_r_dot = env_r * (-0.08 * sin_u * sin_u + 0.04 * t * (2.0 * u).sin());
    let a_r_dot = -a_r * a_r * den_r_dot;

    let sigma = 3.0 * (-0.03 * t).exp() * sinc(t - 35.0);

    SlipState {
        a_l,
        a_r,
        sigma,
        a_l_dot,
        a_r_dot,
    }
}

/// Unnormalized sinc with the removable singularity filled in.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct TableRow {
    t: f64,
    a_l: f64,
    a_r: f64,
    sigma: f64,
}

/// Tabulated slip samples with strictly increasing times. Evaluation
/// interpolates linearly inside the table and holds the end values (with
/// zero derivative) outside it; derivatives are the active segment slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct SlipTable {
    rows: Vec<TableRow>,
}

impl SlipTable {
    /// Parses a `t,a_l,a_r,sigma` CSV (header required).
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut csv_reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = csv_reader
            .headers()
            .map_err(|e| Error::Table(format!("unreadable header: {e}")))?
            .clone();
        let expected = ["t", "a_l", "a_r", "sigma"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Table(format!(
                "expected header t,a_l,a_r,sigma, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for (idx, record) in csv_reader.records().enumerate() {
            let record = record.map_err(|e| Error::Table(format!("row {}: {e}", idx + 1)))?;
            let mut values = [0.0_f64; 4];
            for (j, field) in record.iter().enumerate().take(4) {
                values[j] = field
                    .parse()
                    .map_err(|e| Error::Table(format!("row {}: {e}", idx + 1)))?;
            }
            rows.push(TableRow {
                t: values[0],
                a_l: values[1],
                a_r: values[2],
                sigma: values[3],
            });
        }
        SlipTable::from_rows(rows)
    }

    fn from_rows(rows: Vec<TableRow>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Table("need at least two samples".into()));
        }
        for pair in rows.windows(2) {
            let (t0, t1) = (pair[0].t, pair[1].t);
            if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
                return Err(Error::Table(format!(
                    "times must be finite and strictly increasing, got {t0} then {t1}"
                )));
            }
        }
        for row in &rows {
            SlipState::new(row.a_l, row.a_r, row.sigma, 0.0, 0.0).map_err(|e| {
                Error::Table(format!("sample at t = {}: {e}", row.t))
            })?;
        }
        Ok(SlipTable { rows })
    }

    fn sample(&self, t: f64) -> SlipState {
        let rows = &self.rows;
        if t <= rows[0].t {
            let r = rows[0];
            return SlipState {
                a_l: r.a_l,
                a_r: r.a_r,
                sigma: r.sigma,
                a_l_dot: 0.0,
                a_r_dot: 0.0,
            };
        }
        if t >= rows[rows.len() - 1].t {
            let r = rows[rows.len() - 1];
            return SlipState {
                a_l: r.a_l,
                a_r: r.a_r,
                sigma: r.sigma,
                a_l_dot: 0.0,
                a_r_dot: 0.0,
            };
        }
        // First row with r.t > t; its predecessor starts the active segment.
        let hi = rows.partition_point(|r| r.t <= t);
        let (lo_row, hi_row) = (rows[hi - 1], rows[hi]);
        let dt = hi_row.t - lo_row.t;
        let w = (t - lo_row.t) / dt;
        let a_l_dot = (hi_row.a_l - lo_row.a_l) / dt;
        let a_r_dot = (hi_row.a_r - lo_row.a_r) / dt;
        SlipState {
            a_l: lo_row.a_l + w * (hi_row.a_l - lo_row.a_l),
            a_r: lo_row.a_r + w * (hi_row.a_r - lo_row.a_r),
            sigma: lo_row.sigma + w * (hi_row.sigma - lo_row.sigma),
            a_l_dot,
            a_r_dot,
        }
    }
}

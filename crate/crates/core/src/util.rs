//! Small shared helpers: the integration timeline and CSV float formatting.

use crate::error::{Error, Result};

/// Uniform sampling grid over `[0, t_final]` with extra forced points where
/// the driving signals jump. Log samples sit at `k * step`; any forced point
/// strictly inside an interval becomes an interior sub-step boundary so no
/// integration step straddles a discontinuity.
#[derive(Debug, Clone)]
pub(crate) struct Timeline {
    step: f64,
    n_steps: usize,
    t_final: f64,
    /// Interval index -> forced times strictly inside that interval, sorted.
    interior: Vec<(usize, Vec<f64>)>,
}

impl Timeline {
    pub(crate) fn new(t_final: f64, step: f64, breakpoints: &[f64]) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::domain(format!(
                "t_final = {t_final} must be finite and > 0"
            )));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::domain(format!("step = {step} must be finite and > 0")));
        }
        let n = (t_final / step).round();
        if n < 1.0 || (n * step - t_final).abs() > 1e-9 * t_final.max(1.0) {
            return Err(Error::domain(format!(
                "t_final = {t_final} must be an integer multiple of step = {step}"
            )));
        }
        let n_steps = n as usize;

        let snap = step * 1e-9;
        let mut sorted: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&b| b > snap && b < t_final - snap)
            .collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted.dedup();

        let mut interior: Vec<(usize, Vec<f64>)> = Vec::new();
        for b in sorted {
            let k = (b / step).floor() as usize;
            let k = k.min(n_steps - 1);
            // Skip points that already coincide with a grid sample.
            if (b - k as f64 * step).abs() <= snap || ((k + 1) as f64 * step - b).abs() <= snap {
                continue;
            }
            match interior.last_mut() {
                Some((idx, pts)) if *idx == k => pts.push(b),
                _ => interior.push((k, vec![b])),
            }
        }

        Ok(Timeline {
            step,
            n_steps,
            t_final,
            interior,
        })
    }

    pub(crate) fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub(crate) fn step(&self) -> f64 {
        self.step
    }

    /// Log sample time for index `k` in `0..=n_steps`. The last sample is
    /// pinned to `t_final` exactly.
    pub(crate) fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_final
        } else {
            k as f64 * self.step
        }
    }

    /// Forced times strictly inside interval `k`.
    pub(crate) fn interior(&self, k: usize) -> &[f64] {
        match self.interior.binary_search_by_key(&k, |(idx, _)| *idx) {
            Ok(pos) => &self.interior[pos].1,
            Err(_) => &[],
        }
    }
}

/// Full-precision float formatting for CSV output (17 significant digits,
/// round-trip exact).
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

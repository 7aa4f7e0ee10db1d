//! Linearized stability certificate for the closed loop.
//!
//! Freezing the reference input and the slip parameters at one instant turns
//! the error dynamics into an autonomous system with an equilibrium at zero
//! error. This module builds its Jacobian there, the characteristic
//! polynomial in closed form, and a Lienard-Chipart stability test that needs
//! no eigenvalue solve; eigenvalue and determinant routes are kept alongside
//! as cross-checks.

use std::fmt;
use std::io::{self, Write};

use nalgebra::{Complex, DMatrix, Matrix5};
use rayon::prelude::*;

use crate::controller::ControllerGains;
use crate::error::{Error, Result};
use crate::kinematics::RobotGeometry;
use crate::reference::reference_input;
use crate::slip::SlipProfile;
use crate::util::fmt_float;

/// Reference input and slip parameters frozen at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenParams {
    pub v_ref: f64,
    pub omega_ref: f64,
    pub a_l: f64,
    pub a_r: f64,
    pub gains: ControllerGains,
    pub geometry: RobotGeometry,
}

impl FrozenParams {
    /// Right-wheel speed scale `b*omega_ref + 2*v_ref` at the equilibrium.
    pub fn v1(&self) -> f64 {
        self.geometry.wheel_spacing * self.omega_ref + 2.0 * self.v_ref
    }

    /// Left-wheel counterpart `b*omega_ref - 2*v_ref`.
    pub fn v2(&self) -> f64 {
        self.geometry.wheel_spacing * self.omega_ref - 2.0 * self.v_ref
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.gains.validate()?;
        if !self.v_ref.is_finite() || !self.omega_ref.is_finite() {
            return Err(Error::domain("frozen reference input must be finite"));
        }
        if !(self.a_l >= 1.0 && self.a_r >= 1.0) || !self.a_l.is_finite() || !self.a_r.is_finite()
        {
            return Err(Error::domain(format!(
                "slip parameters ({}, {}) must be finite and >= 1",
                self.a_l, self.a_r
            )));
        }
        Ok(())
    }
}

/// Jacobian of the frozen-parameter error dynamics at the origin.
pub fn linearization_matrix(p: &FrozenParams) -> Matrix5<f64> {
    let b = p.geometry.wheel_spacing;
    let g = &p.gains;
    let (k1, k2, k3) = (g.k1, g.k2, g.k3);
    let k4 = g.k4();
    let (g1, g2) = (g.gamma1, g.gamma2);
    let (v, w) = (p.v_ref, p.omega_ref);
    let (al, ar) = (p.a_l, p.a_r);
    let (v1, v2) = (p.v1(), p.v2());

    Matrix5::new(
        -k1,
        w,
        k3 * w,
        v2 / (4.0 * al),
        -v1 / (4.0 * ar),
        //
        -w,
        0.0,
        v,
        0.0,
        0.0,
        //
        0.0,
        -k2 * v / 2.0,
        -k4 * v / (2.0 * k3),
        -v2 / (2.0 * b * al),
        -v1 / (2.0 * b * ar),
        //
        -g1 * v2 / 4.0,
        g1 * k3 * v2 / (2.0 * b),
        g1 * k4 * v2 / (2.0 * b * k2),
        0.0,
        0.0,
        //
        g2 * v1 / 4.0,
        g2 * k3 * v1 / (2.0 * b),
        g2 * k4 * v1 / (2.0 * b * k2),
        0.0,
        0.0,
    )
}

/// Monic quintic `s^5 + a1 s^4 + a2 s^3 + a3 s^2 + a4 s + a5`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quintic {
    pub alphas: [f64; 5],
}

impl Quintic {
    /// Coefficient of `s^(5-i)`; index 0 returns the leading 1.
    pub fn coeff(&self, i: usize) -> f64 {
        if i == 0 {
            1.0
        } else {
            self.alphas[i - 1]
        }
    }

    /// Companion matrix with the negated coefficients in the top row.
    pub fn companion(&self) -> Matrix5<f64> {
        let a = &self.alphas;
        Matrix5::new(
            -a[0], -a[1], -a[2], -a[3], -a[4], //
            1.0, 0.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, 0.0,
        )
    }

    pub fn roots(&self) -> [Complex<f64>; 5] {
        let eig = self.companion().complex_eigenvalues();
        [eig[0], eig[1], eig[2], eig[3], eig[4]]
    }

    /// Largest real part over all roots.
    pub fn max_root_real_part(&self) -> f64 {
        self.roots()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Characteristic polynomial of [`linearization_matrix`] in closed form.
///
/// Grouping mirrors how the terms combine: shared wheel-speed scales `v1`,
/// `v2` and the gain aggregate `k4 = 1 + k2 k3^2` keep every coefficient a
/// short rational expression in the physical parameters.
pub fn char_poly_coeffs(p: &FrozenParams) -> Quintic {
    let b = p.geometry.wheel_spacing;
    let g = &p.gains;
    let (k1, k2, k3) = (g.k1, g.k2, g.k3);
    let k4 = g.k4();
    let (g1, g2) = (g.gamma1, g.gamma2);
    let (v, w) = (p.v_ref, p.omega_ref);
    let (al, ar) = (p.a_l, p.a_r);
    let (v1, v2) = (p.v1(), p.v2());
    let (v1s, v2s) = (v1 * v1, v2 * v2);
    let b2 = b * b;

    let alpha1 = k1 + k4 / (2.0 * k3) * v;

    let wheel_mix = k3 * (b2 * k2 + 4.0 * k4);
    let alpha2 = (al * (g2 * v1s * wheel_mix
        + 8.0 * ar * b2 * k2 * (v * (k1 * k4 + k2 * k3 * v) + 2.0 * k3 * w * w))
        + ar * g1 * v2s * wheel_mix)
        / (16.0 * al * ar * b2 * k2 * k3);

    let damping_mix = k2 * v * (k3 * k3 * (b2 * k2 + 8.0) + b2) + 8.0 * k1 * k3 * k4;
    let alpha3 = (ar
        * (16.0 * al * b2 * k2 * v * (k1 * k2 * k3 * v + w * w) + g1 * v2s * damping_mix)
        + al * g2 * v1s * damping_mix)
        / (32.0 * al * ar * b2 * k2 * k3);

    let cross = 4.0 * w * w + 8.0 * k1 * k2 * k3 * v;
    let right_arm = b * k2 * v + 2.0 * w;
    let left_arm = b * k2 * v - 2.0 * w;
    let alpha4 = (g2 * v1s * (al * (right_arm * right_arm + cross) + 2.0 * v2s * g1 * k4)
        + ar * g1 * v2s * (left_arm * left_arm + cross))
        / (32.0 * al * ar * b2 * k2);

    let alpha5 = g1 * g2 * k3 * v * v1s * v2s / (16.0 * al * ar * b2);

    Quintic {
        alphas: [alpha1, alpha2, alpha3, alpha4, alpha5],
    }
}

/// Largest real part over the eigenvalues of the linearization itself,
/// bypassing the closed-form coefficients entirely.
pub fn max_real_eigenvalue(p: &FrozenParams) -> f64 {
    linearization_matrix(p)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Leading principal minors of the 5x5 Hurwitz matrix of `q`.
pub fn hurwitz_determinants(q: &Quintic) -> [f64; 5] {
    let a = &q.alphas;
    #[rustfmt::skip]
    let h = DMatrix::from_row_slice(5, 5, &[
        a[0], a[2], a[4], 0.0,  0.0,
        1.0,  a[1], a[3], 0.0,  0.0,
        0.0,  a[0], a[2], a[4], 0.0,
        0.0,  1.0,  a[1], a[3], 0.0,
        0.0,  0.0,  a[0], a[2], a[4],
    ]);
    let mut out = [0.0; 5];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = h.view((0, 0), (k + 1, k + 1)).clone_owned().determinant();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVerdict {
    Stable,
    Marginal,
    Unstable,
}

impl fmt::Display for StabilityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StabilityVerdict::Stable => "stable",
            StabilityVerdict::Marginal => "marginal",
            StabilityVerdict::Unstable => "unstable",
        })
    }
}

/// Outcome of the determinant-free stability test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LienardChipartReport {
    /// The five tested quantities in order: `a1, a3, a5, c2, c3`.
    pub conditions: [f64; 5],
    pub c2: f64,
    pub c3: f64,
    /// Smallest of the five tested quantities.
    pub min_condition: f64,
    pub verdict: StabilityVerdict,
}

/// Lienard-Chipart test for a monic quintic: Hurwitz stability is equivalent
/// to `a1, a3, a5 > 0` together with the second and fourth Hurwitz minors
/// being positive. Those minors reduce to
///
/// ```text
/// c2 = a1 a2 - a3
/// c3 = (a1 a2 - a3)(a3 a4 - a2 a5) - (a1 a4 - a5)^2
/// ```
///
/// `margin` shifts the acceptance threshold: every quantity must exceed it
/// for a `Stable` verdict. Quantities in `[0, margin]` yield `Marginal`,
/// anything negative `Unstable`.
pub fn lienard_chipart(q: &Quintic, margin: f64) -> LienardChipartReport {
    let [a1, a2, a3, a4, a5] = q.alphas;
    let c2 = a1 * a2 - a3;
    let c3 = c2 * (a3 * a4 - a2 * a5) - (a1 * a4 - a5) * (a1 * a4 - a5);
    let conditions = [a1, a3, a5, c2, c3];
    let min_condition = conditions.into_iter().fold(f64::INFINITY, f64::min);
    let verdict = if min_condition > margin {
        StabilityVerdict::Stable
    } else if min_condition >= 0.0 {
        StabilityVerdict::Marginal
    } else {
        StabilityVerdict::Unstable
    };
    LienardChipartReport {
        conditions,
        c2,
        c3,
        min_condition,
        verdict,
    }
}

/// Analytic lower bounds on the stability conditions under bounded reference
/// inputs, evaluated at one frozen point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginReport {
    /// Whether `v_ref >= mu1` and both wheel-speed scales clear `mu2` here.
    pub preconditions_hold: bool,
    pub alphas: [f64; 5],
    pub alphas_positive: bool,
    pub c2: f64,
    /// Guaranteed floor `mu1 * k1^2 * sqrt(k2)` for `c2`.
    pub c2_bound: f64,
    pub c2_ok: bool,
    pub alpha3: f64,
    /// Guaranteed floor `v_ref^2 k2 k1 / 2` for `alpha3`.
    pub alpha3_bound: f64,
    pub alpha3_ok: bool,
    pub c3: f64,
    pub c3_ok: bool,
    /// All of the above inequalities hold.
    pub bounds_hold: bool,
}

/// Checks the analytic stability margins at `p` for excitation floors `mu1`
/// (forward speed) and `mu2` (wheel-speed scales `|v1|`, `|v2|`).
pub fn proposition_margins(p: &FrozenParams, mu1: f64, mu2: f64) -> MarginReport {
    let q = char_poly_coeffs(p);
    let lc = lienard_chipart(&q, 0.0);
    let g = &p.gains;
    let preconditions_hold =
        mu1 > 0.0 && mu2 > 0.0 && p.v_ref >= mu1 && p.v1().abs() >= mu2 && p.v2().abs() >= mu2;
    let alphas_positive = q.alphas.iter().all(|&a| a > 0.0);
    let c2_bound = mu1 * g.k1 * g.k1 * g.k2.sqrt();
    let alpha3_bound = p.v_ref * p.v_ref * g.k2 * g.k1 / 2.0;
    let c2_ok = lc.c2 > c2_bound;
    let alpha3_ok = q.alphas[2] >= alpha3_bound;
    let c3_ok = lc.c3 > 0.0;
    MarginReport {
        preconditions_hold,
        alphas: q.alphas,
        alphas_positive,
        c2: lc.c2,
        c2_bound,
        c2_ok,
        alpha3: q.alphas[2],
        alpha3_bound,
        alpha3_ok,
        c3: lc.c3,
        c3_ok,
        bounds_hold: alphas_positive && c2_ok && alpha3_ok && c3_ok,
    }
}

/// Certificate evaluated at one scan instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSample {
    pub t: f64,
    pub params: FrozenParams,
    pub quintic: Quintic,
    pub c2: f64,
    pub c3: f64,
    /// Largest eigenvalue real part of the linearization, computed
    /// independently of the closed-form coefficients.
    pub max_re: f64,
    pub verdict: StabilityVerdict,
    /// Largest entrywise rate of change of the linearization at this
    /// instant, by central differences. The frozen-time certificate only
    /// carries over to the time-varying system while this stays small.
    pub max_adot: f64,
    /// The certificate assumes persistent excitation; a vanishing reference
    /// speed at this instant is flagged rather than failed.
    pub zero_v_ref: bool,
}

/// Frozen-parameter certificate sampled along the reference trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityScan {
    pub samples: Vec<ScanSample>,
    pub margin: f64,
}

impl StabilityScan {
    /// Largest entrywise linearization rate over the whole scan.
    pub fn max_adot(&self) -> f64 {
        self.samples.iter().map(|s| s.max_adot).fold(0.0, f64::max)
    }

    /// Number of (stable, marginal, unstable) samples.
    pub fn verdict_counts(&self) -> [usize; 3] {
        let mut counts = [0usize; 3];
        for s in &self.samples {
            counts[match s.verdict {
                StabilityVerdict::Stable => 0,
                StabilityVerdict::Marginal => 1,
                StabilityVerdict::Unstable => 2,
            }] += 1;
        }
        counts
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "t,alpha1,alpha2,alpha3,alpha4,alpha5,c2,c3,maxReLambda,verdict,flag"
        )?;
        for s in &self.samples {
            let a = &s.quintic.alphas;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                fmt_float(s.t),
                fmt_float(a[0]),
                fmt_float(a[1]),
                fmt_float(a[2]),
                fmt_float(a[3]),
                fmt_float(a[4]),
                fmt_float(s.c2),
                fmt_float(s.c3),
                fmt_float(s.max_re),
                s.verdict,
                if s.zero_v_ref { "zero_vref" } else { "" },
            )?;
        }
        Ok(())
    }
}

/// Threshold below which the frozen reference speed counts as vanishing.
pub const ZERO_V_REF_THRESHOLD: f64 = 1e-12;

/// Evaluates the certificate on `[t_start, t_end]` every `sample_dt`,
/// freezing the built-in reference input and `slip` at each sample.
pub fn stability_scan(
    t_start: f64,
    t_end: f64,
    sample_dt: f64,
    slip: &SlipProfile,
    gains: &ControllerGains,
    geometry: &RobotGeometry,
    margin: f64,
) -> Result<StabilityScan> {
    geometry.validate()?;
    gains.validate()?;
    if !(t_start.is_finite() && t_end.is_finite() && t_end > t_start) {
        return Err(Error::domain(format!(
            "scan window [{t_start}, {t_end}] must be finite and increasing"
        )));
    }
    if !(sample_dt > 0.0 && sample_dt.is_finite()) {
        return Err(Error::domain(format!("sample_dt = {sample_dt} must be positive")));
    }
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::domain(format!("margin = {margin} must be >= 0")));
    }

    let span = t_end - t_start;
    let n = (span / sample_dt + 1e-9).floor() as usize;
    let frozen_at = |t: f64| -> FrozenParams {
        let input = reference_input(t);
        let state = slip.evaluate(t);
        FrozenParams {
            v_ref: input.v,
            omega_ref: input.omega,
            a_l: state.a_l,
            a_r: state.a_r,
            gains: *gains,
            geometry: *geometry,
        }
    };
    let fd_dt = 1e-3;
    let samples: Vec<ScanSample> = (0..=n)
        .into_par_iter()
        .map(|k| {
            let t = t_start + k as f64 * sample_dt;
            let params = frozen_at(t);
            let quintic = char_poly_coeffs(&params);
            let report = lienard_chipart(&quintic, margin);

            let t_lo = (t - fd_dt).max(t_start);
            let t_hi = (t + fd_dt).min(t_end);
            let a_lo = linearization_matrix(&frozen_at(t_lo));
            let a_hi = linearization_matrix(&frozen_at(t_hi));
            let max_adot = a_hi
                .iter()
                .zip(a_lo.iter())
                .map(|(hi, lo)| ((hi - lo) / (t_hi - t_lo)).abs())
                .fold(0.0, f64::max);

            ScanSample {
                t,
                params,
                quintic,
                c2: report.c2,
                c3: report.c3,
                max_re: max_real_eigenvalue(&params),
                verdict: report.verdict,
                max_adot,
                zero_v_ref: params.v_ref.abs() < ZERO_V_REF_THRESHOLD,
            }
        })
        .collect();
    Ok(StabilityScan { samples, margin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error_dynamics::{nominal_field, AugmentedError};
    use crate::kinematics::{BodyVelocity, SlipState};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(rng: &mut ChaCha8Rng) -> FrozenParams {
        FrozenParams {
            v_ref: rng.gen_range(0.1..1.0),
            omega_ref: rng.gen_range(-1.0..1.0),
            a_l: rng.gen_range(1.0..2.5),
            a_r: rng.gen_range(1.0..2.5),
            gains: ControllerGains::new(
                rng.gen_range(0.3..5.0),
                rng.gen_range(0.3..10.0),
                rng.gen_range(0.3..5.0),
                rng.gen_range(0.5..6.0),
                rng.gen_range(0.5..6.0),
            )
            .unwrap(),
            geometry: RobotGeometry::default(),
        }
    }

    /// Hand-rolled characteristic polynomial via the trace recursion
    /// M_{k+1} = A (M_k + c_k I), c_{k+1} = -tr(M_{k+1}) / (k+1).
    fn char_poly_by_trace_recursion(a: &Matrix5<f64>) -> [f64; 5] {
        let mut coeffs = [0.0; 5];
        let mut m = *a;
        coeffs[0] = -m.trace();
        for k in 1..5 {
            m = a * (m + Matrix5::identity() * coeffs[k - 1]);
            coeffs[k] = -m.trace() / (k as f64 + 1.0);
        }
        coeffs
    }

    fn poly_from_roots(real: &[f64], pairs: &[(f64, f64)]) -> [f64; 5] {
        // Multiply out (s - r) and (s^2 - 2 re s + re^2 + im^2) factors.
        let mut coeffs = vec![1.0];
        for &r in real {
            let mut next = vec![0.0; coeffs.len() + 1];
            for (i, &c) in coeffs.iter().enumerate() {
                next[i] += c;
                next[i + 1] += -r * c;
            }
            coeffs = next;
        }
        for &(re, im) in pairs {
            let quad = [1.0, -2.0 * re, re * re + im * im];
            let mut next = vec![0.0; coeffs.len() + 2];
            for (i, &c) in coeffs.iter().enumerate() {
                for (j, &q) in quad.iter().enumerate() {
                    next[i + j] += c * q;
                }
            }
            coeffs = next;
        }
        assert_eq!(coeffs.len(), 6);
        [coeffs[1], coeffs[2], coeffs[3], coeffs[4], coeffs[5]]
    }

    #[test]
    fn linearization_matches_finite_difference_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5ab1);
        for _ in 0..60 {
            let p = random_params(&mut rng);
            let a = linearization_matrix(&p);
            let eta_ref = BodyVelocity {
                v_x: p.v_ref,
                omega: p.omega_ref,
            };
            let slip = SlipState::constant(p.a_l, p.a_r).unwrap();
            let scale = 1.0 + a.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            let delta = 1e-5;
            for j in 0..5 {
                let mut plus = [0.0; 5];
                let mut minus = [0.0; 5];
                plus[j] = delta;
                minus[j] = -delta;
                let fp = nominal_field(
                    &AugmentedError::from_array(plus),
                    &eta_ref,
                    &slip,
                    &p.gains,
                    &p.geometry,
                );
                let fm = nominal_field(
                    &AugmentedError::from_array(minus),
                    &eta_ref,
                    &slip,
                    &p.gains,
                    &p.geometry,
                );
                for i in 0..5 {
                    let fd = (fp[i] - fm[i]) / (2.0 * delta);
                    assert!(
                        (a[(i, j)] - fd).abs() <= 1e-6 * scale,
                        "entry ({i}, {j}): closed form {} vs fd {fd}",
                        a[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn closed_form_coefficients_match_trace_recursion() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5ab2);
        for _ in 0..100 {
            let p = random_params(&mut rng);
            let q = char_poly_coeffs(&p);
            let oracle = char_poly_by_trace_recursion(&linearization_matrix(&p));
            for (i, (qa, oa)) in q.alphas.iter().zip(&oracle).enumerate() {
                assert!(
                    (qa - oa).abs() <= 1e-9 * oa.abs().max(1.0),
                    "alpha{}: closed form {qa} vs recursion {oa}",
                    i + 1
                );
            }
        }
    }

    #[test]
    fn companion_roots_recover_known_spectrum() {
        let q = Quintic {
            alphas: poly_from_roots(&[-1.0, -2.0, -3.0], &[(-0.5, 2.0)]),
        };
        assert_relative_eq!(q.max_root_real_part(), -0.5, epsilon = 1e-8);
        let mut roots: Vec<f64> = q.roots().iter().map(|z| z.re).collect();
        roots.sort_by(f64::total_cmp);
        assert_relative_eq!(roots[0], -3.0, epsilon = 1e-8);
    }

    #[test]
    fn lienard_chipart_agrees_with_eigenvalues_on_random_quintics() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5ab3);
        let mut checked = 0;
        for _ in 0..1000 {
            // Real parts bounded away from zero keep the draw clear of the
            // marginal knife edge.
            let sign = |rng: &mut ChaCha8Rng| if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let real = [sign(&mut rng) * rng.gen_range(0.05..2.0)];
            let pairs = [
                (sign(&mut rng) * rng.gen_range(0.05..2.0), rng.gen_range(0.1..3.0)),
                (sign(&mut rng) * rng.gen_range(0.05..2.0), rng.gen_range(0.1..3.0)),
            ];
            let q = Quintic {
                alphas: poly_from_roots(&real, &pairs),
            };
            let max_re = real[0].max(pairs[0].0).max(pairs[1].0);
            let report = lienard_chipart(&q, 0.0);
            if max_re < 0.0 {
                assert_eq!(report.verdict, StabilityVerdict::Stable, "roots {real:?} {pairs:?}");
            } else {
                assert_ne!(report.verdict, StabilityVerdict::Stable, "roots {real:?} {pairs:?}");
            }
            assert_relative_eq!(q.max_root_real_part(), max_re, epsilon = 1e-6);
            checked += 1;
        }
        assert_eq!(checked, 1000);
    }

    #[test]
    fn shortcut_conditions_equal_hurwitz_minors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5ab4);
        for _ in 0..200 {
            let mut alphas = [0.0; 5];
            for a in &mut alphas {
                *a = rng.gen_range(-3.0..3.0);
            }
            let q = Quintic { alphas };
            let minors = hurwitz_determinants(&q);
            let report = lienard_chipart(&q, 0.0);
            assert!(
                (minors[1] - report.c2).abs() <= 1e-10 * minors[1].abs().max(1.0),
                "second minor {} vs c2 {}",
                minors[1],
                report.c2
            );
            assert!(
                (minors[3] - report.c3).abs() <= 1e-10 * minors[3].abs().max(1.0),
                "fourth minor {} vs c3 {}",
                minors[3],
                report.c3
            );
            assert_relative_eq!(minors[0], alphas[0]);
            assert_relative_eq!(
                minors[4],
                alphas[4] * minors[3],
                max_relative = 1e-9,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn zero_adaptation_gains_zero_the_coupling_terms() {
        let p = FrozenParams {
            v_ref: 0.5,
            omega_ref: 0.2,
            a_l: 1.4,
            a_r: 2.0,
            gains: ControllerGains::new(1.44, 10.0, 1.83, 0.0, 0.0).unwrap(),
            geometry: RobotGeometry::default(),
        };
        let a = linearization_matrix(&p);
        for i in 3..5 {
            for j in 0..5 {
                assert_eq!(a[(i, j)], 0.0, "estimate rows must vanish at ({i}, {j})");
            }
        }
        let q = char_poly_coeffs(&p);
        assert_eq!(q.alphas[3], 0.0);
        assert_eq!(q.alphas[4], 0.0);
        assert!(q.alphas[0] > 0.0 && q.alphas[1] > 0.0 && q.alphas[2] > 0.0);
    }

    #[test]
    fn small_adaptation_gains_keep_the_fourth_minor_positive() {
        // The fourth Hurwitz minor vanishes linearly as the adaptation gains
        // go to zero; its sign must stay positive down the decades.
        let mut last = f64::INFINITY;
        for g in [3.0, 0.3, 0.03, 0.003] {
            let p = FrozenParams {
                v_ref: 0.5,
                omega_ref: 0.0,
                a_l: 1.0,
                a_r: 1.0,
                gains: ControllerGains::new(1.44, 10.0, 1.83, g, g).unwrap(),
                geometry: RobotGeometry::default(),
            };
            let report = proposition_margins(&p, 0.1, 0.2);
            assert!(report.c3 > 0.0, "c3 = {} at gamma = {g}", report.c3);
            assert!(report.c3 < last, "c3 should shrink with gamma");
            last = report.c3;
        }
    }

    #[test]
    fn verdict_grading_on_synthetic_polynomials() {
        // (s+1)^5 expands to the binomial row (5, 10, 10, 5, 1).
        let binomial = Quintic {
            alphas: [5.0, 10.0, 10.0, 5.0, 1.0],
        };
        assert_eq!(lienard_chipart(&binomial, 0.0).verdict, StabilityVerdict::Stable);

        // (s+1)^4 (s-0.5) is unstable: the constant coefficient goes negative.
        let unstable = Quintic {
            alphas: poly_from_roots(&[-1.0, -1.0, 0.5], &[(-1.0, 0.0)]),
        };
        assert_eq!(lienard_chipart(&unstable, 0.0).verdict, StabilityVerdict::Unstable);

        // (s+1)^4 s has a root at the origin: marginal at any margin.
        let marginal = Quintic {
            alphas: poly_from_roots(&[-1.0, -1.0, 0.0], &[(-1.0, 0.0)]),
        };
        assert_eq!(lienard_chipart(&marginal, 0.0).verdict, StabilityVerdict::Marginal);
        assert_eq!(lienard_chipart(&marginal, 1e-6).verdict, StabilityVerdict::Marginal);

        // A healthy stable spectrum trips the margin only when asked to.
        let stable = Quintic {
            alphas: poly_from_roots(&[-1.0, -2.0, -3.0], &[(-0.5, 1.0)]),
        };
        assert_eq!(lienard_chipart(&stable, 0.0).verdict, StabilityVerdict::Stable);
        assert_eq!(
            lienard_chipart(&stable, 1e12).verdict,
            StabilityVerdict::Marginal
        );
    }

    #[test]
    fn margins_hold_at_a_nominal_operating_point() {
        let p = FrozenParams {
            v_ref: 0.5,
            omega_ref: 0.2,
            a_l: 5.0 / 3.0,
            a_r: 2.5,
            gains: ControllerGains::new(1.44, 10.0, 1.83, 3.0, 3.0).unwrap(),
            geometry: RobotGeometry::default(),
        };
        p.validate().unwrap();
        let report = proposition_margins(&p, 0.1, 0.2);
        assert!(report.preconditions_hold);
        assert!(report.bounds_hold, "{report:?}");
        assert!(report.c2 > report.c2_bound);
        assert!(report.alpha3 >= report.alpha3_bound);
        assert!(report.c3 > 0.0);

        let slow = FrozenParams { v_ref: 0.05, ..p };
        assert!(!proposition_margins(&slow, 0.1, 0.2).preconditions_hold);
    }

    #[test]
    fn cruise_scan_is_uniformly_stable() {
        let slip = SlipProfile::constant(5.0 / 3.0, 2.5).unwrap();
        let gains = ControllerGains::new(1.44, 10.0, 1.83, 3.0, 3.0).unwrap();
        let scan = stability_scan(
            6.0,
            19.0,
            0.5,
            &slip,
            &gains,
            &RobotGeometry::default(),
            1e-6,
        )
        .unwrap();
        assert_eq!(scan.samples.len(), 27);
        assert_eq!(scan.verdict_counts(), [27, 0, 0]);
        for s in &scan.samples {
            assert!(s.max_re < 0.0, "t = {}: max Re = {}", s.t, s.max_re);
            assert!(!s.zero_v_ref);
        }
        // Constant cruise input and constant slip freeze the linearization.
        assert_eq!(scan.max_adot(), 0.0);

        let mut buf = Vec::new();
        scan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,alpha1,alpha2,alpha3,alpha4,alpha5,c2,c3,maxReLambda,verdict,flag"
        );
        assert_eq!(lines.clone().count(), 27);
        assert!(lines.all(|l| l.split(',').count() == 11));
    }

    #[test]
    fn scan_flags_vanishing_reference_speed() {
        let slip = SlipProfile::constant(1.0, 1.0).unwrap();
        let gains = ControllerGains::new(1.44, 10.0, 1.83, 3.0, 3.0).unwrap();
        // The built-in reference starts from rest at t = 0.
        let scan = stability_scan(
            0.0,
            1.0,
            0.5,
            &slip,
            &gains,
            &RobotGeometry::default(),
            0.0,
        )
        .unwrap();
        assert!(scan.samples[0].zero_v_ref);
        assert_ne!(scan.samples[0].verdict, StabilityVerdict::Stable);
        assert!(!scan.samples[2].zero_v_ref);
    }

    #[test]
    fn scan_rejects_bad_windows() {
        let slip = SlipProfile::constant(1.0, 1.0).unwrap();
        let gains = ControllerGains::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let geom = RobotGeometry::default();
        assert!(stability_scan(5.0, 5.0, 0.1, &slip, &gains, &geom, 0.0).is_err());
        assert!(stability_scan(0.0, 1.0, -0.1, &slip, &gains, &geom, 0.0).is_err());
        assert!(stability_scan(0.0, 1.0, 0.1, &slip, &gains, &geom, -1.0).is_err());
    }
}

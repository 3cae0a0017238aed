//! Continuous arguments along flow trajectories and the spectral-shift
//! densities they define.
//!
//! For w(t) = c_t·m + d_t with m = M₀(z), the lift θ(t) is the continuous
//! branch of arg w with θ(0) = 0 (w(0) = 1). Since d/dt log w = γ·g_t(m) - β,
//! the integral of Im g_t(m) over [t₁, t₂] equals (θ(t₂) - θ(t₁))/γ.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};
use crate::herglotz::{extrapolate, EpsSchedule, Herglotz};
use crate::quad::integrate;
use crate::sl2::{cos_sin, exponential, parameter_window, theta, CaseTag, LieElement};

pub const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftedPoint {
    pub log_modulus: f64,
    pub theta: f64,
}

impl LiftedPoint {
    pub fn sheet(&self) -> i64 {
        (self.theta / TAU).floor() as i64
    }

    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.log_modulus.exp(), self.theta)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub t_grid: Vec<f64>,
    pub points: Vec<LiftedPoint>,
}

impl Trajectory {
    /// Lifted point at the grid node closest to t.
    pub fn at(&self, t: f64) -> LiftedPoint {
        let i = self
            .t_grid
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().partial_cmp(&(b.1 - t).abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        self.points[i]
    }

    pub fn theta_end(&self) -> f64 {
        self.points.last().unwrap().theta
    }

    pub fn theta_start(&self) -> f64 {
        self.points[0].theta
    }
}

/// Tracks arg f from 0 to `t_end`; returns (t, θ, ln|f|) at accepted nodes,
/// starting with t = 0.
fn track<F: Fn(f64) -> Complex64>(f: &F, t_end: f64) -> Result<Vec<(f64, f64, f64)>> {
    let w0 = f(0.0);
    let mut out = vec![(0.0, w0.arg(), w0.norm().ln())];
    if t_end == 0.0 {
        return Ok(out);
    }
    let dir = t_end.signum();
    let span = t_end.abs();
    let max_h = span / 16.0;
    let mut h = span / 64.0;
    let mut t = 0.0f64;
    let mut w = w0;
    let mut th = out[0].1;
    while t < span {
        let step = h.min(span - t);
        let t1 = if step == span - t { span } else { t + step };
        let w1 = f(dir * t1);
        let wm = f(dir * (t + 0.5 * step));
        let d = (w1 / w).arg();
        let d1 = (wm / w).arg();
        let d2 = (w1 / wm).arg();
        let ok = d.abs() < FRAC_PI_2
            && d1.abs() < FRAC_PI_2
            && d2.abs() < FRAC_PI_2
            && (d1 + d2 - d).abs() < 1e-9
            && w1.norm() > 0.0
            && w1.re.is_finite();
        if !ok {
            if step <= MIN_STEP {
                return Err(Error::StepFailure { t: dir * t, min_step: MIN_STEP });
            }
            h = (0.5 * step).max(MIN_STEP * 0.5);
            continue;
        }
        th += d1 + d2;
        t = t1;
        w = w1;
        out.push((dir * t, th, w.norm().ln()));
        h = (2.0 * step).min(max_h);
    }
    Ok(out)
}

/// Continuous-argument lift of w(t) on [min(t1,0), max(t2,0)], normalized at 0.
pub fn lift_trajectory<F: Fn(f64) -> Complex64>(
    x: &LieElement,
    value_at: F,
    t1: f64,
    t2: f64,
) -> Result<Trajectory> {
    if x.gamma == 0.0 {
        return Err(Error::Precondition("γ must be nonzero".into()));
    }
    let neg = track(&value_at, t1.min(0.0))?;
    let pos = track(&value_at, t2.max(0.0))?;
    let mut t_grid = Vec::with_capacity(neg.len() + pos.len());
    let mut points = Vec::with_capacity(neg.len() + pos.len());
    for &(t, th, lm) in neg.iter().rev().chain(pos.iter().skip(1)) {
        t_grid.push(t);
        points.push(LiftedPoint { log_modulus: lm, theta: th });
    }
    Ok(Trajectory { t_grid, points })
}

/// w(t) = c_t m + d_t.
#[inline]
pub fn flow_denominator(x: &LieElement, t: f64, m: Complex64) -> Complex64 {
    let (c, s) = cos_sin(x, t);
    x.gamma * s * m + (c - x.beta * s)
}

/// Lift of c_t m + d_t obtained from the trajectory's structure instead of by
/// stepping. Im w = γ s(t) Im m keeps w in one closed half-plane between
/// consecutive zeros of s, and at those zeros w = ±1. So θ is σkπ plus the
/// argument of (-1)^k w taken in the half-plane of sign σ = sign(γt), where k
/// counts the zeros of s in (0, |t|). A real m is read as m + i0⁺.
pub fn flow_lift(x: &LieElement, t: f64, m: Complex64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let sigma = x.gamma.signum() * t.signum();
    let k = match x.case() {
        CaseTag::CaseI => ((x.omega() * t.abs() / PI).ceil() - 1.0).max(0.0),
        _ => 0.0,
    };
    let mut u = flow_denominator(x, t, m);
    if k % 2.0 == 1.0 {
        u = -u;
    }
    sigma * (k * PI + half_plane_arg(Complex64::new(u.re, sigma * u.im)))
}

/// Argument in [0, π] of a point of the closed upper half-plane, reading the
/// real axis from above.
fn half_plane_arg(u: Complex64) -> f64 {
    if u.im > 0.0 {
        u.im.atan2(u.re)
    } else if u.re < 0.0 {
        PI
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// ∫_{t1}^{t2} Im g_t(z) dt against (θ(t2) - θ(t1))/γ for w = c_t z + d_t.
pub fn check_integral_identity(x: &LieElement, z: Complex64, t1: f64, t2: f64) -> Result<IdentityCheck> {
    if x.gamma == 0.0 {
        return Err(Error::Precondition("γ must be nonzero".into()));
    }
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("{z} is not in the upper half-plane")));
    }
    let mut breaks = Vec::new();
    if x.case() == CaseTag::CaseI {
        let p = PI / x.omega();
        let mut k = (t1.min(t2) / p).floor();
        while k * p < t1.max(t2) {
            breaks.push(k * p);
            breaks.push((k + 0.5) * p);
            k += 1.0;
        }
    }
    let lhs = integrate(|t| exponential(x, t).apply(z).im, t1, t2, &breaks, 1e-13)?.value;
    let th = |t: f64| -> Result<f64> {
        Ok(track(&|s| flow_denominator(x, s, z), t)?.last().unwrap().1)
    };
    let rhs = (th(t2)? - th(t1)?) / x.gamma;
    Ok(IdentityCheck { lhs, rhs, residual: (lhs - rhs).abs() })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct XiPoint {
    pub lambda: f64,
    pub xi: f64,
    pub converged: bool,
    pub residual: f64,
}

/// ξ_t(λ) = (1/π) lim_{ε↓0} θ_t(λ+iε): the lift is tracked in t at each ε of
/// the schedule, then the ε-sequence is extrapolated.
pub fn xi_at<H: Herglotz + ?Sized>(
    x: &LieElement,
    m0: &H,
    t: f64,
    lambda: f64,
    sched: &EpsSchedule,
) -> Result<XiPoint> {
    if x.gamma == 0.0 {
        return Err(Error::Precondition("γ must be nonzero".into()));
    }
    if t == 0.0 {
        return Ok(XiPoint { lambda, xi: 0.0, converged: true, residual: 0.0 });
    }
    let mut samples = Vec::new();
    for eps in sched.grid() {
        let m = m0.eval(Complex64::new(lambda, eps));
        if m.im <= 0.0 {
            return Err(Error::Precondition(format!("M₀({lambda}+i{eps}) is real")));
        }
        let tr = track(&|s| flow_denominator(x, s, m), t)?;
        samples.push(Complex64::new(tr.last().unwrap().1, 0.0));
    }
    let l = extrapolate(&samples, sched);
    Ok(XiPoint { lambda, xi: l.value.re / PI, converged: l.converged, residual: l.residual / PI })
}

/// Same quantity from the structural lift, with the ε-limit taken on M₀ first.
/// Valid wherever the boundary value of M₀ exists.
pub fn xi_at_boundary(x: &LieElement, t: f64, m0_boundary: Complex64) -> f64 {
    flow_lift(x, t, m0_boundary) / PI
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct XiSample {
    pub lambda_grid: Vec<f64>,
    pub xi_values: Vec<f64>,
    pub converged: Vec<bool>,
    pub t1: f64,
    pub t2: f64,
    pub gamma: f64,
}

impl XiSample {
    pub fn to_csv(&self, x: &LieElement, sched: &EpsSchedule) -> String {
        let mut s = format!(
            "# X=({},{},{}) t1={} t2={} eps_max={} eps_min={} points_per_decade={} extrapolation={:?}\n",
            x.alpha, x.beta, x.gamma, self.t1, self.t2, sched.eps_max, sched.eps_min,
            sched.points_per_decade, sched.extrapolation
        );
        s.push_str("lambda,xi\n");
        for (l, v) in self.lambda_grid.iter().zip(&self.xi_values) {
            s.push_str(&format!("{l},{v}\n"));
        }
        s
    }
}

/// ξ_{t1,t2} = (ξ_{t2} - ξ_{t1})/γ on a λ-grid.
pub fn xi_density<H: Herglotz + ?Sized>(
    x: &LieElement,
    m0: &H,
    t1: f64,
    t2: f64,
    lambda_grid: &[f64],
    sched: &EpsSchedule,
) -> Result<XiSample> {
    use rayon::prelude::*;
    let rows: Vec<Result<(f64, bool)>> = lambda_grid
        .par_iter()
        .map(|&l| {
            if t1 == t2 {
                return Ok((0.0, true));
            }
            let a = xi_at(x, m0, t1, l, sched)?;
            let b = xi_at(x, m0, t2, l, sched)?;
            Ok(((b.xi - a.xi) / x.gamma, a.converged && b.converged))
        })
        .collect();
    let mut xi_values = Vec::with_capacity(rows.len());
    let mut converged = Vec::with_capacity(rows.len());
    for r in rows {
        let (v, c) = r?;
        xi_values.push(v);
        converged.push(c);
    }
    Ok(XiSample { lambda_grid: lambda_grid.to_vec(), xi_values, converged, t1, t2, gamma: x.gamma })
}

/// (1/π)∫_{t1}^{t2} Im M_t(λ+iε) dt, which tends to ξ_{t1,t2}(λ) as ε ↓ 0.
pub fn xi_consistency<H: Herglotz + ?Sized>(
    x: &LieElement,
    m0: &H,
    t1: f64,
    t2: f64,
    lambda: f64,
    eps: f64,
) -> Result<f64> {
    let m = m0.eval(Complex64::new(lambda, eps));
    let mut breaks = vec![0.0];
    if x.case() == CaseTag::CaseI {
        let p = PI / x.omega();
        let mut k = (t1 / p).floor();
        while k * p < t2 {
            breaks.push(k * p);
            k += 1.0;
        }
    }
    // Atom crossings of the real boundary value become spikes of width ~ε.
    for t in crossing_times(x, m.re * x.gamma - x.beta, t1, t2) {
        breaks.push(t);
    }
    let v = integrate(|t| exponential(x, t).apply(m).im, t1, t2, &breaks, 1e-11)?;
    Ok(v.value / PI)
}

/// Times in (t1, t2) where Θ(t)·m̃ + 1 = 0 for real m̃, i.e. where the flowed
/// function has a pole at the current point.
pub fn crossing_times(x: &LieElement, m_tilde: f64, t1: f64, t2: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if m_tilde == 0.0 || !m_tilde.is_finite() {
        return out;
    }
    let r = -1.0 / m_tilde;
    match x.case() {
        CaseTag::CaseII => out.push(r),
        CaseTag::CaseIII => {
            let w = x.omega();
            let v = r * w;
            if v.abs() < 1.0 {
                out.push(v.atanh() / w);
            }
        }
        CaseTag::CaseI => {
            let w = x.omega();
            let p = PI / w;
            let base = (r * w).atan() / w;
            let mut k = ((t1 - base) / p).floor();
            while base + k * p <= t2 {
                out.push(base + k * p);
                k += 1.0;
            }
        }
    }
    out.retain(|&t| t > t1 && t < t2);
    out
}

fn arg_closed_upper(v: Complex64) -> f64 {
    half_plane_arg(Complex64::new(v.re, v.im.max(0.0)))
}

/// ξ_{t1,t2}(λ) = 1/γ + (1/(γπ))·(arg(Θ(t₂)m̃+1) - arg(-Θ(t₁)m̃-1)) with
/// m̃ = γm₀ - β, where m₀ is the boundary value of M₀ at λ. Arguments of
/// numerator and denominator are taken separately, each reading the real
/// axis from above.
pub fn xi_closed_form(x: &LieElement, m0_boundary: Complex64, t1: f64, t2: f64) -> Result<f64> {
    if !(x.gamma > 0.0) {
        return Err(Error::Precondition("closed form needs γ > 0".into()));
    }
    if !(t1 < 0.0 && 0.0 < t2) {
        return Err(Error::Precondition(format!("closed form needs t1 < 0 < t2, got ({t1}, {t2})")));
    }
    if x.case() == CaseTag::CaseI {
        let (a, b) = parameter_window(x);
        if !(t1 > a && t2 < b) {
            return Err(Error::Precondition(format!("({t1}, {t2}) leaves the window ({a}, {b})")));
        }
    }
    let m = x.gamma * m0_boundary - x.beta;
    let th1 = theta(x, t1)?;
    let th2 = theta(x, t2)?;
    let n = th2 * m + 1.0;
    let d = -th1 * m - 1.0;
    if n.norm() == 0.0 || d.norm() == 0.0 {
        return Err(Error::Domain("λ sits exactly on a jump of ξ".into()));
    }
    Ok(1.0 / x.gamma + (arg_closed_upper(n) - arg_closed_upper(d)) / (x.gamma * PI))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GlobalXi {
    /// Limit of the closed form over the full parameter range.
    pub value: f64,
    /// The variant built from (π m̃ + 2ω)/(π m̃ - 2ω), reported for comparison.
    pub printed_variant: f64,
}

pub fn xi_global(x: &LieElement, m0_boundary: Complex64) -> Result<GlobalXi> {
    if !(x.gamma > 0.0) {
        return Err(Error::Precondition("global density needs γ > 0".into()));
    }
    let g = x.gamma;
    if x.case() != CaseTag::CaseIII {
        return Ok(GlobalXi { value: 1.0 / g, printed_variant: 1.0 / g });
    }
    let w = x.omega();
    let m = g * m0_boundary - x.beta;
    let ratio = |p: Complex64, q: Complex64| (arg_closed_upper(p) - arg_closed_upper(q)) / (g * PI);
    Ok(GlobalXi {
        value: 1.0 / g + ratio(m + w, m - w),
        printed_variant: 1.0 / g + ratio(PI * m + 2.0 * w, PI * m - 2.0 * w),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herglotz::{ConstantHerglotz, FnHerglotz};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    const PAR: LieElement = LieElement::new(0.0, 0.0, 1.0);
    const ROT: LieElement = LieElement::new(-1.0, 0.0, 1.0);
    const HYP: LieElement = LieElement::new(1.0, 0.0, 1.0);

    #[test]
    fn lift_examples() {
        let tr = lift_trajectory(&PAR, |t| Complex64::new(1.0, t), 0.0, 1.0).unwrap();
        assert!((tr.theta_end() - FRAC_PI_4).abs() < 1e-14);
        let tr = lift_trajectory(&ROT, |t| Complex64::from_polar(1.0, t), 0.0, 3.0 * PI).unwrap();
        assert!((tr.theta_end() - 3.0 * PI).abs() < 1e-12);
        assert_eq!(tr.points.last().unwrap().sheet(), 1);
        let tr = lift_trajectory(&ROT, |t| flow_denominator(&ROT, t, Complex64::i()), -2.0, 2.0).unwrap();
        let i0 = tr.t_grid.iter().position(|&t| t == 0.0).unwrap();
        assert_eq!(tr.points[i0].theta, 0.0);
        assert_eq!(tr.points[i0].log_modulus, 0.0);
        assert!(lift_trajectory(&LieElement::new(1.0, 0.0, 0.0), |_| Complex64::new(1.0, 0.0), 0.0, 1.0).is_err());
    }

    #[test]
    fn sheet_crossings_for_the_rotation() {
        let tr = lift_trajectory(&ROT, |t| flow_denominator(&ROT, t, Complex64::i()), -1.0, 7.5 * PI).unwrap();
        for (t, p) in tr.t_grid.iter().zip(&tr.points) {
            assert!((p.theta - t).abs() < 1e-10);
            assert!((p.value() - Complex64::from_polar(1.0, *t)).norm() < 1e-12);
        }
    }

    #[test]
    fn step_failure_when_trajectory_hits_zero() {
        let r = lift_trajectory(&PAR, |t| Complex64::new(1.0 - t, 0.0), 0.0, 2.0);
        assert!(matches!(r, Err(Error::StepFailure { .. })));
    }

    #[test]
    fn integral_identity_closed_cases() {
        for t in [0.5, 3.0, 20.0] {
            let c = check_integral_identity(&PAR, Complex64::i(), 0.0, t).unwrap();
            assert!((c.lhs - t.atan()).abs() < 1e-10 && c.residual < 1e-10);
            let c = check_integral_identity(&ROT, Complex64::i(), 0.0, t).unwrap();
            assert!((c.rhs - t).abs() < 1e-10 && c.residual < 1e-10);
        }
        assert!(check_integral_identity(&LieElement::new(1.0, 0.0, 0.0), Complex64::i(), 0.0, 1.0).is_err());
    }

    #[test]
    fn structural_lift_agrees_with_tracking() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = LieElement::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let m = Complex64::new(rng.gen_range(-3.0..3.0), 10f64.powf(rng.gen_range(-4.0..0.5)));
            let t = rng.gen_range(-8.0..8.0);
            let tr = track(&|s| flow_denominator(&x, s, m), t).unwrap();
            let a = tr.last().unwrap().1;
            let b = flow_lift(&x, t, m);
            assert!((a - b).abs() < 1e-9, "{x:?} m={m} t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn xi_examples() {
        let s = EpsSchedule::default();
        let delta = FnHerglotz(|z: Complex64| -1.0 / z);
        assert!((xi_at(&PAR, &delta, 2.0, 1.0, &s).unwrap().xi - 1.0).abs() < 1e-8);
        assert!(xi_at(&PAR, &delta, 2.0, 3.0, &s).unwrap().xi.abs() < 1e-8);
        assert_eq!(xi_at(&ROT, &delta, 0.0, 3.0, &s).unwrap().xi, 0.0);
        let ci = ConstantHerglotz { re: 0.0, im: 1.0 };
        for t in [0.3, 2.0, 9.0] {
            assert!((xi_at(&ROT, &ci, t, 0.7, &s).unwrap().xi - t / PI).abs() < 1e-9);
        }
        let d = xi_density(&ROT, &ci, -1.0, 2.5, &[-3.0, 0.0, 5.0], &s).unwrap();
        assert!(d.xi_values.iter().all(|v| (v - 3.5 / PI).abs() < 1e-9));
        let d = xi_density(&PAR, &delta, 0.0, 3.0, &[-1.0, 0.5, 2.9, 3.1], &s).unwrap();
        let expect = [0.0, 1.0, 1.0, 0.0];
        for (v, e) in d.xi_values.iter().zip(expect) {
            assert!((v - e).abs() < 1e-8);
        }
        let d = xi_density(&PAR, &delta, 1.0, 1.0, &[0.5], &s).unwrap();
        assert_eq!(d.xi_values[0], 0.0);
    }

    #[test]
    fn closed_form_examples_and_branch_rule() {
        let m = Complex64::new(-1.0, 0.0);
        assert!((xi_closed_form(&PAR, m, -1.0, 2.0).unwrap() - 1.0).abs() < 1e-15);
        let m = Complex64::new(-1.0 / 3.0, 0.0);
        assert!(xi_closed_form(&PAR, m, -1.0, 2.0).unwrap().abs() < 1e-15);
        // the naive principal logarithm of the real ratio lands on the wrong sheet
        let ratio = (2.0 * m.re + 1.0) / (m.re - 1.0);
        let naive = 1.0 + Complex64::new(ratio, 0.0).ln().im / PI;
        assert!((naive - 2.0).abs() < 1e-15);
        let g = xi_global(&HYP, Complex64::i()).unwrap();
        assert!((g.value - 0.5).abs() < 1e-15);
        assert!((g.printed_variant - 0.639).abs() < 1e-3);
        assert!(xi_closed_form(&ROT, m, -1.0, 2.0).is_err());
        assert_eq!(xi_global(&PAR, m).unwrap().value, 1.0);
        assert_eq!(xi_global(&ROT, m).unwrap().value, 1.0);
    }

    #[test]
    fn closed_form_matches_winding_limit() {
        let s = EpsSchedule::default();
        let delta = FnHerglotz(|z: Complex64| -1.0 / z);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let l = rng.gen_range(-4.0..4.0);
            let a = xi_density(&PAR, &delta, -1.0, 2.0, &[l], &s).unwrap().xi_values[0];
            let b = xi_closed_form(&PAR, Complex64::new(-1.0 / l, 0.0), -1.0, 2.0).unwrap();
            assert!((a - b).abs() < 1e-6, "λ={l}: {a} vs {b}");
            assert!((a - a.round()).abs() < 1e-6);
        }
    }

    #[test]
    fn consistency_quadrature_tends_to_xi() {
        let delta = FnHerglotz(|z: Complex64| -1.0 / z);
        let v = xi_consistency(&PAR, &delta, -1.0, 2.0, 1.0, 1e-7).unwrap();
        assert!((v - 1.0).abs() < 1e-5);
        let v = xi_consistency(&PAR, &delta, -1.0, 2.0, 3.0, 1e-7).unwrap();
        assert!(v.abs() < 1e-5);
    }
}

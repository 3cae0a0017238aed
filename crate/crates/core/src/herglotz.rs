//! Herglotz functions: evaluation, boundary values and measure recovery.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::contour::{self, Inversion};
use crate::error::{Error, Result};
use crate::measure::MeasureSpec;

/// Anything that maps the upper half-plane into its closure.
pub trait Herglotz: Sync {
    /// M(z) for Im z > 0. Implementations may assume the precondition.
    fn eval(&self, z: Complex64) -> Complex64;
}

impl<T: Herglotz + ?Sized> Herglotz for &T {
    fn eval(&self, z: Complex64) -> Complex64 {
        (**self).eval(z)
    }
}

impl<T: Herglotz + ?Sized + Send> Herglotz for Box<T> {
    fn eval(&self, z: Complex64) -> Complex64 {
        (**self).eval(z)
    }
}

/// M(z) = Az + B + ∫(1/(λ-z) - λ/(1+λ²)) dμ(λ).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HerglotzRep {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub mu: MeasureSpec,
    #[serde(skip)]
    shift: OnceLock<f64>,
}

impl PartialEq for HerglotzRep {
    fn eq(&self, o: &Self) -> bool {
        self.a == o.a && self.b == o.b && self.mu == o.mu
    }
}

impl HerglotzRep {
    pub fn new(a: f64, b: f64, mu: MeasureSpec) -> Result<Self> {
        let h = HerglotzRep { a, b, mu, shift: OnceLock::new() };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(Error::Invalid(format!("linear coefficient A = {} must be >= 0", self.a)));
        }
        if !self.b.is_finite() {
            return Err(Error::Invalid("constant B must be finite".into()));
        }
        self.mu.validate()
    }

    /// True when M is a real constant (A = 0 and μ = 0).
    pub fn is_real_constant(&self) -> bool {
        self.a == 0.0 && self.mu.is_empty()
    }

    /// ∫ λ/(1+λ²) dμ.
    fn shift(&self) -> f64 {
        *self.shift.get_or_init(|| self.mu.stieltjes(Complex64::i()).re)
    }

    /// Evaluation at any non-real z; the closed forms continue analytically
    /// into the lower half-plane, where M(z̄) = conj M(z).
    pub fn eval_any(&self, z: Complex64) -> Complex64 {
        self.a * z + self.b + self.mu.stieltjes(z) - self.shift()
    }
}

impl Herglotz for HerglotzRep {
    fn eval(&self, z: Complex64) -> Complex64 {
        self.eval_any(z)
    }
}

/// The constant function M ≡ w with Im w ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantHerglotz {
    pub re: f64,
    pub im: f64,
}

impl Herglotz for ConstantHerglotz {
    fn eval(&self, _z: Complex64) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// A closure viewed as a Herglotz function.
pub struct FnHerglotz<F>(pub F);

impl<F: Fn(Complex64) -> Complex64 + Sync> Herglotz for FnHerglotz<F> {
    fn eval(&self, z: Complex64) -> Complex64 {
        (self.0)(z)
    }
}

pub fn evaluate<H: Herglotz + ?Sized>(h: &H, z: Complex64) -> Result<Complex64> {
    if !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain(format!("evaluation point {z} is not in the upper half-plane")));
    }
    Ok(h.eval(z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extrapolation {
    None,
    Richardson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsSchedule {
    pub eps_max: f64,
    pub eps_min: f64,
    pub points_per_decade: u32,
    pub extrapolation: Extrapolation,
    /// Cauchy tolerance on successive extrapolated values.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-6
}

impl Default for EpsSchedule {
    fn default() -> Self {
        EpsSchedule {
            eps_max: 1e-2,
            eps_min: 1e-8,
            points_per_decade: 8,
            extrapolation: Extrapolation::Richardson,
            tol: 1e-6,
        }
    }
}

impl EpsSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_min > 0.0 && self.eps_min < self.eps_max && self.points_per_decade > 0) {
            return Err(Error::Invalid(format!("bad epsilon schedule {self:?}")));
        }
        Ok(())
    }

    pub fn ratio(&self) -> f64 {
        10f64.powf(-1.0 / self.points_per_decade as f64)
    }

    /// Decreasing geometric grid from eps_max down to eps_min.
    pub fn grid(&self) -> Vec<f64> {
        let q = self.ratio();
        let decades = (self.eps_max / self.eps_min).log10();
        let n = (decades * self.points_per_decade as f64).round() as usize;
        (0..=n).map(|k| self.eps_max * q.powi(k as i32)).collect()
    }
}

/// Outcome of an ε ↓ 0 limit on the geometric grid.
#[derive(Debug, Clone, Copy)]
pub struct Limit<T> {
    pub value: T,
    pub residual: f64,
    pub converged: bool,
}

/// Extrapolates samples f(ε_k) on the schedule grid. Order-1 Richardson on a
/// geometric grid: R_k = (f_k - q f_{k-1})/(1 - q).
pub fn extrapolate(samples: &[Complex64], sched: &EpsSchedule) -> Limit<Complex64> {
    let n = samples.len();
    let q = sched.ratio();
    let seq: Vec<Complex64> = match sched.extrapolation {
        Extrapolation::None => samples.to_vec(),
        Extrapolation::Richardson => {
            (1..n).map(|k| (samples[k] - q * samples[k - 1]) / (1.0 - q)).collect()
        }
    };
    let m = seq.len();
    let value = seq[m - 1];
    let residual = if m >= 2 { (seq[m - 1] - seq[m - 2]).norm() } else { f64::INFINITY };
    let converged = value.re.is_finite()
        && value.im.is_finite()
        && residual <= sched.tol * value.norm().max(1.0);
    Limit { value, residual, converged }
}

fn sample<F: Fn(f64) -> Complex64>(f: F, sched: &EpsSchedule) -> Vec<Complex64> {
    sched.grid().into_iter().map(f).collect()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundaryValue {
    pub lambda: f64,
    pub re: f64,
    pub im: f64,
    pub converged: bool,
    pub residual: f64,
}

impl BoundaryValue {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

pub fn boundary_value<H: Herglotz + ?Sized>(h: &H, lambda: f64, sched: &EpsSchedule) -> BoundaryValue {
    let s = sample(|e| h.eval(Complex64::new(lambda, e)), sched);
    let l = extrapolate(&s, sched);
    BoundaryValue {
        lambda,
        re: l.value.re,
        im: l.value.im.max(0.0),
        converged: l.converged,
        residual: l.residual,
    }
}

/// Interval mass μ((lo,hi)) + ½μ({lo}) + ½μ({hi}) recovered from M alone.
pub fn stieltjes_invert<H: Herglotz + ?Sized>(
    h: &H,
    lo: f64,
    hi: f64,
    sched: &EpsSchedule,
) -> Result<f64> {
    let r = stieltjes_invert_detailed(h, lo, hi)?;
    if !(r.error <= sched.tol.max(1e-9) * r.value.abs().max(1.0)) {
        return Err(Error::Quadrature(format!(
            "inversion on ({lo}, {hi}) unstable: estimate {} ± {}",
            r.value, r.error
        )));
    }
    Ok(r.value.max(0.0))
}

pub fn stieltjes_invert_detailed<H: Herglotz + ?Sized>(h: &H, lo: f64, hi: f64) -> Result<Inversion> {
    if !(lo < hi) {
        return Err(Error::Precondition(format!("inversion needs lo < hi, got ({lo}, {hi})")));
    }
    Ok(contour::invert(|z| h.eval(z), lo, hi))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AtomMass {
    pub mass: f64,
    /// lim ε·Re M(λ₀+iε), which must vanish.
    pub re_limit: f64,
    pub residual: f64,
    pub converged: bool,
}

/// lim (-iε) M(λ₀+iε), split into the mass and the vanishing real companion.
///
/// Near singular continuous mass the correction decays like ε^κ with κ < 1,
/// which the fixed-exponent Richardson step leaves in place. The mass is then
/// taken from an Aitken step, which estimates the exponent from the data,
/// whenever that has the smaller residual.
pub fn atom_mass<H: Herglotz + ?Sized>(h: &H, lambda0: f64, sched: &EpsSchedule) -> AtomMass {
    let s = sample(|e| Complex64::new(0.0, -e) * h.eval(Complex64::new(lambda0, e)), sched);
    let l = extrapolate(&s, sched);
    let pick = |part: fn(&Complex64) -> f64| {
        let seq: Vec<f64> = s.iter().map(part).collect();
        let richardson = (part(&l.value), l.residual);
        match aitken(&seq) {
            Some(a) if a.1 < richardson.1 => a,
            _ => richardson,
        }
    };
    let (mass, residual) = pick(|v| v.re);
    let (re_limit, _) = pick(|v| -v.im);
    AtomMass {
        mass: mass.max(0.0),
        re_limit,
        residual,
        converged: residual <= sched.tol * mass.abs().max(1.0),
    }
}

/// Aitken Δ² limit of the last three samples and its change against the
/// previous triple. Requires a geometric error of one sign.
fn aitken(f: &[f64]) -> Option<(f64, f64)> {
    let est = |k: usize| {
        let (a, b, c) = (f[k - 2], f[k - 1], f[k]);
        let d2 = c - 2.0 * b + a;
        if d2 == 0.0 || (c - b) * (b - a) <= 0.0 {
            None
        } else {
            Some(c - (c - b) * (c - b) / d2)
        }
    };
    let n = f.len();
    if n < 4 {
        return None;
    }
    let (x, y) = (est(n - 1)?, est(n - 2)?);
    Some((x, (x - y).abs()))
}

/// Real boundary value m = M(λ₀) and normal derivative M'(λ₀) > 0 at a point
/// where ε⁻¹ Im M(λ₀+iε) has a finite positive limit.
pub fn normal_derivative<H: Herglotz + ?Sized>(
    h: &H,
    lambda0: f64,
    sched: &EpsSchedule,
) -> Result<(f64, f64)> {
    let bv = boundary_value(h, lambda0, sched);
    let eps_min = *sched.grid().last().unwrap();
    if !bv.converged || bv.im > 10.0 * sched.tol.max(eps_min) {
        return Err(Error::Precondition(format!(
            "boundary value at {lambda0} is not real (Im ≈ {}, converged = {})",
            bv.im, bv.converged
        )));
    }
    let s = sample(|e| Complex64::new(h.eval(Complex64::new(lambda0, e)).im / e, 0.0), sched);
    let l = extrapolate(&s, sched);
    let d = l.value.re;
    if !l.converged || !(d > 0.0) || !d.is_finite() {
        return Err(Error::Precondition(format!(
            "ε⁻¹ Im M(λ₀+iε) has no finite positive limit at {lambda0} (estimate {d})"
        )));
    }
    Ok((bv.re, d))
}

/// A = lim_{y→∞} M(iy)/(iy) by quadratic extrapolation in h = 1/y.
pub fn coefficient_a<H: Herglotz + ?Sized>(h: &H) -> Result<f64> {
    let est = |ys: [f64; 3]| {
        let hs = ys.map(|y| 1.0 / y);
        let fs = ys.map(|y| (h.eval(Complex64::new(0.0, y)) / Complex64::new(0.0, y)).re);
        // Lagrange interpolation evaluated at h = 0
        let mut v = 0.0;
        for i in 0..3 {
            let mut l = 1.0;
            for j in 0..3 {
                if i != j {
                    l *= hs[j] / (hs[j] - hs[i]);
                }
            }
            v += fs[i] * l;
        }
        v
    };
    let a = est([1e2, 1e3, 1e4]);
    let b = est([1e3, 1e4, 1e5]);
    if !a.is_finite() || (a - b).abs() > 1e-6 * a.abs().max(1.0) {
        return Err(Error::NonConvergence(format!("linear coefficient estimates {a} and {b} disagree")));
    }
    Ok(if a.abs() < 1e-9 { 0.0 } else { a })
}

pub fn coefficient_b<H: Herglotz + ?Sized>(h: &H) -> f64 {
    h.eval(Complex64::i()).re
}

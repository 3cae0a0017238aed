//! The flow M_t = e^{tX}·M₀ at the level of measures, and its averages in t.
//!
//! Interval masses of μ_t come from one contour rule whose M₀ values are
//! cached, so a t-quadrature costs one Möbius map per node and sample.
//! The ξ side is integrated over λ by the same rule applied to the analytic
//! function (Ln w_{t2} - Ln w_{t1})/γ, whose imaginary part on the real axis
//! is πξ_{t1,t2}.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::contour::ContourRule;
use crate::error::{Error, Result};
use crate::herglotz::{boundary_value, coefficient_a, coefficient_b, EpsSchedule, FnHerglotz, Herglotz, HerglotzRep};
use crate::measure::{AcPiece, Atom, Density, MeasureSpec};
use crate::quad::{integrate, inverse_square_tail, Tail};
use crate::sl2::{cos_sin, exponential, parameter_window, CaseTag, LieElement};
use crate::winding::{crossing_times, flow_denominator, flow_lift, xi_density, XiSample};

/// Quadrature tolerance of the t-integrals.
pub const T_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalMass {
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowState {
    pub t: f64,
    #[serde(rename = "A_t")]
    pub a_t: f64,
    #[serde(rename = "B_t")]
    pub b_t: f64,
    pub interval_masses: Vec<IntervalMass>,
}

/// M₀ values on a contour rule, reused for every t.
pub struct CachedRule {
    rule: ContourRule,
    values: Vec<Complex64>,
}

impl CachedRule {
    pub fn new<H: Herglotz + ?Sized>(m0: &H, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::Precondition(format!("interval needs lo < hi, got ({lo}, {hi})")));
        }
        let rule = ContourRule::limit(lo, hi).refined(None);
        let values = rule.nodes.par_iter().map(|&z| m0.eval(z)).collect();
        Ok(CachedRule { rule, values })
    }

    /// μ_t((lo,hi)) with half weights on endpoint atoms.
    pub fn mass_at(&self, x: &LieElement, t: f64) -> f64 {
        let g = exponential(x, t);
        let s: Complex64 = self.rule.weights.iter().zip(&self.values).map(|(w, m)| w * g.apply(*m)).sum();
        (s.im / PI).max(0.0)
    }

    /// (1/π)∫_lo^hi Im F with F evaluated from the cached M₀ values.
    pub fn apply_map<F: Fn(Complex64) -> Complex64 + Sync>(&self, f: F) -> f64 {
        let vals: Vec<Complex64> = self.values.par_iter().map(|&m| f(m)).collect();
        self.rule.apply_values(&vals)
    }
}

fn m_t<'a, H: Herglotz + ?Sized>(x: &'a LieElement, m0: &'a H, t: f64) -> impl Fn(Complex64) -> Complex64 + Sync + 'a {
    let g = exponential(x, t);
    move |z| g.apply(m0.eval(z))
}

pub fn flow_state<H: Herglotz + ?Sized>(
    x: &LieElement,
    m0: &H,
    t: f64,
    intervals: &[(f64, f64)],
    sched: &EpsSchedule,
) -> Result<FlowState> {
    sched.validate()?;
    let mt = FnHerglotz(m_t(x, m0, t));
    let mut interval_masses = Vec::with_capacity(intervals.len());
    for &(lo, hi) in intervals {
        let mass = crate::herglotz::stieltjes_invert(&mt, lo, hi, sched)?;
        interval_masses.push(IntervalMass { lo, hi, mass });
    }
    let a_t = coefficient_a(&mt)?;
    let (_, s) = cos_sin(x, t);
    if x.gamma * s != 0.0 && a_t.abs() > 1e-8 {
        return Err(Error::NonConvergence(format!("A_t = {a_t} should vanish when c_t ≠ 0")));
    }
    Ok(FlowState { t, a_t, b_t: coefficient_b(&mt), interval_masses })
}

/// t where an atom of μ_t sits on lo or hi, from the real boundary values of
/// M₀ there. Points with complex or missing boundary values contribute none.
fn endpoint_crossings<H: Herglotz + ?Sized>(
    x: &LieElement,
    m0: &H,
    lo: f64,
    hi: f64,
    t1: f64,
    t2: f64,
    sched: &EpsSchedule,
) -> Vec<f64> {
    let mut out = vec![0.0];
    for e in [lo, hi] {
        let bv = boundary_value(m0, e, sched);
        if bv.converged && bv.im.abs() <= 1e-8 * bv.re.abs().max(1.0) && bv.re.is_finite() {
            out.extend(crossing_times(x, x.gamma * bv.re - x.beta, t1, t2));
        }
    }
    if x.case() == CaseTag::CaseI {
        let p = PI / x.omega();
        let mut k = (t1 / p).floor();
        while k * p < t2 {
            out.push(k * p);
            k += 1.0;
        }
    }
    out.retain(|&t| t > t1 && t < t2);
    out
}

fn t_integral(rule: &CachedRule, x: &LieElement, t1: f64, t2: f64, breaks: &[f64]) -> Result<f64> {
    Ok(integrate(|t| rule.mass_at(x, t), t1, t2, breaks, T_TOL)?.value)
}

/// ∫_{t1}^{t2} μ_t((lo,hi)) dt.
pub fn average_over_t<H: Herglotz + ?Sized>(
    x: &LieElement,
    m0: &H,
    (lo, hi): (f64, f64),
    t1: f64,
    t2: f64,
    sched: &EpsSchedule,
) -> Result<f64> {
    if !(t1 <= t2) || !t1.is_finite() || !t2.is_finite() {
        return Err(Error::Precondition(format!("need finite t1 <= t2, got ({t1}, {t2})")));
    }
    if t1 == t2 {
        return Ok(0.0);
    }
    let rule = CachedRule::new(m0, lo, hi)?;
    let breaks = endpoint_crossings(x, m0, lo, hi, t1, t2, sched);
    t_integral(&rule, x, t1, t2, &breaks)
}

/// ∫_lo^hi ξ_{t1,t2} from the lifted logarithms of c_t M₀ + d_t.
pub fn xi_integral<H: Herglotz + ?Sized>(x: &LieElement, m0: &H, (lo, hi): (f64, f64), t1: f64, t2: f64) -> Result<f64> {
    if x.gamma == 0.0 {
        return Err(Error::Precondition("γ must be nonzero".into()));
    }
    if t1 == t2 {
        return Ok(0.0);
    }
    let rule = CachedRule::new(m0, lo, hi)?;
    Ok(xi_integral_cached(&rule, x, t1, t2))
}

fn xi_integral_cached(rule: &CachedRule, x: &LieElement, t1: f64, t2: f64) -> f64 {
    let lnw = |t: f64, m: Complex64| Complex64::new(flow_denominator(x, t, m).norm().ln(), flow_lift(x, t, m));
    rule.apply_map(|m| (lnw(t2, m) - lnw(t1, m)) / x.gamma)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MzCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// ∫ μ_t(Δ) dt against ∫_Δ ξ_{t1,t2}.
pub fn verify_mz<H: Herglotz + ?Sized>(
    x: &LieElement,
    m0: &H,
    interval: (f64, f64),
    t1: f64,
    t2: f64,
    sched: &EpsSchedule,
) -> Result<MzCheck> {
    if x.gamma == 0.0 {
        return Err(Error::Precondition("γ must be nonzero".into()));
    }
    if t1 == t2 {
        return Ok(MzCheck { lhs: 0.0, rhs: 0.0, residual: 0.0 });
    }
    let rule = CachedRule::new(m0, interval.0, interval.1)?;
    let breaks = endpoint_crossings(x, m0, interval.0, interval.1, t1, t2, sched);
    let lhs = t_integral(&rule, x, t1, t2, &breaks)?;
    let rhs = xi_integral_cached(&rule, x, t1, t2);
    Ok(MzCheck { lhs, rhs, residual: (lhs - rhs).abs() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailModel {
    /// Fit C/t² on the last decade; negligible integrands get no tail.
    InverseSquare,
    /// Truncate without a tail correction.
    None,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Truncation {
    pub t_cut: f64,
    pub tail_model: TailModel,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { t_cut: 1e4, tail_model: TailModel::InverseSquare }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GlobalAverage {
    /// |γ|·∫ μ_t(Δ) dt over the full parameter range.
    pub value: f64,
    pub case: CaseTag,
    pub body: f64,
    pub tails: Option<(Tail, Tail)>,
    /// Error budget of the tail model: the size of the fitted tails.
    pub budget: f64,
}

pub fn global_average<H: Herglotz + ?Sized>(
    x: &LieElement,
    m0: &H,
    (lo, hi): (f64, f64),
    sched: &EpsSchedule,
    trunc: &Truncation,
) -> Result<GlobalAverage> {
    if x.gamma == 0.0 {
        return Err(Error::Precondition("γ must be nonzero".into()));
    }
    let case = x.case();
    let g = x.gamma.abs();
    let rule = CachedRule::new(m0, lo, hi)?;
    if case == CaseTag::CaseI {
        let (a, b) = parameter_window(x);
        let breaks = endpoint_crossings(x, m0, lo, hi, a, b, sched);
        let body = t_integral(&rule, x, a, b, &breaks)?;
        return Ok(GlobalAverage { value: g * body, case, body, tails: None, budget: 0.0 });
    }
    let tc = trunc.t_cut;
    if !(tc > 1.0) {
        return Err(Error::Precondition(format!("T_cut = {tc} must exceed 1")));
    }
    let mut breaks = endpoint_crossings(x, m0, lo, hi, -tc, tc, sched);
    let mut d = 1.0;
    while d < tc {
        breaks.push(d);
        breaks.push(-d);
        d *= 10.0;
    }
    let body = t_integral(&rule, x, -tc, tc, &breaks)?;
    let (tails, extra) = match trunc.tail_model {
        TailModel::None => (None, 0.0),
        TailModel::InverseSquare => {
            let l = inverse_square_tail(|t| rule.mass_at(x, t), -tc)?;
            let r = inverse_square_tail(|t| rule.mass_at(x, t), tc)?;
            (Some((l, r)), l.value + r.value)
        }
    };
    Ok(GlobalAverage { value: g * (body + extra), case, body, tails, budget: g * extra })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GlobalXiIntegral {
    pub value: f64,
    pub printed_variant: f64,
}

/// ∫_Δ ξ_global, together with the variant built from (πm̃ ± 2ω).
pub fn global_xi_integral<H: Herglotz + ?Sized>(x: &LieElement, m0: &H, (lo, hi): (f64, f64)) -> Result<GlobalXiIntegral> {
    if !(x.gamma > 0.0) {
        return Err(Error::Precondition("global density needs γ > 0".into()));
    }
    let g = x.gamma;
    if x.case() != CaseTag::CaseIII {
        let v = (hi - lo) / g;
        return Ok(GlobalXiIntegral { value: v, printed_variant: v });
    }
    let w = x.omega();
    let rule = CachedRule::new(m0, lo, hi)?;
    let base = Complex64::new(0.0, PI / g);
    let value = rule.apply_map(|m| {
        let mt = g * m - x.beta;
        base + ((mt + w).ln() - (mt - w).ln()) / g
    });
    let printed_variant = rule.apply_map(|m| {
        let mt = g * m - x.beta;
        base + ((PI * mt + 2.0 * w).ln() - (PI * mt - 2.0 * w).ln()) / g
    });
    Ok(GlobalXiIntegral { value, printed_variant })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Ac,
    Sc,
    Pp,
}

/// Declared invariant sets of a fixture as finite unions of intervals.
/// Isolated points carry no Lebesgue mass and are omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantSets {
    pub ac: Vec<(f64, f64)>,
    pub sc: Vec<(f64, f64)>,
    pub pp: Vec<(f64, f64)>,
}

impl InvariantSets {
    pub fn get(&self, part: Part) -> &[(f64, f64)] {
        match part {
            Part::Ac => &self.ac,
            Part::Sc => &self.sc,
            Part::Pp => &self.pp,
        }
    }
}

/// Parameter range of an average: finite, or the whole group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Range {
    Finite { t1: f64, t2: f64 },
    Global,
}

/// μ_{t1,t2}(Δ ∩ set) = ∫_{Δ∩set} ξ, or |γ|∫_{Δ∩set} ξ_global for the whole group.
pub fn part_average<H: Herglotz + ?Sized>(
    x: &LieElement,
    m0: &H,
    (lo, hi): (f64, f64),
    range: Range,
    part: Part,
    sets: Option<&InvariantSets>,
) -> Result<f64> {
    let sets = sets.ok_or_else(|| Error::ClassifierUnavailable("no invariant sets declared for this fixture".into()))?;
    let mut total = 0.0;
    for &(a, b) in sets.get(part) {
        let (a, b) = (a.max(lo), b.min(hi));
        if a >= b {
            continue;
        }
        total += match range {
            Range::Finite { t1, t2 } => xi_integral(x, m0, (a, b), t1, t2)?,
            Range::Global => x.gamma.abs() * global_xi_integral(x, m0, (a, b))?.value,
        };
    }
    Ok(total)
}

/// N(z) = z + (1+z²)M(z) for M = ∫dμ/(λ-z) with μ a probability measure.
#[derive(Debug, Clone)]
pub struct ExtensionFamily {
    pub base: HerglotzRep,
    /// dν = (1+λ²)dμ when it has a finite closed form here.
    pub nu: Option<MeasureSpec>,
}

impl ExtensionFamily {
    pub fn n(&self, z: Complex64) -> Complex64 {
        z + (1.0 + z * z) * self.base.eval_any(z)
    }
}

impl Herglotz for ExtensionFamily {
    fn eval(&self, z: Complex64) -> Complex64 {
        self.n(z)
    }
}

fn weighted_density(d: &Density) -> Option<Density> {
    let coeffs = match d {
        Density::Constant { c } => vec![*c],
        Density::Polynomial { coeffs } => coeffs.clone(),
        Density::FatCantor { .. } => return None,
    };
    let mut out = vec![0.0; coeffs.len() + 2];
    for (k, c) in coeffs.iter().enumerate() {
        out[k] += c;
        out[k + 2] += c;
    }
    Some(Density::Polynomial { coeffs: out })
}

pub fn extension_family(m: &HerglotzRep) -> Result<ExtensionFamily> {
    m.validate()?;
    let mass = m.mu.total_mass();
    if m.a != 0.0 || (mass - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition(format!(
            "extension family needs A = 0 and a probability measure, got A = {} and mass {mass}",
            m.a
        )));
    }
    if m.mu.support_hull().is_none() {
        return Err(Error::Precondition("measure must have bounded support".into()));
    }
    // Pure Stieltjes form: B cancels the λ/(1+λ²) compensator.
    let shift = m.mu.stieltjes(Complex64::i()).re;
    let base = HerglotzRep::new(0.0, shift, m.mu.clone())?;
    let nu = if m.mu.cantor.is_empty() {
        let atoms = m.mu.atoms.iter().map(|a| Atom { pos: a.pos, w: a.w * (1.0 + a.pos * a.pos) }).collect();
        let ac: Option<Vec<AcPiece>> = m
            .mu
            .ac
            .iter()
            .map(|p| weighted_density(&p.density).map(|density| AcPiece { lo: p.lo, hi: p.hi, density }))
            .collect();
        ac.map(|ac| MeasureSpec { atoms, ac, cantor: vec![] })
    } else {
        None
    };
    Ok(ExtensionFamily { base, nu })
}

/// f_τ(w) = (w - τ)/(τw + 1).
pub fn f_tan(tau: f64, w: Complex64) -> Complex64 {
    (w - tau) / (tau * w + 1.0)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExtensionAverage {
    /// ∫_{-π/2}^{π/2} ν_s(Δ) ds.
    pub value: f64,
    pub re_n_at_i: f64,
    /// max |f_{tan s}(N(z)) - g_s(N(z))| over sample points.
    pub reparam_residual: f64,
}

/// Averages the measures of g_s∘N over the rotation window. Equivalently
/// (with t = tan s) the average of ν_t against dt/(1+t²).
pub fn extension_average(fam: &ExtensionFamily, (lo, hi): (f64, f64), sched: &EpsSchedule) -> Result<ExtensionAverage> {
    let rot = LieElement::new(-1.0, 0.0, 1.0);
    let mut reparam_residual = 0.0f64;
    for k in 0..16 {
        let s = -1.4 + 2.8 * k as f64 / 15.0;
        let z = Complex64::new(-2.0 + 0.3 * k as f64, 0.2 + 0.1 * k as f64);
        let n = fam.n(z);
        reparam_residual = reparam_residual.max((f_tan(s.tan(), n) - exponential(&rot, s).apply(n)).norm());
    }
    let (a, b) = (-FRAC_PI_2, FRAC_PI_2);
    let rule = CachedRule::new(fam, lo, hi)?;
    let breaks = endpoint_crossings(&rot, fam, lo, hi, a, b, sched);
    let value = t_integral(&rule, &rot, a, b, &breaks)?;
    Ok(ExtensionAverage { value, re_n_at_i: fam.n(Complex64::i()).re, reparam_residual })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AveragedMeasure {
    pub t1: f64,
    pub t2: f64,
    pub density: XiSample,
    pub interval_masses: Vec<IntervalMass>,
}

/// μ_{t1,t2} sampled two ways: density on a grid and masses of intervals.
pub fn averaged_measure<H: Herglotz + ?Sized>(
    x: &LieElement,
    m0: &H,
    t1: f64,
    t2: f64,
    lambda_grid: &[f64],
    intervals: &[(f64, f64)],
    sched: &EpsSchedule,
) -> Result<AveragedMeasure> {
    let density = xi_density(x, m0, t1, t2, lambda_grid, sched)?;
    let mut interval_masses = Vec::new();
    for &iv in intervals {
        let mass = average_over_t(x, m0, iv, t1, t2, sched)? ;
        interval_masses.push(IntervalMass { lo: iv.0, hi: iv.1, mass });
    }
    Ok(AveragedMeasure { t1, t2, density, interval_masses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herglotz::ConstantHerglotz;
    use crate::measure::{measure_of_interval, Convention};
    use crate::rankone::FiniteModel;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    fn delta0() -> HerglotzRep {
        HerglotzRep::new(0.0, 0.0, MeasureSpec { atoms: vec![Atom { pos: 0.0, w: 1.0 }], ..Default::default() }).unwrap()
    }

    const PARA: LieElement = LieElement::new(0.0, 0.0, 1.0);
    const ROT: LieElement = LieElement::new(-1.0, 0.0, 1.0);
    const HYP: LieElement = LieElement::new(1.0, 0.0, 1.0);

    #[test]
    fn flow_state_examples() {
        let s = EpsSchedule::default();
        let f = flow_state(&PARA, &delta0(), 1.5, &[(1.0, 2.0), (-1.0, 1.0)], &s).unwrap();
        assert!((f.interval_masses[0].mass - 1.0).abs() < 1e-10);
        assert!(f.interval_masses[1].mass.abs() < 1e-10);
        assert_eq!(f.a_t, 0.0);
        let i = ConstantHerglotz { re: 0.0, im: 1.0 };
        let f = flow_state(&ROT, &i, 0.7, &[(0.0, 2.0)], &s).unwrap();
        assert!((f.interval_masses[0].mass - 2.0 / PI).abs() < 1e-10);
        let z = FnHerglotz(|z: Complex64| z);
        let f = flow_state(&ROT, &z, FRAC_PI_4, &[(-1.5, -0.5), (0.0, 1.0)], &s).unwrap();
        assert!((f.interval_masses[0].mass - 2.0).abs() < 1e-9);
        assert!(f.interval_masses[1].mass.abs() < 1e-9);
    }

    #[test]
    fn dynamical_system_law() {
        let s = EpsSchedule::default();
        let m = FiniteModel::two_level();
        let (a, b) = (0.4, 0.9);
        let iv = [(-0.5, 1.7), (0.1, 4.0)];
        let direct = flow_state(&HYP, &m, a + b, &iv, &s).unwrap();
        let g = exponential(&HYP, a);
        let base = FnHerglotz(|z| g.apply(m.eval(z)));
        let twice = flow_state(&HYP, &base, b, &iv, &s).unwrap();
        for (p, q) in direct.interval_masses.iter().zip(&twice.interval_masses) {
            assert!((p.mass - q.mass).abs() < 1e-8);
        }
    }

    #[test]
    fn averages_match_sweeps() {
        let s = EpsSchedule::default();
        let v = average_over_t(&PARA, &delta0(), (0.0, 3.0), 0.0, 2.0, &s).unwrap();
        assert!((v - 2.0).abs() < 1e-8, "{v}");
        let i = ConstantHerglotz { re: 0.0, im: 1.0 };
        let v = average_over_t(&ROT, &i, (-1.0, 1.0), -0.5, 1.0, &s).unwrap();
        assert!((v - 1.5 * 2.0 / PI).abs() < 1e-9);
        assert_eq!(average_over_t(&ROT, &i, (-1.0, 1.0), 0.3, 0.3, &s).unwrap(), 0.0);
    }

    #[test]
    fn mz_identity_examples() {
        let s = EpsSchedule::default();
        let c = verify_mz(&PARA, &delta0(), (0.0, 3.0), -1.0, 2.0, &s).unwrap();
        assert!((c.lhs - 2.0).abs() < 1e-6 && c.residual < 1e-6, "{c:?}");
        let c = verify_mz(&PARA, &FiniteModel::two_level(), (0.0, 3.0), 0.0, 2.0, &s).unwrap();
        assert!((c.lhs - SQRT_2).abs() < 1e-6 && c.residual < 1e-6, "{c:?}");
        let i = ConstantHerglotz { re: 0.0, im: 1.0 };
        let c = verify_mz(&ROT, &i, (0.5, 2.0), -0.3, 0.8, &s).unwrap();
        assert!((c.lhs - 1.1 * 1.5 / PI).abs() < 1e-8 && c.residual < 1e-8, "{c:?}");
    }

    #[test]
    fn global_examples() {
        let s = EpsSchedule::default();
        let t = Truncation::default();
        let g = global_average(&PARA, &delta0(), (0.0, 3.0), &s, &t).unwrap();
        assert_eq!(g.case, CaseTag::CaseII);
        assert!((g.value - 3.0).abs() < 1e-6, "{g:?}");
        let z = FnHerglotz(|z: Complex64| z);
        let g = global_average(&ROT, &z, (-1.0, 2.5), &s, &t).unwrap();
        assert!((g.value - 3.5).abs() < 1e-6, "{g:?}");
        let i = ConstantHerglotz { re: 0.0, im: 1.0 };
        let g = global_average(&HYP, &i, (0.0, 2.0), &s, &t).unwrap();
        assert!((g.value - 1.0).abs() < 1e-6, "{g:?}");
        let xi = global_xi_integral(&HYP, &i, (0.0, 2.0)).unwrap();
        assert!((xi.value - 1.0).abs() < 1e-10);
        assert!((xi.printed_variant / 2.0 - 0.639).abs() < 1e-3, "{xi:?}");
    }

    #[test]
    fn part_rows() {
        let z = FnHerglotz(|z: Complex64| z);
        let sets = InvariantSets { pp: vec![(f64::NEG_INFINITY, f64::INFINITY)], ..Default::default() };
        let d = (-1.0, 2.0);
        let rows: Vec<f64> = [Part::Ac, Part::Sc, Part::Pp]
            .iter()
            .map(|&p| part_average(&ROT, &z, d, Range::Global, p, Some(&sets)).unwrap())
            .collect();
        assert_eq!(&rows[..2], &[0.0, 0.0]);
        assert!((rows[2] - 3.0).abs() < 1e-12);
        assert!(matches!(part_average(&ROT, &z, d, Range::Global, Part::Ac, None), Err(Error::ClassifierUnavailable(_))));

        let mu = MeasureSpec {
            atoms: vec![Atom { pos: 2.0, w: 1.0 }],
            ac: vec![AcPiece { lo: 0.0, hi: 1.0, density: Density::Constant { c: 1.0 } }],
            cantor: vec![],
        };
        let m = HerglotzRep::new(0.0, 0.0, mu).unwrap();
        let sets = InvariantSets { ac: vec![(0.0, 1.0)], pp: vec![(-10.0, 0.0), (1.0, 10.0)], sc: vec![] };
        let d = (-3.0, 3.0);
        let ac = part_average(&PARA, &m, d, Range::Global, Part::Ac, Some(&sets)).unwrap();
        let pp = part_average(&PARA, &m, d, Range::Global, Part::Pp, Some(&sets)).unwrap();
        assert!((ac - 1.0).abs() < 1e-12 && (pp - 5.0).abs() < 1e-12);
        // finite range: rows add up to the total
        let r = Range::Finite { t1: -0.5, t2: 1.5 };
        let sum: f64 = [Part::Ac, Part::Sc, Part::Pp]
            .iter()
            .map(|&p| part_average(&PARA, &m, d, r, p, Some(&sets)).unwrap())
            .sum();
        let total = xi_integral(&PARA, &m, (-3.0, 0.0), -0.5, 1.5).unwrap()
            + xi_integral(&PARA, &m, (0.0, 1.0), -0.5, 1.5).unwrap()
            + xi_integral(&PARA, &m, (1.0, 3.0), -0.5, 1.5).unwrap();
        assert!((sum - total).abs() < 1e-8);
    }

    #[test]
    fn extension_examples() {
        let s = EpsSchedule::default();
        let fam = extension_family(&delta0()).unwrap();
        let z = Complex64::new(0.3, 0.7);
        assert!((fam.n(z) + 1.0 / z).norm() < 1e-14);
        assert_eq!(fam.nu.as_ref().unwrap().atoms[0].w, 1.0);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mu = MeasureSpec {
            atoms: vec![Atom { pos: -1.0, w: 0.25 }, Atom { pos: 1.0, w: 0.25 }],
            ac: vec![AcPiece { lo: 0.0, hi: 1.0, density: Density::Constant { c: 0.5 } }],
            cantor: vec![],
        };
        let fam = extension_family(&HerglotzRep::new(0.0, 0.0, mu).unwrap()).unwrap();
        assert!(fam.n(Complex64::i()).re.abs() < 1e-14);
        let nu = fam.nu.clone().unwrap();
        for (a, b) in [(-2.0, 0.5), (0.2, 0.9), (0.5, 3.0)] {
            let inv = crate::herglotz::stieltjes_invert(&fam, a, b, &s).unwrap();
            assert!((inv - measure_of_interval(&nu, a, b, Convention::HalfAtom)).abs() < 1e-10);
        }
        let m2 = FiniteModel::two_level();
        let two = HerglotzRep::new(
            0.0,
            0.0,
            MeasureSpec { atoms: vec![Atom { pos: -1.0, w: h * h }, Atom { pos: 1.0, w: h * h }], ..Default::default() },
        )
        .unwrap();
        let fam = extension_family(&two).unwrap();
        assert!((fam.n(z) - (z + (1.0 + z * z) * m2.eval(z))).norm() < 1e-14);
        let e = extension_average(&fam, (0.0, 3.0), &s).unwrap();
        assert!((e.value - 3.0).abs() < 1e-3, "{e:?}");
        assert!(e.reparam_residual < 1e-12 && e.re_n_at_i.abs() < 1e-15);
    }
}

//! One-parameter subgroups of SL₂(ℝ) and the Möbius maps they induce.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// |det X| at or below this is treated as the parabolic case.
pub const DET_ZERO: f64 = 1e-14;
const TRACE_TOL: f64 = 1e-12;

/// The traceless generator [[β, α], [γ, -β]].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LieElement {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    #[serde(rename = "CASE_I")]
    CaseI,
    #[serde(rename = "CASE_II")]
    CaseII,
    #[serde(rename = "CASE_III")]
    CaseIII,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobiusClass {
    Identity,
    Elliptic,
    Parabolic,
    Hyperbolic,
}

impl LieElement {
    pub const fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        LieElement { alpha, beta, gamma }
    }

    pub fn det(&self) -> f64 {
        -self.alpha * self.gamma - self.beta * self.beta
    }

    pub fn omega(&self) -> f64 {
        self.det().abs().sqrt()
    }

    pub fn case(&self) -> CaseTag {
        classify_case(self)
    }

    pub fn norm_inf(&self) -> f64 {
        (self.beta.abs() + self.alpha.abs()).max(self.gamma.abs() + self.beta.abs())
    }
}

/// (C(t), s(t)) with e^{tX} = C·I + s·X, where C = cos(ωt), s = sin(ωt)/ω in
/// the elliptic case and their hyperbolic or affine analogues otherwise. A
/// power series in det·t² is used whenever that product is small, which keeps
/// near-parabolic generators free of cancellation.
pub fn cos_sin(x: &LieElement, t: f64) -> (f64, f64) {
    let det = x.det();
    let q = det * t * t;
    if q.abs() < 0.5 {
        let mut c = 0.0;
        let mut s = 0.0;
        let mut term = 1.0;
        for k in 0..30 {
            // term = (-q)^k / (2k)!
            c += term;
            s += term / (2 * k + 1) as f64;
            term *= -q / ((2 * k + 1) * (2 * k + 2)) as f64;
            if term.abs() < 1e-18 {
                c += term;
                s += term / (2 * k + 3) as f64;
                break;
            }
        }
        (c, s * t)
    } else if det > 0.0 {
        let w = det.sqrt();
        ((w * t).cos(), (w * t).sin() / w)
    } else {
        let w = (-det).sqrt();
        ((w * t).cosh(), (w * t).sinh() / w)
    }
}

pub fn exponential(x: &LieElement, t: f64) -> GroupElement {
    let (c, s) = cos_sin(x, t);
    GroupElement { a: c + x.beta * s, b: x.alpha * s, c: x.gamma * s, d: c - x.beta * s }
}

/// Scaling-and-squaring Taylor series of e^{tX}, independent of the closed
/// forms above.
pub fn ode_oracle(x: &LieElement, t: f64) -> GroupElement {
    let m = [[x.beta * t, x.alpha * t], [x.gamma * t, -x.beta * t]];
    let norm = (m[0][0].abs() + m[0][1].abs()).max(m[1][0].abs() + m[1][1].abs());
    let mut k = 0;
    while norm / 2f64.powi(k) > 0.125 {
        k += 1;
    }
    let sc = 2f64.powi(-k);
    let y = [[m[0][0] * sc, m[0][1] * sc], [m[1][0] * sc, m[1][1] * sc]];
    let mul = |p: [[f64; 2]; 2], q: [[f64; 2]; 2]| {
        [
            [p[0][0] * q[0][0] + p[0][1] * q[1][0], p[0][0] * q[0][1] + p[0][1] * q[1][1]],
            [p[1][0] * q[0][0] + p[1][1] * q[1][0], p[1][0] * q[0][1] + p[1][1] * q[1][1]],
        ]
    };
    let mut e = [[1.0, 0.0], [0.0, 1.0]];
    let mut term = [[1.0, 0.0], [0.0, 1.0]];
    for n in 1..25 {
        term = mul(term, y);
        let f = 1.0 / n as f64;
        for r in 0..2 {
            for c in 0..2 {
                term[r][c] *= f;
                e[r][c] += term[r][c];
            }
        }
    }
    for _ in 0..k {
        e = mul(e, e);
    }
    GroupElement { a: e[0][0], b: e[0][1], c: e[1][0], d: e[1][1] }
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    pub fn max_diff(&self, o: &GroupElement) -> f64 {
        (self.a - o.a).abs().max((self.b - o.b).abs()).max((self.c - o.c).abs()).max((self.d - o.d).abs())
    }

    /// (az+b)/(cz+d) without the half-plane check.
    #[inline]
    pub fn apply(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }
}

pub fn mobius_apply(g: &GroupElement, z: Complex64) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("Möbius argument {z} is not in the upper half-plane")));
    }
    Ok(g.apply(z))
}

pub fn compose(g1: &GroupElement, g2: &GroupElement) -> GroupElement {
    let p = GroupElement {
        a: g1.a * g2.a + g1.b * g2.c,
        b: g1.a * g2.b + g1.b * g2.d,
        c: g1.c * g2.a + g1.d * g2.c,
        d: g1.c * g2.b + g1.d * g2.d,
    };
    // ad - bc of large hyperbolic factors is dominated by cancellation noise;
    // rescaling by it would inject that noise into every entry, so only drift
    // beyond the round-off level of the factors and the product is corrected.
    let det = p.det();
    let cond = |g: &GroupElement| (g.a * g.d).abs() + (g.b * g.c).abs();
    let noise = 64.0 * f64::EPSILON * (cond(g1) + cond(g2) + cond(&p));
    if (det - 1.0).abs() <= noise {
        return p;
    }
    let r = det.sqrt();
    GroupElement { a: p.a / r, b: p.b / r, c: p.c / r, d: p.d / r }
}

pub fn group_law_check(x: &LieElement, s: f64, t: f64) -> f64 {
    exponential(x, s + t).max_diff(&compose(&exponential(x, s), &exponential(x, t)))
}

pub fn classify_case(x: &LieElement) -> CaseTag {
    let d = x.det();
    if d.abs() <= DET_ZERO {
        CaseTag::CaseII
    } else if d > 0.0 {
        CaseTag::CaseI
    } else {
        CaseTag::CaseIII
    }
}

pub fn classify_mobius(g: &GroupElement) -> MobiusClass {
    let plus = g.max_diff(&GroupElement::IDENTITY);
    let minus = g.max_diff(&GroupElement { a: -1.0, b: 0.0, c: 0.0, d: -1.0 });
    if plus.min(minus) <= TRACE_TOL {
        return MobiusClass::Identity;
    }
    let tr = g.trace().abs();
    if (tr - 2.0).abs() <= TRACE_TOL {
        MobiusClass::Parabolic
    } else if tr < 2.0 {
        MobiusClass::Elliptic
    } else {
        MobiusClass::Hyperbolic
    }
}

/// Θ(t) = s(t)/C(t): tan(ωt)/ω, t, or tanh(ωt)/ω.
pub fn theta(x: &LieElement, t: f64) -> Result<f64> {
    if x.case() == CaseTag::CaseI {
        let (t1, t2) = parameter_window(x);
        if !(t > t1 && t < t2) {
            return Err(Error::Domain(format!("t = {t} outside the elliptic window ({t1}, {t2})")));
        }
    }
    let (c, s) = cos_sin(x, t);
    Ok(s / c)
}

/// lim Θ(t) as t runs to the end of the parameter window in direction `sign`.
pub fn theta_limit(x: &LieElement, sign: f64) -> f64 {
    match x.case() {
        CaseTag::CaseIII => sign.signum() / x.omega(),
        _ => sign.signum() * f64::INFINITY,
    }
}

pub fn parameter_window(x: &LieElement) -> (f64, f64) {
    match x.case() {
        CaseTag::CaseI => {
            let h = FRAC_PI_2 / x.omega();
            (-h, h)
        }
        _ => (f64::NEG_INFINITY, f64::INFINITY),
    }
}

/// F_τ(z) = ((1+βτ)z + ατ)/(γτz + 1 - βτ); the flow satisfies g_t = F_{Θ(t)}.
pub fn f_tau(x: &LieElement, tau: f64, z: Complex64) -> Complex64 {
    ((1.0 + x.beta * tau) * z + x.alpha * tau) / (x.gamma * tau * z + 1.0 - x.beta * tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn close(g: GroupElement, a: f64, b: f64, c: f64, d: f64, tol: f64) -> bool {
        g.max_diff(&GroupElement { a, b, c, d }) <= tol
    }

    #[test]
    fn exponential_examples() {
        assert!(close(exponential(&LieElement::new(0.0, 0.0, 1.0), 2.5), 1.0, 0.0, 2.5, 1.0, 0.0));
        assert!(close(exponential(&LieElement::new(-1.0, 0.0, 1.0), FRAC_PI_2), 0.0, -1.0, 1.0, 0.0, 1e-15));
        let (ch, sh) = (1f64.cosh(), 1f64.sinh());
        assert!(close(exponential(&LieElement::new(1.0, 0.0, 1.0), 1.0), ch, sh, sh, ch, 1e-15));
        assert!((ch - 1.54308).abs() < 1e-5 && (sh - 1.17520).abs() < 1e-5);
    }

    #[test]
    fn ode_oracle_examples() {
        assert!(close(ode_oracle(&LieElement::new(0.0, 0.0, 1.0), 1.0), 1.0, 0.0, 1.0, 1.0, 1e-12));
        assert!(close(ode_oracle(&LieElement::new(-1.0, 0.0, 1.0), PI), -1.0, 0.0, 0.0, -1.0, 1e-10));
        assert!(close(ode_oracle(&LieElement::new(1.0, 0.0, 1.0), 0.0), 1.0, 0.0, 0.0, 1.0, 0.0));
    }

    #[test]
    fn mobius_examples() {
        let z = Complex64::new(0.3, 0.7);
        assert_eq!(mobius_apply(&GroupElement::IDENTITY, z).unwrap(), z);
        let t = 1.7;
        let g = exponential(&LieElement::new(0.0, 0.0, 1.0), t);
        assert!((mobius_apply(&g, z).unwrap() - z / (t * z + 1.0)).norm() < 1e-15);
        let r = GroupElement { a: 0.0, b: -1.0, c: 1.0, d: 0.0 };
        assert!((mobius_apply(&r, Complex64::i()).unwrap() - Complex64::i()).norm() < 1e-15);
        assert!(mobius_apply(&r, Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn group_law_and_inverse() {
        let x = LieElement::new(0.0, 0.0, 1.0);
        let z = Complex64::new(-0.4, 0.9);
        let (s, t) = (0.6, -1.3);
        let gz = compose(&exponential(&x, t), &exponential(&x, s)).apply(z);
        assert!((gz - z / ((t + s) * z + 1.0)).norm() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x = LieElement::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let s = rng.gen_range(-3.0..3.0);
            let t = rng.gen_range(-3.0..3.0);
            let scale = exponential(&x, s + t).max_diff(&GroupElement { a: 0.0, b: 0.0, c: 0.0, d: 0.0 }).max(1.0);
            assert!(group_law_check(&x, s, t) <= 1e-12 * scale);
            assert!(compose(&exponential(&x, t), &exponential(&x, -t)).max_diff(&GroupElement::IDENTITY) <= 1e-12 * scale * scale);
            assert!((exponential(&x, t).det() - 1.0).abs() <= 1e-12 * scale * scale);
        }
    }

    #[test]
    fn classification_examples() {
        let par = LieElement::new(0.0, 0.0, 1.0);
        assert_eq!(par.case(), CaseTag::CaseII);
        assert_eq!(classify_mobius(&exponential(&par, 0.5)), MobiusClass::Parabolic);
        let rot = LieElement::new(-1.0, 0.0, 1.0);
        assert_eq!(rot.case(), CaseTag::CaseI);
        assert_eq!(classify_mobius(&exponential(&rot, FRAC_PI_2)), MobiusClass::Elliptic);
        let hyp = LieElement::new(1.0, 0.0, 1.0);
        assert_eq!(hyp.case(), CaseTag::CaseIII);
        let g = exponential(&hyp, 1.0);
        assert!((g.trace() - 2.0 * 1f64.cosh()).abs() < 1e-14);
        assert_eq!(classify_mobius(&g), MobiusClass::Hyperbolic);
        assert_eq!(classify_mobius(&GroupElement::IDENTITY), MobiusClass::Identity);
    }

    #[test]
    fn theta_and_window() {
        assert_eq!(theta(&LieElement::new(0.0, 0.0, 1.0), 3.0).unwrap(), 3.0);
        assert!((theta(&LieElement::new(-1.0, 0.0, 1.0), FRAC_PI_4).unwrap() - 1.0).abs() < 1e-15);
        assert!(theta(&LieElement::new(-1.0, 0.0, 1.0), 2.0).is_err());
        assert_eq!(theta_limit(&LieElement::new(1.0, 0.0, 1.0), 1.0), 1.0);
        assert_eq!(parameter_window(&LieElement::new(-1.0, 0.0, 1.0)), (-FRAC_PI_2, FRAC_PI_2));
        assert_eq!(parameter_window(&LieElement::new(0.0, 0.0, 1.0)), (f64::NEG_INFINITY, f64::INFINITY));
        let w = parameter_window(&LieElement::new(-2.0, 1.0, 1.0));
        assert!((w.0 + FRAC_PI_2).abs() < 1e-15 && (w.1 - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn lower_left_entry_vanishes_only_on_the_lattice() {
        let rot = LieElement::new(-2.0, 1.0, 1.0);
        let w = rot.omega();
        for k in -40..=40 {
            let t = k as f64 * 0.1 + 0.013;
            let c = exponential(&rot, t).c;
            let near = (t * w / PI).round() * PI / w;
            if (t - near).abs() > 1e-6 {
                assert!(c.abs() > 0.0);
                assert_eq!(c.signum(), ((w * t).sin() / w).signum());
            }
        }
        for x in [LieElement::new(0.0, 0.0, 1.0), LieElement::new(1.0, 0.5, 2.0)] {
            for k in 1..50 {
                let t = k as f64 * 0.2;
                assert!(exponential(&x, t).c > 0.0 && exponential(&x, -t).c < 0.0);
            }
        }
    }

    #[test]
    fn trajectory_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let x = LieElement::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let (t1, t2) = parameter_window(&x);
            let t = rng.gen_range(t1.max(-2.0)..t2.min(2.0)) * 0.95;
            let z = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.1..2.0));
            let lhs = exponential(&x, t).apply(z);
            let rhs = f_tau(&x, theta(&x, t).unwrap(), z);
            assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0), "{lhs} {rhs}");
        }
    }
}

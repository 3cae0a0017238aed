//! Stieltjes inversion by contour deformation.
//!
//! For M analytic in the upper half-plane, Cauchy's theorem on the rectangle
//! with corners lo, hi, hi + iH, lo + iH gives
//!
//! ```text
//! ∫_lo^hi Im M(λ+iε) dλ = ∫_lo^hi Im M(λ+iH) dλ
//!                        + ∫_ε^H Re M(lo+iy) dy - ∫_ε^H Re M(hi+iy) dy
//! ```
//!
//! As ε ↓ 0 the left side tends to π(μ((lo,hi)) + ½μ({lo}) + ½μ({hi})). The
//! right side never touches the real axis except through integrable
//! singularities at the corners, which the substitution y = e^u tames: in u the
//! integrand is analytic in the strip |Im u| < π/2, so Gauss panels of unit
//! width converge geometrically no matter where atoms sit.

use num_complex::Complex64;

use crate::quad::gauss_legendre;

/// Lower end of the vertical legs relative to the rectangle height.
pub const Y_MIN_REL: f64 = 1e-15;

/// A fixed quadrature rule: (1/π)·Im Σ W_k M(z_k) approximates the inversion.
#[derive(Debug, Clone)]
pub struct ContourRule {
    pub lo: f64,
    pub hi: f64,
    pub nodes: Vec<Complex64>,
    pub weights: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy)]
pub struct Inversion {
    pub value: f64,
    pub error: f64,
}

impl ContourRule {
    /// Rule for the ε ↓ 0 limit.
    pub fn limit(lo: f64, hi: f64) -> Self {
        Self::build(lo, hi, None, 1.0, 10)
    }

    /// Rule for (1/π)∫_lo^hi Im M(λ+iε) dλ at a fixed ε > 0.
    pub fn at_eps(lo: f64, hi: f64, eps: f64) -> Self {
        Self::build(lo, hi, Some(eps), 1.0, 10)
    }

    /// The same rule at twice the resolution, used as an error estimate.
    pub fn refined(&self, eps: Option<f64>) -> Self {
        Self::build(self.lo, self.hi, eps, 0.5, 14)
    }

    fn build(lo: f64, hi: f64, eps: Option<f64>, panel: f64, order: usize) -> Self {
        assert!(lo < hi, "contour rule needs lo < hi");
        let h = hi - lo;
        let (gx, gw) = gauss_legendre(order);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();

        let top_panels = 4;
        let pw = h / top_panels as f64;
        for p in 0..top_panels {
            let c = lo + (p as f64 + 0.5) * pw;
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(Complex64::new(c + 0.5 * pw * x, h));
                weights.push(Complex64::new(0.5 * pw * w, 0.0));
            }
        }

        let y0 = eps.unwrap_or(h * Y_MIN_REL);
        if y0 < h {
            if eps.is_none() {
                // ∫_0^{y0} Re M dy ≈ y0·Re M(· + i y0): exact for bounded Re M,
                // off by O(y0^κ) for y^{κ-1} singularities.
                nodes.push(Complex64::new(lo, y0));
                weights.push(Complex64::new(0.0, y0));
                nodes.push(Complex64::new(hi, y0));
                weights.push(Complex64::new(0.0, -y0));
            }
            let (u0, u1) = (y0.ln(), h.ln());
            let n = ((u1 - u0) / panel).ceil().max(1.0) as usize;
            let du = (u1 - u0) / n as f64;
            for p in 0..n {
                let c = u0 + (p as f64 + 0.5) * du;
                for (x, w) in gx.iter().zip(&gw) {
                    let y = (c + 0.5 * du * x).exp();
                    let wy = 0.5 * du * w * y;
                    nodes.push(Complex64::new(lo, y));
                    weights.push(Complex64::new(0.0, wy));
                    nodes.push(Complex64::new(hi, y));
                    weights.push(Complex64::new(0.0, -wy));
                }
            }
        }
        ContourRule { lo, hi, nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Applies the rule to precomputed values M(z_k).
    pub fn apply_values(&self, values: &[Complex64]) -> f64 {
        let s: Complex64 = self.weights.iter().zip(values).map(|(w, v)| w * v).sum();
        s.im / std::f64::consts::PI
    }

    pub fn apply<F: Fn(Complex64) -> Complex64>(&self, f: F) -> f64 {
        let s: Complex64 = self.nodes.iter().zip(&self.weights).map(|(z, w)| w * f(*z)).sum();
        s.im / std::f64::consts::PI
    }
}

/// Inversion of the ε ↓ 0 limit with a two-resolution error estimate.
pub fn invert<F: Fn(Complex64) -> Complex64>(f: F, lo: f64, hi: f64) -> Inversion {
    let r = ContourRule::limit(lo, hi);
    let a = r.apply(&f);
    let b = r.refined(None).apply(&f);
    Inversion { value: b, error: (a - b).abs() }
}

/// Inversion at fixed ε with a two-resolution error estimate.
pub fn invert_at_eps<F: Fn(Complex64) -> Complex64>(f: F, lo: f64, hi: f64, eps: f64) -> Inversion {
    let r = ContourRule::at_eps(lo, hi, eps);
    let a = r.apply(&f);
    let b = r.refined(Some(eps)).apply(&f);
    Inversion { value: b, error: (a - b).abs() }
}

//! Finite diagonal models A = diag(λ) with a cyclic unit vector φ.
//!
//! M(z) = Σ φᵢ²/(λᵢ - z) is the transform of the spectral measure of φ, and
//! A_t = A + tφφᵀ realizes the parabolic flow M_t = M/(tM + 1). Everything
//! here is exact up to root finding, so these models ground the flow code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::herglotz::Herglotz;
use crate::quad::{integrate, inverse_square_tail, Tail};

pub const MAX_LEVELS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteModel {
    pub eigs: Vec<f64>,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedSpectrum {
    pub t: f64,
    pub eigenvalues: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PerturbedSpectrum {
    /// μ_t((lo, hi)).
    pub fn mass_open(&self, lo: f64, hi: f64) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.weights)
            .filter(|(e, _)| **e > lo && **e < hi)
            .map(|(_, w)| w)
            .sum()
    }

    pub fn count_below(&self, x: f64) -> usize {
        self.eigenvalues.iter().filter(|&&e| e < x).count()
    }
}

impl FiniteModel {
    pub fn new(eigs: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        let m = FiniteModel { eigs, phi };
        m.validate()?;
        Ok(m)
    }

    /// A = diag(-1, 1), φ = (1, 1)/√2, so M(z) = z/(1 - z²).
    pub fn two_level() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        FiniteModel { eigs: vec![-1.0, 1.0], phi: vec![h, h] }
    }

    pub fn single_level(lambda: f64) -> Self {
        FiniteModel { eigs: vec![lambda], phi: vec![1.0] }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.eigs.len();
        if n == 0 || n > MAX_LEVELS || self.phi.len() != n {
            return Err(Error::Invalid(format!(
                "model needs 1..={MAX_LEVELS} levels and matching vector, got {} and {}",
                n,
                self.phi.len()
            )));
        }
        if self.eigs.windows(2).any(|w| !(w[0] < w[1])) || self.eigs.iter().any(|e| !e.is_finite()) {
            return Err(Error::Invalid("eigenvalues must be finite and strictly increasing".into()));
        }
        if self.phi.iter().any(|p| !(p.abs() > 0.0) || !p.is_finite()) {
            return Err(Error::Invalid("vector must have nonzero finite components".into()));
        }
        let norm2: f64 = self.phi.iter().map(|p| p * p).sum();
        if (norm2 - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("vector must have unit norm, |φ|² = {norm2}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.eigs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigs.is_empty()
    }

    fn weights0(&self) -> Vec<f64> {
        self.phi.iter().map(|p| p * p).collect()
    }

    /// M on the real line away from the eigenvalues.
    pub fn m_real(&self, x: f64) -> f64 {
        self.eigs.iter().zip(&self.phi).map(|(l, p)| p * p / (l - x)).sum()
    }

    pub fn m_prime_real(&self, x: f64) -> f64 {
        self.eigs.iter().zip(&self.phi).map(|(l, p)| p * p / ((l - x) * (l - x))).sum()
    }

    pub fn m_complex(&self, z: Complex64) -> Complex64 {
        self.eigs.iter().zip(&self.phi).map(|(l, p)| p * p / (*l - z)).sum()
    }

    /// diag(λ) + tφφᵀ.
    pub fn dense(&self, t: f64) -> DMatrix<f64> {
        let phi = DVector::from_column_slice(&self.phi);
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigs)) + t * &phi * phi.transpose()
    }
}

impl Herglotz for FiniteModel {
    fn eval(&self, z: Complex64) -> Complex64 {
        self.m_complex(z)
    }
}

pub fn m_function(model: &FiniteModel, z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && model.eigs.contains(&z.re) {
        return Err(Error::Domain(format!("{} is an eigenvalue", z.re)));
    }
    Ok(model.m_complex(z))
}

/// Root of the increasing function M(x) + 1/t on (a, b) by bisection.
fn bisect_secular(model: &FiniteModel, t: f64, mut a: f64, mut b: f64) -> f64 {
    let target = -1.0 / t;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if model.m_real(m) < target {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Spectrum of A + tφφᵀ from the secular equation 1 + tM(x) = 0, with
/// residue weights 1/(t² M'(x)).
pub fn secular_spectrum(model: &FiniteModel, t: f64) -> PerturbedSpectrum {
    if t == 0.0 {
        return PerturbedSpectrum { t, eigenvalues: model.eigs.clone(), weights: model.weights0() };
    }
    let e = &model.eigs;
    let n = e.len();
    let mut brackets = Vec::with_capacity(n);
    if t > 0.0 {
        for i in 0..n - 1 {
            brackets.push((e[i], e[i + 1]));
        }
        brackets.push((e[n - 1], e[n - 1] + t + 1.0));
    } else {
        brackets.push((e[0] + t - 1.0, e[0]));
        for i in 0..n - 1 {
            brackets.push((e[i], e[i + 1]));
        }
    }
    let eigenvalues: Vec<f64> = brackets.iter().map(|&(a, b)| bisect_secular(model, t, a, b)).collect();
    let weights = eigenvalues.iter().map(|&x| 1.0 / (t * t * model.m_prime_real(x))).collect();
    PerturbedSpectrum { t, eigenvalues, weights }
}

/// Dense symmetric eigendecomposition of A + tφφᵀ, weights (φ·v)².
pub fn dense_spectrum(model: &FiniteModel, t: f64) -> PerturbedSpectrum {
    let eig = SymmetricEigen::new(model.dense(t));
    let phi = DVector::from_column_slice(&model.phi);
    let mut pairs: Vec<(f64, f64)> = (0..model.len())
        .map(|i| (eig.eigenvalues[i], phi.dot(&eig.eigenvectors.column(i)).powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    PerturbedSpectrum {
        t,
        eigenvalues: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Secular spectrum, cross-checked against the dense solver.
pub fn perturbed_spectrum(model: &FiniteModel, t: f64) -> Result<PerturbedSpectrum> {
    let s = secular_spectrum(model, t);
    let d = dense_spectrum(model, t);
    let scale = s.eigenvalues.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    for i in 0..model.len() {
        let de = (s.eigenvalues[i] - d.eigenvalues[i]).abs();
        let dw = (s.weights[i] - d.weights[i]).abs();
        if de > 1e-10 * scale || dw > 1e-8 {
            return Err(Error::NonConvergence(format!(
                "secular and dense spectra disagree at index {i} (t = {t}): Δλ = {de:e}, Δw = {dw:e}"
            )));
        }
    }
    Ok(s)
}

/// ξ(λ; A_t, A) = #{eig A < λ} - #{eig A_t < λ}, nonnegative for t > 0.
pub fn spectral_shift_counting(model: &FiniteModel, t: f64, lambda: f64) -> f64 {
    let base = model.eigs.iter().filter(|&&e| e < lambda).count() as f64;
    base - secular_spectrum(model, t).count_below(lambda) as f64
}

/// ∫_lo^hi #{e < λ} dλ for a finite list of points.
fn counting_integral(eigs: &[f64], lo: f64, hi: f64) -> f64 {
    eigs.iter().map(|&e| (hi - e.max(lo)).max(0.0)).sum()
}

/// Parameter values in (t1, t2) where an eigenvalue of A_t sits at lo or hi.
pub fn crossing_parameters(model: &FiniteModel, lo: f64, hi: f64, t1: f64, t2: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    for x in [lo, hi] {
        if model.eigs.contains(&x) {
            continue;
        }
        let m = model.m_real(x);
        if m != 0.0 {
            out.push(-1.0 / m);
        }
    }
    out.retain(|&t| t > t1 && t < t2);
    out
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Comparison {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

impl Comparison {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        Comparison { lhs, rhs, residual: (lhs - rhs).abs() }
    }
}

/// ∫_{t1}^{t2} μ_t(Δ) dt against ∫_Δ (ξ(·; A_{t2}, A) - ξ(·; A_{t1}, A)).
pub fn birman_solomyak_check(model: &FiniteModel, lo: f64, hi: f64, t1: f64, t2: f64) -> Result<Comparison> {
    if !(t1 <= t2) {
        return Err(Error::Precondition(format!("need t1 <= t2, got ({t1}, {t2})")));
    }
    if t1 == t2 {
        return Ok(Comparison::new(0.0, 0.0));
    }
    let breaks = crossing_parameters(model, lo, hi, t1, t2);
    let lhs = integrate(|t| secular_spectrum(model, t).mass_open(lo, hi), t1, t2, &breaks, 1e-13)?.value;
    let e1 = secular_spectrum(model, t1).eigenvalues;
    let e2 = secular_spectrum(model, t2).eigenvalues;
    let rhs = counting_integral(&e1, lo, hi) - counting_integral(&e2, lo, hi);
    Ok(Comparison::new(lhs, rhs))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Universality {
    pub value: f64,
    pub body: f64,
    pub tail_left: Tail,
    pub tail_right: Tail,
    /// Size of the fitted tails, a bound on the tail model error.
    pub budget: f64,
}

/// ∫_{-T}^{T} μ_t(Δ) dt plus fitted C/t² tails.
pub fn universality_check(model: &FiniteModel, lo: f64, hi: f64, t_cut: f64) -> Result<Universality> {
    if !(hi > lo) {
        let z = Tail { value: 0.0, slope: f64::NAN, coefficient: 0.0 };
        return Ok(Universality { value: 0.0, body: 0.0, tail_left: z, tail_right: z, budget: 0.0 });
    }
    let f = |t: f64| secular_spectrum(model, t).mass_open(lo, hi);
    let mut breaks = crossing_parameters(model, lo, hi, -t_cut, t_cut);
    let mut d = 1.0;
    while d < t_cut {
        breaks.push(d);
        breaks.push(-d);
        d *= 10.0;
    }
    let body = integrate(f, -t_cut, t_cut, &breaks, 1e-10)?.value;
    let tail_left = inverse_square_tail(f, -t_cut)?;
    let tail_right = inverse_square_tail(f, t_cut)?;
    let value = body + tail_left.value + tail_right.value;
    Ok(Universality { value, body, tail_left, tail_right, budget: tail_left.value + tail_right.value })
}

/// Max-norm residual of (A_t - z)⁻¹ = R - t/(1 + tM(z))·Rφφᵀ R with R = (A - z)⁻¹.
pub fn resolvent_identity_check(model: &FiniteModel, t: f64, z: Complex64) -> Result<f64> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("{z} is not in the upper half-plane")));
    }
    let n = model.len();
    let at = model.dense(t).map(|v| Complex64::new(v, 0.0));
    let shifted = at - DMatrix::<Complex64>::identity(n, n) * z;
    let lhs = shifted
        .try_inverse()
        .ok_or_else(|| Error::Domain("A_t - z is singular".into()))?;
    let r: Vec<Complex64> = model.eigs.iter().map(|l| 1.0 / (*l - z)).collect();
    let m = model.m_complex(z);
    let k = t / (1.0 + t * m);
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let base = if i == j { r[i] } else { Complex64::new(0.0, 0.0) };
            let rhs = base - k * r[i] * model.phi[i] * model.phi[j] * r[j];
            worst = worst.max((lhs[(i, j)] - rhs).norm());
        }
    }
    Ok(worst)
}

/// The Krein-family function N(z) = z + (1 + z²)M(z) of a model.
pub fn n_function(model: &FiniteModel, z: Complex64) -> Complex64 {
    z + (1.0 + z * z) * model.m_complex(z)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KreinReport {
    /// |φᵀ(zA + I)(A - z)⁻¹φ - (z + (1+z²)M(z))|.
    pub trace_residual: f64,
    /// |f_t(N) - g_{arctan t}(N)| for the rotation flow.
    pub reparam_residual: f64,
    pub re_n_at_i: f64,
}

pub fn krein_function_checks(model: &FiniteModel, t: f64, z: Complex64) -> Result<KreinReport> {
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("{z} is not in the upper half-plane")));
    }
    let trace: Complex64 = model
        .eigs
        .iter()
        .zip(&model.phi)
        .map(|(l, p)| p * p * (z * *l + 1.0) / (*l - z))
        .sum();
    let n = n_function(model, z);
    let f_t = (n - t) / (t * n + 1.0);
    let rot = crate::sl2::exponential(&crate::sl2::LieElement::new(-1.0, 0.0, 1.0), t.atan());
    let g = rot.apply(n);
    Ok(KreinReport {
        trace_residual: (trace - n).norm(),
        reparam_residual: (f_t - g).norm(),
        re_n_at_i: n_function(model, Complex64::i()).re,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::SQRT_2;

    pub(crate) fn random_model(rng: &mut impl Rng, n: usize) -> FiniteModel {
        let mut eigs: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut phi: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
        let norm = phi.iter().map(|p| p * p).sum::<f64>().sqrt();
        phi.iter_mut().for_each(|p| *p /= norm);
        FiniteModel::new(eigs, phi).unwrap()
    }

    #[test]
    fn m_function_examples() {
        let m = FiniteModel::two_level();
        let z = Complex64::new(0.3, 0.8);
        assert!((m_function(&m, z).unwrap() - z / (1.0 - z * z)).norm() < 1e-15);
        assert!((m_function(&m, Complex64::i()).unwrap() - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        let s = FiniteModel::single_level(0.0);
        assert!((m_function(&s, z).unwrap() + 1.0 / z).norm() < 1e-15);
        assert!(m_function(&m, Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn two_level_spectrum() {
        let m = FiniteModel::two_level();
        let s0 = perturbed_spectrum(&m, 0.0).unwrap();
        assert_eq!(s0.eigenvalues, vec![-1.0, 1.0]);
        assert!((s0.weights[0] - 0.5).abs() < 1e-15);
        let s = perturbed_spectrum(&m, 2.0).unwrap();
        assert!((s.eigenvalues[0] - (1.0 - SQRT_2)).abs() < 1e-14);
        assert!((s.eigenvalues[1] - (1.0 + SQRT_2)).abs() < 1e-14);
        // residue oracle with M' = (1+λ²)/(1-λ²)²
        for (e, w) in s.eigenvalues.iter().zip(&s.weights) {
            let mp = (1.0 + e * e) / (1.0 - e * e).powi(2);
            assert!((w - 1.0 / (4.0 * mp)).abs() < 1e-12);
        }
        assert!((s.weights[1] - 0.85355).abs() < 1e-5 && (s.weights[0] - 0.14645).abs() < 1e-5);
    }

    #[test]
    fn interlacing_and_normalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            let n = rng.gen_range(1..12);
            let m = random_model(&mut rng, n);
            let t = rng.gen_range(-6.0..6.0);
            let s = perturbed_spectrum(&m, t).unwrap();
            assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..n {
                if t > 0.0 {
                    assert!(m.eigs[i] < s.eigenvalues[i]);
                    if i + 1 < n {
                        assert!(s.eigenvalues[i] < m.eigs[i + 1]);
                    }
                } else {
                    assert!(s.eigenvalues[i] < m.eigs[i]);
                    if i > 0 {
                        assert!(m.eigs[i - 1] < s.eigenvalues[i]);
                    }
                }
            }
        }
    }

    #[test]
    fn counting_examples() {
        let m = FiniteModel::two_level();
        assert_eq!(spectral_shift_counting(&m, 2.0, 0.0), 0.0);
        assert_eq!(spectral_shift_counting(&m, 2.0, 2.0), 1.0);
        assert_eq!(spectral_shift_counting(&m, 2.0, -5.0), 0.0);
    }

    #[test]
    fn birman_solomyak_examples() {
        let m = FiniteModel::two_level();
        let c = birman_solomyak_check(&m, 0.0, 3.0, 0.0, 2.0).unwrap();
        assert!((c.rhs - SQRT_2).abs() < 1e-14 && c.residual < 1e-8);
        assert_eq!(birman_solomyak_check(&m, 0.0, 3.0, 1.0, 1.0).unwrap().lhs, 0.0);
        let c = birman_solomyak_check(&m, 10.0, 11.0, 0.0, 2.0).unwrap();
        assert_eq!(c.lhs, 0.0);
        assert_eq!(c.rhs, 0.0);
    }

    #[test]
    fn universality_examples() {
        let m = FiniteModel::two_level();
        let u = universality_check(&m, 0.0, 3.0, 1e4).unwrap();
        assert!((u.value - 3.0).abs() < 1e-3, "{u:?}");
        let u = universality_check(&m, -10.0, 10.0, 1e4).unwrap();
        assert!((u.value - 20.0).abs() < 1e-2, "{u:?}");
        assert_eq!(universality_check(&m, 1.0, 1.0, 1e4).unwrap().value, 0.0);
    }

    #[test]
    fn resolvent_identity() {
        let m = FiniteModel::two_level();
        assert!(resolvent_identity_check(&m, 1.0, Complex64::i()).unwrap() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let m = random_model(&mut rng, 8);
            let z = Complex64::new(rng.gen_range(-5.0..5.0), rng.gen_range(0.1..2.0));
            let t = rng.gen_range(-3.0..3.0);
            assert!(resolvent_identity_check(&m, t, z).unwrap() < 1e-10);
        }
        // t → 0 reduces to the unperturbed resolvent without dividing by t
        assert!(resolvent_identity_check(&m, 0.0, Complex64::i()).unwrap() < 1e-12);
    }

    #[test]
    fn krein_examples() {
        let m = FiniteModel::two_level();
        let r = krein_function_checks(&m, 0.7, Complex64::new(0.2, 0.9)).unwrap();
        assert!(r.trace_residual < 1e-12 && r.reparam_residual < 1e-12);
        assert!(r.re_n_at_i.abs() < 1e-15);
        let s = FiniteModel::single_level(0.0);
        let z = Complex64::new(-0.4, 1.3);
        assert!((n_function(&s, z) + 1.0 / z).norm() < 1e-15);
    }
}

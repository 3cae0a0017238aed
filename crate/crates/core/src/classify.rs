//! Pointwise evidence for the invariant sets 𝒜 (boundary value in ℂ₊),
//! 𝒫 (ε·Im M or ε⁻¹·Im M has a finite positive limit) and 𝒮 (the rest), and
//! the ε-scaling exponent of Im M.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::herglotz::{boundary_value, normal_derivative, EpsSchedule, FnHerglotz, Herglotz, HerglotzRep};
use crate::measure::{fat_cantor_density, AcPiece, Atom, CantorComponent, Density, MeasureSpec};
use crate::sl2::{cos_sin, exponential, GroupElement, LieElement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    #[serde(rename = "AC")]
    Ac,
    #[serde(rename = "PP")]
    Pp,
    #[serde(rename = "SC")]
    Sc,
    #[serde(rename = "UNDETERMINED")]
    Undetermined,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Thresholds {
    pub im_min: f64,
    /// Largest relative change over the last decade that counts as stable.
    pub stable_rel: f64,
    pub r2_min: f64,
    pub kappa_lo: f64,
    pub kappa_hi: f64,
    /// Smallest limit that counts as positive.
    pub pos_min: f64,
    pub scaling_range: (f64, f64),
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            im_min: 1e-4,
            stable_rel: 0.01,
            r2_min: 0.99,
            kappa_lo: 0.05,
            kappa_hi: 0.95,
            pos_min: 1e-12,
            scaling_range: (1e-8, 1e-3),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Evidence {
    pub boundary_re: f64,
    pub boundary_im: f64,
    pub boundary_converged: bool,
    /// ε·Im M at the smallest ε, if stable.
    pub atom_limit: Option<f64>,
    /// ε⁻¹·Im M at the smallest ε, if stable.
    pub derivative_limit: Option<f64>,
    /// Whether the normal-derivative extraction succeeded.
    pub derivative_ok: bool,
    pub kappa_hat: f64,
    pub fit_r2: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PointClass {
    pub lambda: f64,
    pub class: ClassLabel,
    pub kappa_hat: f64,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScalingEstimate {
    pub lambda: f64,
    pub kappa_hat: f64,
    pub fit_r2: f64,
    pub eps_range: (f64, f64),
    pub fit_ok: bool,
}

/// 1 + slope of log Im M(λ+iε) against log ε, 8 points per decade.
pub fn scaling_exponent<H: Herglotz + ?Sized>(m0: &H, lambda: f64, eps_range: (f64, f64)) -> Result<ScalingEstimate> {
    let (lo, hi) = eps_range;
    if !(1e-9 * (1.0 - 1e-12) <= lo && lo < hi && hi <= 1e-1 * (1.0 + 1e-12)) {
        return Err(Error::Precondition(format!("ε-range ({lo}, {hi}) must lie within [1e-9, 1e-1]")));
    }
    let n = ((hi / lo).log10() * 8.0).round().max(2.0) as usize;
    let mut xs = Vec::with_capacity(n + 1);
    let mut ys = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let e = lo * (hi / lo).powf(k as f64 / n as f64);
        let im = m0.eval(Complex64::new(lambda, e)).im;
        if im > 0.0 {
            xs.push(e.ln());
            ys.push(im.ln());
        }
    }
    let (slope, r2) = fit_line(&xs, &ys);
    let kappa_hat = 1.0 + slope;
    Ok(ScalingEstimate { lambda, kappa_hat, fit_r2: r2, eps_range, fit_ok: r2 >= 0.99 })
}

/// Least-squares slope and r² (NaN when fewer than three points).
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n < 3 {
        return (f64::NAN, 0.0);
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    (slope, r2)
}

/// Value at the smallest ε when it is positive and changed by less than
/// `rel` over the last decade.
fn stable_limit(vals: &[f64], per_decade: usize, rel: f64, pos_min: f64) -> Option<f64> {
    let n = vals.len();
    if n <= per_decade {
        return None;
    }
    let (last, prev) = (vals[n - 1], vals[n - 1 - per_decade]);
    let ok = last.is_finite() && last > pos_min && (last - prev).abs() <= rel * last;
    ok.then_some(last)
}

/// Whether a scaling exponent counts as fractional. Points of 𝒮 show Im M
/// growing like ε^{κ-1}; under a Möbius map with c ≠ 0 the same point shows
/// Im decaying like ε^{1-κ}, so the mirrored window 2 - κ is accepted too.
fn fractional(k: f64, th: &Thresholds) -> bool {
    (k > th.kappa_lo && k < th.kappa_hi) || (k > 2.0 - th.kappa_hi && k < 2.0 - th.kappa_lo)
}

pub fn classify_point<H: Herglotz + ?Sized>(m0: &H, lambda: f64, sched: &EpsSchedule, th: &Thresholds) -> PointClass {
    let bv = boundary_value(m0, lambda, sched);
    let grid = sched.grid();
    let ims: Vec<f64> = grid.iter().map(|&e| m0.eval(Complex64::new(lambda, e)).im).collect();
    let atom: Vec<f64> = grid.iter().zip(&ims).map(|(e, v)| e * v).collect();
    let deriv: Vec<f64> = grid.iter().zip(&ims).map(|(e, v)| v / e).collect();
    let ppd = sched.points_per_decade as usize;
    let atom_limit = stable_limit(&atom, ppd, th.stable_rel, th.pos_min);
    let derivative_limit = stable_limit(&deriv, ppd, th.stable_rel, th.pos_min);
    let derivative_ok = normal_derivative(m0, lambda, sched).is_ok();
    let sc = scaling_exponent(m0, lambda, th.scaling_range).ok();
    let (kappa_hat, fit_r2) = sc.map(|s| (s.kappa_hat, s.fit_r2)).unwrap_or((f64::NAN, 0.0));
    let evidence = Evidence {
        boundary_re: bv.re,
        boundary_im: bv.im,
        boundary_converged: bv.converged,
        atom_limit,
        derivative_limit,
        derivative_ok,
        kappa_hat,
        fit_r2,
    };
    let class = if bv.converged && bv.im > th.im_min {
        ClassLabel::Ac
    } else if atom_limit.is_some() || derivative_limit.is_some() {
        ClassLabel::Pp
    } else if fit_r2 > th.r2_min && fractional(kappa_hat, th) {
        ClassLabel::Sc
    } else {
        ClassLabel::Undetermined
    };
    PointClass { lambda, class, kappa_hat, evidence }
}

pub fn classify_points<H: Herglotz + ?Sized>(m0: &H, lambdas: &[f64], sched: &EpsSchedule, th: &Thresholds) -> Vec<PointClass> {
    lambdas.par_iter().map(|&l| classify_point(m0, l, sched, th)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub compared: usize,
    pub disagreements: usize,
    pub undetermined: usize,
    pub base: Vec<ClassLabel>,
    pub image: Vec<ClassLabel>,
}

/// Classes of M₀ and g∘M₀ side by side.
pub fn invariance_check<H: Herglotz + ?Sized>(
    m0: &H,
    g: &GroupElement,
    lambdas: &[f64],
    sched: &EpsSchedule,
    th: &Thresholds,
) -> InvarianceReport {
    let image_fn = FnHerglotz(|z| g.apply(m0.eval(z)));
    let base: Vec<ClassLabel> = classify_points(m0, lambdas, sched, th).iter().map(|p| p.class).collect();
    let image: Vec<ClassLabel> = classify_points(&image_fn, lambdas, sched, th).iter().map(|p| p.class).collect();
    let mut r = InvarianceReport { compared: 0, disagreements: 0, undetermined: 0, base, image };
    for (a, b) in r.base.iter().zip(&r.image) {
        if *a == ClassLabel::Undetermined || *b == ClassLabel::Undetermined {
            r.undetermined += 1;
        } else {
            r.compared += 1;
            if a != b {
                r.disagreements += 1;
            }
        }
    }
    r
}

/// Random real 2×2 matrix of determinant one with moderate entries.
pub fn random_unimodular(rng: &mut impl Rng) -> GroupElement {
    let mut a: f64 = rng.gen_range(0.4..2.0);
    if rng.gen_bool(0.5) {
        a = -a;
    }
    let b = rng.gen_range(-2.0..2.0);
    let c = rng.gen_range(-2.0..2.0);
    GroupElement { a, b, c, d: (1.0 + b * c) / a }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KappaPoint {
    pub lambda: f64,
    pub max_observed: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Checks ε^{1-κ} Im M_t(λ+iε) ≤ 1/(c_t² · min_ε ε^{κ-1} Im M₀(λ+iε)) on the
/// schedule grid, the estimate Im M_t ≤ 1/(c_t² Im M₀).
pub fn kappa_continuity_check<H: Herglotz + ?Sized>(
    x: &LieElement,
    m0: &H,
    t: f64,
    lambdas: &[f64],
    kappa: f64,
    sched: &EpsSchedule,
) -> Result<Vec<KappaPoint>> {
    let (_, s) = cos_sin(x, t);
    let c = x.gamma * s;
    if c == 0.0 {
        return Err(Error::Precondition(format!("c_t vanishes at t = {t}")));
    }
    let g = exponential(x, t);
    let grid = sched.grid();
    Ok(lambdas
        .par_iter()
        .map(|&lambda| {
            let mut low = f64::INFINITY;
            let mut high = 0.0f64;
            for &e in &grid {
                let m = m0.eval(Complex64::new(lambda, e));
                low = low.min(e.powf(kappa - 1.0) * m.im);
                high = high.max(e.powf(1.0 - kappa) * g.apply(m).im);
            }
            let bound = 1.0 / (c * c * low);
            // rounding slack for the pointwise inequality
            KappaPoint { lambda, max_observed: high, bound, pass: high <= bound * (1.0 + 1e-9) }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FatSample {
    pub lambda: f64,
    pub im: f64,
    pub below: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FatCantorReport {
    pub removed_total: f64,
    pub k_measure: f64,
    pub eps: f64,
    pub threshold: f64,
    pub samples: Vec<FatSample>,
    /// Fraction of sampled K-points with Im M below the threshold.
    pub agreement: f64,
    pub ac_support: (f64, f64),
    /// Class of the removed-interval midpoint 1/2.
    pub gap_center_class: ClassLabel,
    /// Im M at the endpoint of the first removed interval. The density jumps
    /// there, so the value tends to π/2 instead of 0.
    pub first_gap_endpoint_im: f64,
}

/// Points of K, Im M(λ+iε) there, and the ac support of the fat-Cantor fixture.
/// Sampled points avoid the neighbourhoods of large removed intervals, where
/// Im M at fixed ε still sees the adjacent density.
pub fn fat_cantor_counterexample(removed_total: f64, samples: usize, seed: u64) -> Result<FatCantorReport> {
    let piece = fat_cantor_density(removed_total)?;
    let geo = piece.geometry().expect("fat cantor piece has a geometry");
    let mu = MeasureSpec { ac: vec![piece.clone()], ..Default::default() };
    let m = HerglotzRep::new(0.0, 0.0, mu)?;
    let eps = 1e-6;
    let threshold = 1e-2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        // Runs of equal turns are capped at two, which keeps λ at a bounded
        // ratio of distance from every removed interval of larger size.
        let mut path: Vec<bool> = Vec::with_capacity(50);
        for n in 0..50 {
            let forced = n >= 2 && path[n - 1] == path[n - 2];
            path.push(if forced { !path[n - 1] } else { rng.gen_bool(0.5) });
        }
        let lambda = geo.k_point(&path);
        let im = m.eval(Complex64::new(lambda, eps)).im;
        out.push(FatSample { lambda, im, below: im <= threshold });
    }
    let agreement = out.iter().filter(|s| s.below).count() as f64 / samples.max(1) as f64;
    let first = geo.gaps_at_stage(0)[0];
    let gap_center_class = classify_point(&m, 0.5, &EpsSchedule::default(), &Thresholds::default()).class;
    Ok(FatCantorReport {
        removed_total,
        k_measure: geo.k_measure(),
        eps,
        threshold,
        samples: out,
        agreement,
        ac_support: (piece.lo, piece.hi),
        gap_center_class,
        first_gap_endpoint_im: m.eval(Complex64::new(first.0, eps)).im,
    })
}

/// uniform[0,1] + 0.3·δ₂ + middle-thirds Cantor on [3,4].
pub fn mixed_fixture() -> HerglotzRep {
    let mu = MeasureSpec {
        atoms: vec![Atom { pos: 2.0, w: 0.3 }],
        ac: vec![AcPiece { lo: 0.0, hi: 1.0, density: Density::Constant { c: 1.0 } }],
        cantor: vec![CantorComponent { lo: 3.0, hi: 4.0, ..CantorComponent::standard() }],
    };
    HerglotzRep::new(0.0, 0.0, mu).expect("mixed fixture is valid")
}

/// A point of the middle-thirds set on [lo, hi] with ternary digits in {0, 2}.
pub fn cantor_point(lo: f64, hi: f64, digits: &[bool]) -> f64 {
    let mut u = 0.0;
    let mut s = 1.0;
    for &d in digits {
        s /= 3.0;
        if d {
            u += 2.0 * s;
        }
    }
    lo + (hi - lo) * u
}

/// Thirty labeled points of [`mixed_fixture`].
pub fn mixed_labels() -> Vec<(f64, ClassLabel)> {
    let mut v: Vec<(f64, ClassLabel)> = (0..10).map(|k| (0.05 + 0.1 * k as f64, ClassLabel::Ac)).collect();
    for l in [2.0, -2.0, -0.5, 1.5, 2.5, 2.9, 3.5, 4.5, 6.0, 10.0] {
        v.push((l, ClassLabel::Pp));
    }
    v.push((3.25, ClassLabel::Sc));
    v.push((3.75, ClassLabel::Sc));
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for _ in 0..8 {
        let digits: Vec<bool> = (0..34).map(|_| rng.gen_bool(0.5)).collect();
        v.push((cantor_point(3.0, 4.0, &digits), ClassLabel::Sc));
    }
    v
}

/// log-log regression of the Cantor CDF mass of [λ-δ, λ+δ] against δ.
pub fn cdf_ratio_dimension(c: &CantorComponent, lambda: f64, delta_range: (f64, f64)) -> f64 {
    let (lo, hi) = delta_range;
    let n = ((hi / lo).log10() * 8.0).round() as usize;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 0..=n {
        let d = lo * (hi / lo).powf(k as f64 / n as f64);
        let m = crate::measure::cantor_cdf(c, lambda + d) - crate::measure::cantor_cdf(c, lambda - d);
        if m > 0.0 {
            xs.push(d.ln());
            ys.push(m.ln());
        }
    }
    fit_line(&xs, &ys).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herglotz::ConstantHerglotz;

    fn uniform() -> HerglotzRep {
        let mu = MeasureSpec {
            ac: vec![AcPiece { lo: 0.0, hi: 1.0, density: Density::Constant { c: 1.0 } }],
            ..Default::default()
        };
        HerglotzRep::new(0.0, 0.0, mu).unwrap()
    }

    fn cantor() -> HerglotzRep {
        let mu = MeasureSpec { cantor: vec![CantorComponent::standard()], ..Default::default() };
        HerglotzRep::new(0.0, 0.0, mu).unwrap()
    }

    #[test]
    fn point_examples() {
        let s = EpsSchedule::default();
        let th = Thresholds::default();
        let p = classify_point(&uniform(), 0.5, &s, &th);
        assert_eq!(p.class, ClassLabel::Ac);
        assert!((p.evidence.boundary_im - std::f64::consts::PI).abs() < 1e-6);
        let d = HerglotzRep::new(0.0, 0.0, MeasureSpec { atoms: vec![Atom { pos: 2.0, w: 0.3 }], ..Default::default() }).unwrap();
        let p = classify_point(&d, 2.0, &s, &th);
        assert_eq!(p.class, ClassLabel::Pp);
        assert!((p.evidence.atom_limit.unwrap() - 0.3).abs() < 1e-9);
        let p = classify_point(&cantor(), 0.25, &s, &th);
        assert_eq!(p.class, ClassLabel::Sc, "{p:?}");
        assert!((p.kappa_hat - 2f64.ln() / 3f64.ln()).abs() < 0.05);
    }

    #[test]
    fn second_branch_matches_derivative_characterization() {
        let s = EpsSchedule::default();
        let th = Thresholds::default();
        for l in [-1.0, 1.5, 3.0] {
            let p = classify_point(&uniform(), l, &s, &th);
            assert_eq!(p.class, ClassLabel::Pp);
            assert_eq!(p.evidence.derivative_limit.is_some(), p.evidence.derivative_ok);
        }
        let z = FnHerglotz(|z: Complex64| z);
        let p = classify_point(&z, 0.7, &s, &th);
        assert_eq!(p.class, ClassLabel::Pp);
        assert!((p.evidence.derivative_limit.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(classify_point(&ConstantHerglotz { re: 0.0, im: 1.0 }, 3.0, &s, &th).class, ClassLabel::Ac);
    }

    #[test]
    fn scaling_examples() {
        let u = scaling_exponent(&uniform(), 0.4, (1e-8, 1e-3)).unwrap();
        assert!((u.kappa_hat - 1.0).abs() < 0.02);
        let d = HerglotzRep::new(0.0, 0.0, MeasureSpec { atoms: vec![Atom { pos: 0.0, w: 1.0 }], ..Default::default() }).unwrap();
        let a = scaling_exponent(&d, 0.0, (1e-8, 1e-3)).unwrap();
        assert!(a.kappa_hat.abs() < 0.02);
        assert!(scaling_exponent(&d, 0.0, (1e-10, 1e-3)).is_err());
    }

    #[test]
    fn cdf_oracle_dimension() {
        let c = CantorComponent::standard();
        let k = cdf_ratio_dimension(&c, 0.25, (1e-8, 1e-2));
        assert!((k - 2f64.ln() / 3f64.ln()).abs() < 0.05, "{k}");
    }

    #[test]
    fn invariance_examples() {
        let s = EpsSchedule::default();
        let th = Thresholds::default();
        let d = HerglotzRep::new(0.0, 0.0, MeasureSpec { atoms: vec![Atom { pos: 2.0, w: 0.3 }], ..Default::default() }).unwrap();
        let g = GroupElement { a: 1.0, b: 0.0, c: 1.0, d: 1.0 };
        let r = invariance_check(&d, &g, &[2.0], &s, &th);
        assert_eq!(r.base, vec![ClassLabel::Pp]);
        assert_eq!(r.image, vec![ClassLabel::Pp]);
        let (c, sn) = (std::f64::consts::FRAC_PI_4.cos(), std::f64::consts::FRAC_PI_4.sin());
        let rot = GroupElement { a: c, b: -sn, c: sn, d: c };
        let r = invariance_check(&uniform(), &rot, &[0.5], &s, &th);
        assert_eq!((r.base[0], r.image[0]), (ClassLabel::Ac, ClassLabel::Ac));
        let r = invariance_check(&uniform(), &GroupElement::IDENTITY, &[0.5, 2.0], &s, &th);
        assert_eq!(r.disagreements, 0);
    }

    #[test]
    fn kappa_examples() {
        let s = EpsSchedule::default();
        let x = LieElement::new(0.0, 0.0, 1.0);
        let r = kappa_continuity_check(&x, &cantor(), 1.0, &[0.25], 0.63, &s).unwrap();
        assert!(r[0].pass);
        assert!(kappa_continuity_check(&x, &cantor(), 0.0, &[0.25], 0.63, &s).is_err());
        let r = kappa_continuity_check(&x, &uniform(), 1.0, &[0.3, 0.6], 1.0, &s).unwrap();
        assert!(r.iter().all(|p| p.pass));
    }

    #[test]
    fn fat_cantor_examples() {
        let r = fat_cantor_counterexample(0.5, 10, 7).unwrap();
        assert_eq!(r.k_measure, 0.5);
        assert_eq!(r.agreement, 1.0, "{r:?}");
        assert_eq!(r.gap_center_class, ClassLabel::Ac);
        assert!((r.first_gap_endpoint_im - std::f64::consts::FRAC_PI_2).abs() < 1e-2);
    }
}

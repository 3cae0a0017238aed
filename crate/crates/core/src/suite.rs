//! The acceptance suite. Each criterion returns judged rows; a criterion
//! passes when every row passes and it finishes inside its time budget.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::time::Instant;

use crate::averaging::{extension_average, extension_family, global_average, global_xi_integral, verify_mz, Truncation};
use crate::classify::{
    cantor_point, cdf_ratio_dimension, classify_points, fat_cantor_counterexample, invariance_check,
    kappa_continuity_check, mixed_fixture, mixed_labels, random_unimodular, scaling_exponent, ClassLabel, Thresholds,
};
use crate::error::Result;
use crate::fixtures::{self, Identity, CONSTANT_I, HYPERBOLIC, PARABOLIC, ROTATION};
use crate::herglotz::{atom_mass, EpsSchedule, Herglotz, HerglotzRep};
use crate::measure::{AcPiece, Atom, CantorComponent, Density, MeasureSpec};
use crate::quad::integrate;
use crate::rankone::{birman_solomyak_check, krein_function_checks, universality_check, FiniteModel};
use crate::report::ResultRow;
use crate::sl2::{exponential, group_law_check, ode_oracle, LieElement};
use crate::winding::check_integral_identity;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: String,
    pub pass: bool,
    pub seconds: f64,
    pub time_budget: f64,
    pub rows: Vec<ResultRow>,
    pub error: Option<String>,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let worst = self
            .rows
            .iter()
            .filter(|r| !r.pass)
            .map(|r| format!("{} residual {:.3e} > {:.1e}", r.name, r.residual, r.budget.unwrap_or(0.0)))
            .next()
            .or_else(|| self.error.clone())
            .unwrap_or_default();
        format!("[{verdict}] {:>2} {} ({:.2} s / {} s) {}", self.id, self.title, self.seconds, self.time_budget, worst)
    }
}

type Check = fn(u64) -> Result<Vec<ResultRow>>;

pub const CRITERIA: [(u8, &str, f64, Check); 13] = [
    (1, "group law of the one-parameter subgroup", 1.0, group_law),
    (2, "closed-form exponential against the ODE oracle", 1.0, exponential_oracle),
    (3, "argument identity for the Möbius trajectory", 10.0, trajectory_identity),
    (4, "averaged measure against the ξ density", 120.0, averaged_measure),
    (5, "universality, parabolic case", 30.0, universality_parabolic),
    (6, "universality, elliptic case", 5.0, universality_elliptic),
    (7, "non-universality, hyperbolic case", 10.0, hyperbolic_case),
    (8, "Birman-Solomyak formula", 30.0, birman_solomyak),
    (9, "Krein family identities and average", 30.0, krein_family),
    (10, "atom extraction", 5.0, atom_extraction),
    (11, "classification and Möbius invariance", 60.0, classification),
    (12, "Cantor scaling exponent and κ-continuity", 60.0, cantor_scaling),
    (13, "fat Cantor set", 30.0, fat_cantor),
];

pub fn run_criterion(id: u8, seed: u64) -> Option<CriterionResult> {
    let &(id, title, time_budget, check) = CRITERIA.iter().find(|c| c.0 == id)?;
    let start = Instant::now();
    let out = check(seed);
    let seconds = start.elapsed().as_secs_f64();
    let (rows, error) = match out {
        Ok(rows) => (rows, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let pass = error.is_none() && !rows.is_empty() && rows.iter().all(|r| r.pass) && seconds <= time_budget;
    Some(CriterionResult { id, title: title.into(), pass, seconds, time_budget, rows, error })
}

pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    CRITERIA.iter().filter_map(|c| run_criterion(c.0, seed)).collect()
}

fn random_generator(rng: &mut ChaCha8Rng) -> LieElement {
    LieElement::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
}

fn group_law(seed: u64) -> Result<Vec<ResultRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut worst_rel = 0.0f64;
    for _ in 0..100 {
        let x = random_generator(&mut rng);
        let s = rng.gen_range(-3.0..3.0);
        let t = rng.gen_range(-3.0..3.0);
        let r = group_law_check(&x, s, t);
        let g = exponential(&x, s + t);
        let scale = [g.a, g.b, g.c, g.d].iter().fold(1.0f64, |m, v| m.max(v.abs()));
        worst = worst.max(r);
        worst_rel = worst_rel.max(r / scale);
    }
    Ok(vec![
        ResultRow::residual("max |e^{(s+t)X} - e^{sX}e^{tX}|", worst, 1e-12),
        ResultRow::info("max residual relative to the largest entry", worst_rel, 0.0),
    ])
}

fn exponential_oracle(seed: u64) -> Result<Vec<ResultRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut worst_near = 0.0f64;
    for k in 0..100 {
        let near = k % 3 == 0;
        let x = if near {
            let gamma = rng.gen_range(1.0..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let beta = rng.gen_range(-1.0..1.0);
            let delta: f64 = rng.gen_range(-1e-6..1e-6);
            LieElement::new(-(beta * beta + delta) / gamma, beta, gamma)
        } else {
            random_generator(&mut rng)
        };
        let t = rng.gen_range(-3.0..3.0);
        let d = exponential(&x, t).max_diff(&ode_oracle(&x, t));
        if near {
            worst_near = worst_near.max(d);
        } else {
            worst = worst.max(d);
        }
    }
    Ok(vec![
        ResultRow::residual("generic draws, elementwise", worst, 1e-10),
        ResultRow::residual("draws with |det X| <= 1e-6, elementwise", worst_near, 1e-10),
    ])
}

fn trajectory_identity(seed: u64) -> Result<Vec<ResultRow>> {
    let i = Complex64::i();
    let mut rows = Vec::new();
    // Closed forms: ∫ Im(i/(ti+1)) dt = atan t, and the rotation fixes i.
    let p = check_integral_identity(&PARABOLIC, i, -1.5, 2.0)?;
    rows.push(ResultRow::compare("parabolic, z = i, lhs vs rhs", p.lhs, p.rhs, 1e-10));
    rows.push(ResultRow::compare("parabolic, z = i, lhs vs atan", p.lhs, 2f64.atan() + 1.5f64.atan(), 1e-10));
    let r = check_integral_identity(&ROTATION, i, -1.0, 4.0)?;
    rows.push(ResultRow::compare("rotation, z = i, lhs vs rhs", r.lhs, r.rhs, 1e-10));
    rows.push(ResultRow::compare("rotation, z = i, lhs vs 5", r.lhs, 5.0, 1e-10));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mut x = random_generator(&mut rng);
        if x.gamma.abs() < 0.05 {
            x.gamma = 0.05f64.copysign(x.gamma);
        }
        let z = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.1..2.0));
        let t1 = rng.gen_range(-3.0..0.0);
        let t2 = rng.gen_range(0.0..3.0);
        worst = worst.max(check_integral_identity(&x, z, t1, t2)?.residual);
    }
    rows.push(ResultRow::residual("20 random (X, z), max residual", worst, 1e-6));
    Ok(rows)
}

const INTERVALS: [(f64, f64); 5] = [(0.0, 3.0), (-2.0, 0.5), (-0.7, 1.3), (0.25, 0.75), (1.5, 4.0)];

fn averaged_measure(_seed: u64) -> Result<Vec<ResultRow>> {
    let s = EpsSchedule::default();
    let mut rows = Vec::new();
    let mut run = |name: &str, x: &LieElement, m: &dyn Herglotz, t1: f64, t2: f64, tol: f64, ivs: &[(f64, f64)]| -> Result<()> {
        for &iv in ivs {
            let c = verify_mz(x, m, iv, t1, t2, &s)?;
            rows.push(ResultRow::compare(format!("{name} on ({}, {})", iv.0, iv.1), c.lhs, c.rhs, tol));
        }
        Ok(())
    };
    run("point mass at 0, parabolic, [-1, 2]", &PARABOLIC, &fixtures::delta0(), -1.0, 2.0, 1e-6, &INTERVALS)?;
    run("two-level model, parabolic, [0, 2]", &PARABOLIC, &fixtures::two_level(), 0.0, 2.0, 1e-6, &INTERVALS)?;
    run("constant i, hyperbolic, [-0.5, 1]", &HYPERBOLIC, &CONSTANT_I, -0.5, 1.0, 1e-6, &INTERVALS)?;
    run("identity, rotation, [-1, 1.2]", &ROTATION, &Identity, -1.0, 1.2, 1e-6, &INTERVALS)?;
    let cantor_ivs = [(0.0, 1.0), (-1.0, 0.5), (0.2, 0.9), (1.0 / 3.0, 2.0), (-3.0, 3.0)];
    run("cantor measure, parabolic, [-1, 1]", &PARABOLIC, &fixtures::cantor(), -1.0, 1.0, 1e-3, &cantor_ivs)?;
    // The two-level value against the eigenvalue-counting oracle.
    let c = verify_mz(&PARABOLIC, &fixtures::two_level(), (0.0, 3.0), 0.0, 2.0, &s)?;
    rows.push(ResultRow::compare("two-level model (0, 3), [0, 2] vs sqrt 2", c.lhs, SQRT_2, 1e-6));
    Ok(rows)
}

fn universality_parabolic(_seed: u64) -> Result<Vec<ResultRow>> {
    let s = EpsSchedule::default();
    let g = global_average(&PARABOLIC, &fixtures::two_level(), (0.0, 3.0), &s, &Truncation::default())?;
    let oracle = universality_check(&fixtures::two_level(), 0.0, 3.0, 1e4)?;
    Ok(vec![
        ResultRow::compare("two-level model, (0, 3), T_cut 1e4 with fitted tail", g.value, 3.0, 1e-3),
        ResultRow::compare("secular-equation oracle", oracle.value, 3.0, 1e-3),
        ResultRow::info("fitted tail size", g.budget, 0.0),
    ])
}

/// ∫ csc² t dt over the t with -cot t ∈ (a, b), by quadrature in t. The map
/// λ ↦ atan(-1/λ) is increasing on each half-line, with λ = 0 split between
/// t = π/2 and t = -π/2.
fn cot_substitution(a: f64, b: f64) -> Result<f64> {
    let t_of = |l: f64| (-1.0 / l).atan();
    let f = |t: f64| 1.0 / t.sin().powi(2);
    let q = |x: f64, y: f64| -> Result<f64> { Ok(integrate(f, x, y, &[], 1e-12)?.value) };
    if a < 0.0 && b > 0.0 {
        Ok(q(t_of(a), FRAC_PI_2)? + q(-FRAC_PI_2, t_of(b))?)
    } else {
        q(t_of(a), t_of(b))
    }
}

fn universality_elliptic(_seed: u64) -> Result<Vec<ResultRow>> {
    let s = EpsSchedule::default();
    let t = Truncation::default();
    let mut rows = Vec::new();
    for (a, b) in [(-1.0, 2.5), (0.5, 3.0), (-3.0, -0.2)] {
        let g = global_average(&ROTATION, &Identity, (a, b), &s, &t)?;
        let oracle = cot_substitution(a, b)?;
        rows.push(ResultRow::compare(format!("identity under rotation, ({a}, {b})"), g.value, oracle, 1e-6));
        rows.push(ResultRow::compare(format!("substitution oracle, ({a}, {b}) vs |Δ|"), oracle, b - a, 1e-6));
    }
    Ok(rows)
}

fn hyperbolic_case(_seed: u64) -> Result<Vec<ResultRow>> {
    let s = EpsSchedule::default();
    let mut rows = Vec::new();
    for (a, b) in [(0.0, 2.0), (-1.5, 0.5)] {
        let len = b - a;
        let g = global_average(&HYPERBOLIC, &CONSTANT_I, (a, b), &s, &Truncation::default())?;
        rows.push(ResultRow::compare(format!("|γ|∫μ_t dt on ({a}, {b}) vs |Δ|/2"), g.value, 0.5 * len, 1e-6));
        // Im M_t = sech(2t), so the t-integral is |Δ|/π · π/2.
        let sech = integrate(|t: f64| 1.0 / (2.0 * t).cosh(), -40.0, 40.0, &[0.0], 1e-13)?.value;
        rows.push(ResultRow::compare("sech quadrature oracle", g.value, sech * len / PI, 1e-6));
        let xi = global_xi_integral(&HYPERBOLIC, &CONSTANT_I, (a, b))?;
        rows.push(ResultRow::compare("∫_Δ ξ_global", g.value, xi.value, 1e-6));
        rows.push(ResultRow::compare("ξ_global density vs 0.5", xi.value / len, 0.5, 1e-10));
        // The alternative closed form disagrees; reported, not judged.
        rows.push(ResultRow::info("alternative closed form density (discrepant)", xi.printed_variant / len, 0.5));
    }
    Ok(rows)
}

fn random_model(rng: &mut ChaCha8Rng) -> FiniteModel {
    let n = rng.gen_range(2..8);
    let mut eigs: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs.dedup();
    let mut phi: Vec<f64> = eigs.iter().map(|_| rng.gen_range(0.2..1.0)).collect();
    let norm = phi.iter().map(|p| p * p).sum::<f64>().sqrt();
    phi.iter_mut().for_each(|p| *p /= norm);
    FiniteModel::new(eigs, phi).expect("random model")
}

fn birman_solomyak(seed: u64) -> Result<Vec<ResultRow>> {
    let m = fixtures::two_level();
    let c = birman_solomyak_check(&m, 0.0, 3.0, 0.0, 2.0)?;
    let mut rows = vec![
        ResultRow::compare("two-level, (0, 3), [0, 2]: lhs vs sqrt 2", c.lhs, SQRT_2, 1e-8),
        ResultRow::compare("two-level, (0, 3), [0, 2]: rhs vs sqrt 2", c.rhs, SQRT_2, 1e-8),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = random_model(&mut rng);
        let lo = rng.gen_range(-5.0..3.0);
        let hi = lo + rng.gen_range(0.1..4.0);
        let t1 = rng.gen_range(-4.0..2.0);
        let t2 = t1 + rng.gen_range(0.1..4.0);
        worst = worst.max(birman_solomyak_check(&m, lo, hi, t1, t2)?.residual);
    }
    rows.push(ResultRow::residual("20 random models, max residual", worst, 1e-6));
    Ok(rows)
}

fn krein_family(seed: u64) -> Result<Vec<ResultRow>> {
    let s = EpsSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = 0.0f64;
    let mut reparam = 0.0f64;
    let mut re_n = 0.0f64;
    for k in 0..20 {
        let m = if k == 0 { fixtures::two_level() } else { random_model(&mut rng) };
        let z = Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(0.1..2.0));
        let r = krein_function_checks(&m, rng.gen_range(-3.0..3.0), z)?;
        trace = trace.max(r.trace_residual);
        reparam = reparam.max(r.reparam_residual);
        re_n = re_n.max(r.re_n_at_i.abs());
    }
    let fam = extension_family(&fixtures::two_level_rep())?;
    let e = extension_average(&fam, (0.0, 3.0), &s)?;
    Ok(vec![
        ResultRow::residual("trace formula, 20 models", trace, 1e-12),
        ResultRow::residual("reparametrization f_tan(s) = g_s", reparam.max(e.reparam_residual), 1e-12),
        ResultRow::residual("Re N(i)", re_n.max(e.re_n_at_i.abs()), 1e-12),
        ResultRow::compare("extension average, two-level, (0, 3)", e.value, 3.0, 1e-3),
    ])
}

fn atom_fixtures() -> Vec<(HerglotzRep, f64, f64)> {
    let with = |atoms: Vec<Atom>, ac: Vec<AcPiece>, cantor: Vec<CantorComponent>| {
        HerglotzRep::new(0.0, 0.0, MeasureSpec { atoms, ac, cantor }).expect("atom fixture")
    };
    let unif = |lo: f64, hi: f64, c: f64| AcPiece { lo, hi, density: Density::Constant { c } };
    let a = |pos: f64, w: f64| Atom { pos, w };
    vec![
        (with(vec![a(0.0, 1.0)], vec![], vec![]), 0.0, 1.0),
        (with(vec![a(2.0, 0.3)], vec![unif(0.0, 1.0, 1.0)], vec![]), 2.0, 0.3),
        (with(vec![a(0.5, 0.25)], vec![unif(0.0, 1.0, 1.0)], vec![]), 0.5, 0.25),
        (with(vec![a(-1.0, 0.5), a(1.0, 0.5)], vec![], vec![]), 1.0, 0.5),
        (with(vec![a(-3.0, 2.0), a(-2.999, 1.0)], vec![], vec![]), -3.0, 2.0),
        (with(vec![a(1e-3, 1e-4)], vec![], vec![]), 1e-3, 1e-4),
        (with(vec![a(5.0, 7.5)], vec![unif(4.0, 6.0, 0.5)], vec![]), 5.0, 7.5),
        (with(vec![a(2.0, 0.1)], vec![], vec![CantorComponent::standard()]), 2.0, 0.1),
        (with(vec![a(0.0, 1.0)], vec![], vec![CantorComponent::standard()]), 0.0, 1.0),
        (
            with(
                vec![a(0.25, 0.05), a(0.7, 0.4), a(-0.4, 0.2)],
                vec![unif(-1.0, 1.0, 0.3)],
                vec![CantorComponent { lo: 2.0, hi: 3.0, ..CantorComponent::standard() }],
            ),
            0.7,
            0.4,
        ),
    ]
}

fn atom_extraction(_seed: u64) -> Result<Vec<ResultRow>> {
    let s = EpsSchedule::default();
    let mut rows = Vec::new();
    for (k, (m, pos, w)) in atom_fixtures().into_iter().enumerate() {
        let a = atom_mass(&m, pos, &s);
        rows.push(ResultRow::compare(format!("fixture {k}: relative mass error"), a.mass / w, 1.0, 1e-6));
        rows.push(ResultRow::residual(format!("fixture {k}: lim ε Re M"), a.re_limit.abs(), 1e-6));
    }
    Ok(rows)
}

fn classification(seed: u64) -> Result<Vec<ResultRow>> {
    let s = EpsSchedule::default();
    let th = Thresholds::default();
    let m = mixed_fixture();
    let labels = mixed_labels();
    let lambdas: Vec<f64> = labels.iter().map(|l| l.0).collect();
    let got = classify_points(&m, &lambdas, &s, &th);
    let wrong = labels.iter().zip(&got).filter(|(l, g)| l.1 != g.class).count();
    let mut rows = vec![ResultRow::compare("misclassified labeled points (of 30)", wrong as f64, 0.0, 0.0)];
    let sample: Vec<f64> = lambdas.iter().step_by(3).chain(lambdas.iter().skip(1).step_by(3)).take(20).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut disagreements = 0;
    let mut undetermined = 0;
    for _ in 0..20 {
        let g = random_unimodular(&mut rng);
        let r = invariance_check(&m, &g, &sample, &s, &th);
        disagreements += r.disagreements;
        undetermined += r.undetermined;
    }
    rows.push(ResultRow::compare("disagreements over 20 maps x 20 points", disagreements as f64, 0.0, 0.0));
    rows.push(ResultRow::info("undetermined comparisons", undetermined as f64, 0.0));
    Ok(rows)
}

fn cantor_scaling(seed: u64) -> Result<Vec<ResultRow>> {
    let s = EpsSchedule::default();
    let kappa = 2f64.ln() / 3f64.ln();
    let m = fixtures::cantor();
    let c = CantorComponent::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<f64> = (0..10)
        .map(|_| cantor_point(0.0, 1.0, &(0..34).map(|_| rng.gen_bool(0.5)).collect::<Vec<_>>()))
        .collect();
    let mut worst = 0.0f64;
    let mut worst_oracle = 0.0f64;
    let mut worst_pair = 0.0f64;
    for &l in &points {
        let est = scaling_exponent(&m, l, (1e-8, 1e-3))?;
        let oracle = cdf_ratio_dimension(&c, l, (1e-8, 1e-3));
        worst = worst.max((est.kappa_hat - kappa).abs());
        worst_oracle = worst_oracle.max((oracle - kappa).abs());
        worst_pair = worst_pair.max((est.kappa_hat - oracle).abs());
    }
    let kc = kappa_continuity_check(&PARABOLIC, &m, 1.0, &points, kappa, &s)?;
    let failed = kc.iter().filter(|p| !p.pass).count();
    Ok(vec![
        ResultRow::residual("max |κ̂ - log2/log3| over 10 points", worst, 0.05),
        ResultRow::residual("CDF-ratio oracle, max |κ - log2/log3|", worst_oracle, 0.05),
        ResultRow::info("max |κ̂ - oracle|", worst_pair, 0.0),
        ResultRow::compare("κ-continuity bound violations at t = 1", failed as f64, 0.0, 0.0),
    ])
}

fn fat_cantor(seed: u64) -> Result<Vec<ResultRow>> {
    let r = fat_cantor_counterexample(0.5, 10, seed)?;
    let worst = r.samples.iter().map(|s| s.im).fold(0.0, f64::max);
    Ok(vec![
        ResultRow::compare("|K|", r.k_measure, 0.5, 0.0),
        ResultRow::compare("max Im M(λ+iε) at 10 K-points, ε = 1e-6", worst.min(r.threshold), worst, 0.0),
        ResultRow::flag("ac support is [0, 1]", r.ac_support == (0.0, 1.0)),
        ResultRow::flag("removed-interval midpoint classified AC", r.gap_center_class == ClassLabel::Ac),
        ResultRow::info("Im M at the first removed interval's endpoint", r.first_gap_endpoint_im, FRAC_PI_2),
    ])
}

//! Quadrature primitives: Gauss–Legendre panels and adaptive Gauss–Kronrod.

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7/K15 panel: (kronrod estimate, |kronrod - gauss|).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Adaptive Gauss–Kronrod integration over `[a, b]` split at `breaks`.
///
/// Panels are bisected until each meets its share of `abs_tol` or the panel
/// width drops below `min_width`; panels that hit the width floor are
/// accepted with their error estimate (jump discontinuities end up there).
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite limits [{a}, {b}]")));
    }
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts: Vec<f64> = vec![lo, hi];
    pts.extend(breaks.iter().copied().filter(|&x| x > lo && x < hi));
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let total = hi - lo;
    let min_width = total * 1e-14;
    let mut stack: Vec<(f64, f64, usize)> = pts.windows(2).map(|w| (w[0], w[1], 0)).collect();
    let mut value = 0.0;
    let mut error = 0.0;
    let mut evals = 0usize;
    while let Some((x0, x1, depth)) = stack.pop() {
        let (v, e) = gk15(&f, x0, x1);
        evals += 15;
        if !v.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integrand on [{x0}, {x1}]")));
        }
        let share = abs_tol * ((x1 - x0) / total).max(1e-3);
        if e <= share || x1 - x0 < min_width || depth > 60 {
            value += v;
            error += e;
        } else {
            let m = 0.5 * (x0 + x1);
            stack.push((x0, m, depth + 1));
            stack.push((m, x1, depth + 1));
        }
        if evals > 20_000_000 {
            return Err(Error::Quadrature("evaluation budget exhausted".into()));
        }
    }
    Ok(Integral { value: sign * value, error, evaluations: evals })
}

/// Fitted C/t² tail ∫_T^∞ f.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct Tail {
    pub value: f64,
    pub slope: f64,
    pub coefficient: f64,
}

/// Fits f(t) ≈ C/t² on the last decade [T/10, T] (t measured from 0 in the
/// direction of `t_end`) and returns C/|T|. Integrands that are already below
/// 1e-12/|T| across the decade are treated as having no tail. Fails when the
/// log-log slope differs from -2 by more than 20%.
pub fn inverse_square_tail<F: Fn(f64) -> f64>(f: F, t_end: f64) -> Result<Tail> {
    let big = t_end.abs();
    let n = 21;
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let t = big * 10f64.powf(-1.0 + k as f64 / (n - 1) as f64);
            (t, f(t_end.signum() * t))
        })
        .collect();
    let fmax = pts.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    if big * fmax <= 1e-12 {
        return Ok(Tail { value: 0.0, slope: f64::NAN, coefficient: 0.0 });
    }
    if pts.iter().any(|p| p.1 <= 0.0) {
        return Err(Error::TailFit("integrand changes sign or vanishes on the last decade".into()));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    if (slope + 2.0).abs() > 0.4 {
        return Err(Error::TailFit(format!("last-decade decay exponent {slope:.3} is not -2")));
    }
    let coefficient = pts.iter().map(|(t, v)| v * t * t).sum::<f64>() / n as f64;
    Ok(Tail { value: coefficient / big, slope, coefficient })
}

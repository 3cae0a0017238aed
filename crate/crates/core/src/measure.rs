//! Synthetic Borel measures on the real line with exactly computable masses.
//!
//! A [`MeasureSpec`] is a finite sum of atoms, absolutely continuous pieces with
//! closed-form densities, and self-similar Cantor components. Every quantity the
//! rest of the crate needs (interval masses, Stieltjes transforms) is computed
//! from closed forms or by descending the self-similar structure, never by
//! sampling.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Highest even moment kept in the far-field expansion of a self-similar node.
const MOMENTS: usize = 16;
/// A node is expanded in moments once |center - z| >= RHO * half_length.
const RHO: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub pos: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Density {
    Constant { c: f64 },
    /// Coefficients in increasing degree.
    Polynomial { coeffs: Vec<f64> },
    /// Indicator of the complement of a fat Cantor set inside the piece.
    FatCantor { removed_total: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcPiece {
    pub lo: f64,
    pub hi: f64,
    pub density: Density,
}

fn default_depth() -> u32 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorComponent {
    pub lo: f64,
    pub hi: f64,
    pub w: f64,
    pub ratio: f64,
    #[serde(default = "default_depth")]
    pub depth: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub ac: Vec<AcPiece>,
    #[serde(default)]
    pub cantor: Vec<CantorComponent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    Open,
    HalfAtom,
}

/// ∫_a^b dλ/(λ - z), valid for any non-real z.
#[inline]
pub(crate) fn log_segment(a: f64, b: f64, z: Complex64) -> Complex64 {
    (Complex64::new(b, 0.0) - z).ln() - (Complex64::new(a, 0.0) - z).ln()
}

fn binom(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// Far-field sum Σ_k m_k / d^{k+1} over even k.
#[inline]
fn multipole(m: &[f64; MOMENTS + 1], d: Complex64) -> Complex64 {
    let inv = d.inv();
    let inv2 = inv * inv;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut p = inv;
    for k in (0..=MOMENTS).step_by(2) {
        acc += p * m[k];
        p *= inv2;
    }
    acc
}

impl Density {
    fn validate(&self, lo: f64, hi: f64) -> Result<()> {
        match self {
            Density::Constant { c } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(Error::Invalid(format!("constant density {c} must be >= 0")));
                }
            }
            Density::Polynomial { coeffs } => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Invalid("polynomial density needs finite coefficients".into()));
                }
                for i in 0..=1000 {
                    let x = lo + (hi - lo) * i as f64 / 1000.0;
                    if horner(coeffs, x) < -1e-12 {
                        return Err(Error::Invalid(format!("polynomial density negative at {x}")));
                    }
                }
            }
            Density::FatCantor { removed_total } => {
                if !(*removed_total > 0.0 && *removed_total < 1.0) {
                    return Err(Error::Invalid(format!(
                        "removed_total {removed_total} must lie in (0, 1)"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn poly_integral(c: &[f64], a: f64, b: f64) -> f64 {
    c.iter()
        .enumerate()
        .map(|(k, &ck)| ck * (b.powi(k as i32 + 1) - a.powi(k as i32 + 1)) / (k + 1) as f64)
        .sum()
}

/// Geometry of the fat Cantor construction on [0, 1] with removal ratio r.
///
/// Stage n removes 2^n centered open intervals of length r·4^{-n}/2, one from
/// each retained piece of length L_n = 2^{-n}(1-r) + r·4^{-n}. The removed set
/// below a depth-n node has mass r·4^{-n}.
#[derive(Debug, Clone)]
pub struct FatCantorGeometry {
    pub r: f64,
    moments: Vec<[f64; MOMENTS + 1]>,
}

const FAT_DEPTH: usize = 64;

impl FatCantorGeometry {
    pub fn new(r: f64) -> Self {
        let mut g = FatCantorGeometry { r, moments: vec![[0.0; MOMENTS + 1]; FAT_DEPTH + 1] };
        g.moments[FAT_DEPTH][0] = g.node_mass(FAT_DEPTH);
        for n in (0..FAT_DEPTH).rev() {
            let gap = g.gap_len(n);
            let d = 0.5 * (g.piece_len(n) - g.piece_len(n + 1));
            let mut m = [0.0; MOMENTS + 1];
            for k in (0..=MOMENTS).step_by(2) {
                let mut s = (0.5 * gap).powi(k as i32 + 1) * 2.0 / (k + 1) as f64;
                for j in (0..=k).step_by(2) {
                    s += 2.0 * binom(k, j) * g.moments[n + 1][j] * d.powi((k - j) as i32);
                }
                m[k] = s;
            }
            g.moments[n] = m;
        }
        g
    }

    pub fn piece_len(&self, n: usize) -> f64 {
        0.5f64.powi(n as i32) * (1.0 - self.r) + self.r * 0.25f64.powi(n as i32)
    }

    pub fn gap_len(&self, n: usize) -> f64 {
        0.5 * self.r * 0.25f64.powi(n as i32)
    }

    pub fn node_mass(&self, n: usize) -> f64 {
        self.r * 0.25f64.powi(n as i32)
    }

    /// Lebesgue measure of the retained set K.
    pub fn k_measure(&self) -> f64 {
        1.0 - self.r
    }

    /// Indicator of the removed set at x ∈ [0, 1].
    pub fn density(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let mut a = 0.0;
        for n in 0..FAT_DEPTH {
            let l = self.piece_len(n);
            let g = self.gap_len(n);
            let g0 = a + 0.5 * (l - g);
            if x > g0 && x < g0 + g {
                return 1.0;
            }
            if x >= g0 + g {
                a = g0 + g;
            }
        }
        0.0
    }

    /// Removed mass in [0, x].
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return self.r;
        }
        let mut a = 0.0;
        let mut acc = 0.0;
        for n in 0..FAT_DEPTH {
            let l = self.piece_len(n);
            let g = self.gap_len(n);
            let g0 = a + 0.5 * (l - g);
            if x <= g0 {
                continue;
            }
            acc += self.node_mass(n + 1);
            if x < g0 + g {
                return acc + (x - g0);
            }
            acc += g;
            a = g0 + g;
        }
        acc
    }

    /// Point of K reached by the left/right choices in `path` (true = right),
    /// taken as the left end of the final piece. It borders a removed interval
    /// only at the level of the last right turn.
    pub fn k_point(&self, path: &[bool]) -> f64 {
        let mut a = 0.0;
        for (n, &right) in path.iter().enumerate().take(FAT_DEPTH) {
            if right {
                a += self.piece_len(n) - self.piece_len(n + 1);
            }
        }
        a
    }

    /// Removed intervals of stage n (in [0, 1] coordinates).
    pub fn gaps_at_stage(&self, n: usize) -> Vec<(f64, f64)> {
        let l = self.piece_len(n);
        let g = self.gap_len(n);
        let mut starts = vec![0.0];
        for k in 0..n {
            let lk = self.piece_len(k);
            let lk1 = self.piece_len(k + 1);
            starts = starts.iter().flat_map(|&a| [a, a + lk - lk1]).collect();
        }
        starts
            .into_iter()
            .map(|a| (a + 0.5 * (l - g), a + 0.5 * (l + g)))
            .collect()
    }

    /// ∫_0^1 density(x)/(s·x + lo - z) s dx, i.e. the Stieltjes transform of the
    /// piece scaled to [lo, lo + s].
    fn stieltjes(&self, lo: f64, s: f64, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut stack: Vec<(f64, usize)> = vec![(lo, 0)];
        while let Some((a, n)) = stack.pop() {
            let l = s * self.piece_len(n);
            let c = a + 0.5 * l;
            let d = Complex64::new(c, 0.0) - z;
            if n >= FAT_DEPTH {
                acc += self.node_mass(n) * s / d;
                continue;
            }
            if d.norm() >= RHO * 0.5 * l {
                let mut m = self.moments[n];
                let mut sk = s;
                for mk in m.iter_mut() {
                    *mk *= sk;
                    sk *= s;
                }
                acc += multipole(&m, d);
                continue;
            }
            let g = s * self.gap_len(n);
            acc += log_segment(c - 0.5 * g, c + 0.5 * g, z);
            let lc = s * self.piece_len(n + 1);
            stack.push((a, n + 1));
            stack.push((a + l - lc, n + 1));
        }
        acc
    }
}

/// Normalized even moments of the self-similar Cantor measure with contraction
/// ratio r, total mass 1, support [-1/2, 1/2].
fn cantor_moments(r: f64) -> [f64; MOMENTS + 1] {
    let a = 0.5 * (1.0 - r);
    let mut m = [0.0; MOMENTS + 1];
    m[0] = 1.0;
    for k in (2..=MOMENTS).step_by(2) {
        let mut s = 0.0;
        for j in (0..k).step_by(2) {
            s += binom(k, j) * r.powi(j as i32) * m[j] * a.powi((k - j) as i32);
        }
        m[k] = s / (1.0 - r.powi(k as i32));
    }
    m
}

impl CantorComponent {
    pub fn standard() -> Self {
        CantorComponent { lo: 0.0, hi: 1.0, w: 1.0, ratio: 1.0 / 3.0, depth: 60 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::Invalid(format!("cantor support [{}, {}]", self.lo, self.hi)));
        }
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(Error::Invalid(format!("cantor weight {} must be > 0", self.w)));
        }
        if !(self.ratio > 0.0 && self.ratio < 0.5) {
            return Err(Error::Invalid(format!("cantor ratio {} must lie in (0, 1/2)", self.ratio)));
        }
        if self.depth == 0 {
            return Err(Error::Invalid("cantor depth cap must be positive".into()));
        }
        Ok(())
    }

    /// Error bound of [`cantor_cdf`] implied by the depth cap.
    pub fn cdf_error_bound(&self) -> f64 {
        self.w * 0.5f64.powi(self.depth as i32)
    }

    fn stieltjes(&self, z: Complex64) -> Complex64 {
        let r = self.ratio;
        let mom = cantor_moments(r);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut stack: Vec<(f64, f64, f64, u32)> =
            vec![(0.5 * (self.lo + self.hi), self.hi - self.lo, self.w, 0)];
        while let Some((c, l, w, n)) = stack.pop() {
            let d = Complex64::new(c, 0.0) - z;
            if n >= self.depth {
                acc += w / d;
                continue;
            }
            if d.norm() >= RHO * 0.5 * l {
                let mut m = [0.0; MOMENTS + 1];
                let mut lk = w;
                for k in 0..=MOMENTS {
                    m[k] = mom[k] * lk;
                    lk *= l;
                }
                acc += multipole(&m, d);
                continue;
            }
            let off = 0.5 * (1.0 - r) * l;
            stack.push((c - off, r * l, 0.5 * w, n + 1));
            stack.push((c + off, r * l, 0.5 * w, n + 1));
        }
        acc
    }
}

/// Self-similar CDF of a Cantor component, exact on every gap.
pub fn cantor_cdf(c: &CantorComponent, x: f64) -> f64 {
    if x <= c.lo {
        return 0.0;
    }
    if x >= c.hi {
        return c.w;
    }
    let r = c.ratio;
    let mut u = (x - c.lo) / (c.hi - c.lo);
    let mut acc = 0.0;
    let mut scale = 1.0;
    // The closed gap [r, 1-r] is matched with a few ulps of slack so that
    // endpoints like 1/3 survive the rescaling round-off.
    let slack = 8.0 * f64::EPSILON;
    for _ in 0..c.depth {
        if u >= r - slack && u <= 1.0 - r + slack {
            return c.w * (acc + 0.5 * scale);
        }
        if u < r {
            u /= r;
        } else {
            acc += 0.5 * scale;
            u = (u - (1.0 - r)) / r;
        }
        scale *= 0.5;
    }
    c.w * (acc + 0.5 * scale)
}

/// The ac piece on [0, 1] whose density is the indicator of the removed set.
pub fn fat_cantor_density(removed_total: f64) -> Result<AcPiece> {
    let d = Density::FatCantor { removed_total };
    d.validate(0.0, 1.0)?;
    Ok(AcPiece { lo: 0.0, hi: 1.0, density: d })
}

fn fat_geometry(r: f64) -> &'static FatCantorGeometry {
    use std::collections::HashMap;
    use std::sync::Mutex;
    static CACHE: OnceLock<Mutex<HashMap<u64, &'static FatCantorGeometry>>> = OnceLock::new();
    let map = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().expect("fat cantor cache poisoned");
    *guard
        .entry(r.to_bits())
        .or_insert_with(|| Box::leak(Box::new(FatCantorGeometry::new(r))))
}

impl AcPiece {
    pub fn geometry(&self) -> Option<&'static FatCantorGeometry> {
        match self.density {
            Density::FatCantor { removed_total } => Some(fat_geometry(removed_total)),
            _ => None,
        }
    }

    pub fn density_at(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return 0.0;
        }
        match &self.density {
            Density::Constant { c } => *c,
            Density::Polynomial { coeffs } => horner(coeffs, x),
            Density::FatCantor { removed_total } => {
                fat_geometry(*removed_total).density((x - self.lo) / (self.hi - self.lo))
            }
        }
    }

    /// Mass of [a, b] ∩ [lo, hi].
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let a = a.max(self.lo);
        let b = b.min(self.hi);
        if a >= b {
            return 0.0;
        }
        match &self.density {
            Density::Constant { c } => c * (b - a),
            Density::Polynomial { coeffs } => poly_integral(coeffs, a, b),
            Density::FatCantor { removed_total } => {
                let g = fat_geometry(*removed_total);
                let s = self.hi - self.lo;
                s * (g.cdf((b - self.lo) / s) - g.cdf((a - self.lo) / s))
            }
        }
    }

    fn stieltjes(&self, z: Complex64) -> Complex64 {
        match &self.density {
            Density::Constant { c } => *c * log_segment(self.lo, self.hi, z),
            Density::Polynomial { coeffs } => {
                // p(λ) = q(λ)(λ - z) + p(z)
                let n = coeffs.len() - 1;
                let mut q = vec![Complex64::new(0.0, 0.0); n];
                let mut carry = Complex64::new(coeffs[n], 0.0);
                for k in (0..n).rev() {
                    q[k] = carry;
                    carry = carry * z + coeffs[k];
                }
                let mut acc = carry * log_segment(self.lo, self.hi, z);
                for (k, qk) in q.iter().enumerate() {
                    let e = k as i32 + 1;
                    acc += qk * ((self.hi.powi(e) - self.lo.powi(e)) / e as f64);
                }
                acc
            }
            Density::FatCantor { removed_total } => {
                fat_geometry(*removed_total).stieltjes(self.lo, self.hi - self.lo, z)
            }
        }
    }
}

impl MeasureSpec {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.ac.is_empty() && self.cantor.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for a in &self.atoms {
            if !(a.w > 0.0 && a.w.is_finite() && a.pos.is_finite()) {
                return Err(Error::Invalid(format!("atom at {} has weight {}", a.pos, a.w)));
            }
        }
        for p in &self.ac {
            if !(p.lo < p.hi && p.lo.is_finite() && p.hi.is_finite()) {
                return Err(Error::Invalid(format!("ac piece [{}, {}]", p.lo, p.hi)));
            }
            p.density.validate(p.lo, p.hi)?;
        }
        for c in &self.cantor {
            c.validate()?;
        }
        let wi = weight_integral(self);
        if !wi.is_finite() {
            return Err(Error::Domain("∫dμ/(1+λ²) diverges".into()));
        }
        Ok(())
    }

    /// ∫ dμ(λ)/(λ - z) for non-real z.
    pub fn stieltjes(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in &self.atoms {
            acc += a.w / (Complex64::new(a.pos, 0.0) - z);
        }
        for p in &self.ac {
            acc += p.stieltjes(z);
        }
        for c in &self.cantor {
            acc += c.stieltjes(z);
        }
        acc
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum::<f64>()
            + self.ac.iter().map(|p| p.mass(p.lo, p.hi)).sum::<f64>()
            + self.cantor.iter().map(|c| c.w).sum::<f64>()
    }

    pub fn atom_at(&self, x: f64) -> f64 {
        self.atoms.iter().filter(|a| a.pos == x).map(|a| a.w).sum()
    }

    /// Bounding interval of the support, if any.
    pub fn support_hull(&self) -> Option<(f64, f64)> {
        let pts = self
            .atoms
            .iter()
            .map(|a| (a.pos, a.pos))
            .chain(self.ac.iter().map(|p| (p.lo, p.hi)))
            .chain(self.cantor.iter().map(|c| (c.lo, c.hi)));
        pts.fold(None, |acc, (a, b)| match acc {
            None => Some((a, b)),
            Some((x, y)) => Some((x.min(a), y.max(b))),
        })
    }
}

/// ∫ dμ/(1+λ²), read off as Im ∫dμ/(λ - i).
pub fn weight_integral(mu: &MeasureSpec) -> f64 {
    mu.stieltjes(Complex64::i()).im
}

pub fn measure_of_interval(mu: &MeasureSpec, lo: f64, hi: f64, convention: Convention) -> f64 {
    let mut m = 0.0;
    for a in &mu.atoms {
        if a.pos > lo && a.pos < hi {
            m += a.w;
        } else if convention == Convention::HalfAtom && (a.pos == lo || a.pos == hi) {
            m += 0.5 * a.w;
        }
    }
    for p in &mu.ac {
        m += p.mass(lo, hi);
    }
    for c in &mu.cantor {
        m += cantor_cdf(c, hi) - cantor_cdf(c, lo);
    }
    m
}

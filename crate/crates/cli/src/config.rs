use herglotz_core::averaging::Truncation;
use herglotz_core::herglotz::{ConstantHerglotz, EpsSchedule, Herglotz, HerglotzRep};
use herglotz_core::measure::{Atom, MeasureSpec};
use herglotz_core::rankone::FiniteModel;
use herglotz_core::sl2::LieElement;
use herglotz_core::{Complex64, Error, Result};
use serde::{Deserialize, Serialize};

/// A starting function. Finite models are tried first; their keys
/// (`eigs`, `phi`) do not overlap with a representation's (`A`, `B`, `mu`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Fixture {
    Model(FiniteModel),
    Rep(HerglotzRep),
    Constant { constant: ConstantHerglotz },
}

impl Fixture {
    pub fn validate(&self) -> Result<()> {
        match self {
            Fixture::Model(m) => m.validate(),
            Fixture::Rep(r) => r.validate(),
            Fixture::Constant { constant } => {
                if constant.im >= 0.0 && constant.re.is_finite() && constant.im.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Invalid("constant must lie in the closed upper half-plane".into()))
                }
            }
        }
    }

    pub fn herglotz(&self) -> &dyn Herglotz {
        match self {
            Fixture::Model(m) => m,
            Fixture::Rep(r) => r,
            Fixture::Constant { constant } => constant,
        }
    }

    /// The representation of the fixture, where one exists.
    pub fn rep(&self) -> Option<HerglotzRep> {
        match self {
            Fixture::Rep(r) => Some(r.clone()),
            Fixture::Model(m) => {
                let atoms = m.eigs.iter().zip(&m.phi).map(|(&pos, p)| Atom { pos, w: p * p }).collect();
                HerglotzRep::new(0.0, 0.0, MeasureSpec { atoms, ..Default::default() }).ok()
            }
            Fixture::Constant { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TRange {
    Finite(f64, f64),
    Named(Whole),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Whole {
    Global,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Outputs {
    #[serde(default = "yes")]
    pub json: bool,
    #[serde(default = "yes")]
    pub csv: bool,
}

fn yes() -> bool {
    true
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { json: true, csv: true }
    }
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub fixture: Option<Fixture>,
    #[serde(default)]
    pub generator: Option<LieElement>,
    #[serde(default)]
    pub t_range: Option<TRange>,
    #[serde(default)]
    pub intervals: Vec<(f64, f64)>,
    #[serde(default)]
    pub schedule: EpsSchedule,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub outputs: Outputs,
    /// Evaluation points as [re, im].
    #[serde(default)]
    pub points: Vec<(f64, f64)>,
    #[serde(default)]
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub lambda_grid: Vec<f64>,
    /// Number of random λ draws inside `lambda_range` when `lambda_grid` is empty.
    #[serde(default)]
    pub random_lambdas: usize,
    #[serde(default)]
    pub lambda_range: Option<(f64, f64)>,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_tolerance() -> f64 {
    1e-6
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(f) = &self.fixture {
            f.validate()?;
        }
        self.schedule.validate()?;
        for &(lo, hi) in &self.intervals {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Invalid(format!("interval ({lo}, {hi}) needs finite lo < hi")));
            }
        }
        if let Some(TRange::Finite(a, b)) = self.t_range {
            if !(a <= b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::Invalid(format!("t_range ({a}, {b}) needs finite t1 <= t2")));
            }
        }
        if let Some(g) = &self.generator {
            if ![g.alpha, g.beta, g.gamma].iter().all(|v| v.is_finite()) {
                return Err(Error::Invalid("generator entries must be finite".into()));
            }
        }
        for &(re, im) in &self.points {
            if !(im > 0.0) || !re.is_finite() || !im.is_finite() {
                return Err(Error::Invalid(format!("point {re}+{im}i is not in the upper half-plane")));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Invalid("tolerance must be positive".into()));
        }
        if self.random_lambdas > 0 && self.lambda_range.is_none() {
            return Err(Error::Invalid("random_lambdas needs lambda_range".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Invalid("workers must be positive".into()));
        }
        Ok(())
    }

    pub fn fixture(&self) -> Result<&Fixture> {
        self.fixture.as_ref().ok_or_else(|| Error::Invalid("config needs a fixture".into()))
    }

    pub fn generator(&self) -> Result<LieElement> {
        self.generator.ok_or_else(|| Error::Invalid("config needs a generator".into()))
    }

    pub fn finite_range(&self) -> Result<(f64, f64)> {
        match self.t_range {
            Some(TRange::Finite(a, b)) => Ok((a, b)),
            _ => Err(Error::Invalid("config needs a finite t_range [t1, t2]".into())),
        }
    }

    pub fn needs_intervals(&self) -> Result<&[(f64, f64)]> {
        if self.intervals.is_empty() {
            return Err(Error::Invalid("config needs at least one interval".into()));
        }
        Ok(&self.intervals)
    }
}

pub fn point(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

use clap::ValueEnum;
use herglotz_core::averaging::{
    extension_average, extension_family, flow_state, global_average, global_xi_integral, verify_mz,
};
use herglotz_core::classify::{classify_points, Thresholds};
use herglotz_core::herglotz::evaluate;
use herglotz_core::rankone::{
    birman_solomyak_check, krein_function_checks, perturbed_spectrum, resolvent_identity_check, universality_check,
};
use herglotz_core::report::{csv_text, ResultRow};
use herglotz_core::sl2::{cos_sin, CaseTag};
use herglotz_core::suite::run_all;
use herglotz_core::winding::xi_density;
use herglotz_core::{Complex64, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{point, ExperimentConfig, Fixture, TRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Evaluate,
    Flow,
    Xi,
    Average,
    Global,
    Classify,
    Rankone,
    Extension,
    Suite,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evaluate => "evaluate",
            Command::Flow => "flow",
            Command::Xi => "xi",
            Command::Average => "average",
            Command::Global => "global",
            Command::Classify => "classify",
            Command::Rankone => "rankone",
            Command::Extension => "extension",
            Command::Suite => "suite",
        }
    }
}

pub struct Outcome {
    pub rows: Vec<ResultRow>,
    pub details: serde_json::Value,
    /// (file name, contents) of a grid export.
    pub csv: Option<(String, String)>,
}

impl Outcome {
    fn rows(rows: Vec<ResultRow>) -> Self {
        Outcome { rows, details: serde_json::Value::Null, csv: None }
    }
}

/// Checks that the config carries what the command needs, before any work.
pub fn precheck(cmd: Command, cfg: &ExperimentConfig) -> Result<()> {
    match cmd {
        Command::Suite => Ok(()),
        Command::Evaluate => {
            cfg.fixture()?;
            if cfg.points.is_empty() {
                return Err(Error::Invalid("evaluate needs points".into()));
            }
            Ok(())
        }
        Command::Flow => {
            cfg.fixture()?;
            cfg.generator()?;
            cfg.needs_intervals()?;
            if cfg.t_grid.is_empty() {
                return Err(Error::Invalid("flow needs a t_grid".into()));
            }
            Ok(())
        }
        Command::Xi => {
            cfg.fixture()?;
            nonzero_gamma(cfg)?;
            cfg.finite_range()?;
            if cfg.lambda_grid.is_empty() {
                return Err(Error::Invalid("xi needs a lambda_grid".into()));
            }
            Ok(())
        }
        Command::Average => {
            cfg.fixture()?;
            nonzero_gamma(cfg)?;
            cfg.finite_range()?;
            cfg.needs_intervals()?;
            Ok(())
        }
        Command::Global => {
            cfg.fixture()?;
            nonzero_gamma(cfg)?;
            cfg.needs_intervals()?;
            Ok(())
        }
        Command::Classify => {
            cfg.fixture()?;
            if cfg.lambda_grid.is_empty() && cfg.random_lambdas == 0 {
                return Err(Error::Invalid("classify needs lambda_grid or random_lambdas".into()));
            }
            Ok(())
        }
        Command::Rankone => match cfg.fixture()? {
            Fixture::Model(_) => {
                cfg.finite_range()?;
                cfg.needs_intervals()?;
                Ok(())
            }
            _ => Err(Error::Invalid("rankone needs a finite model fixture {eigs, phi}".into())),
        },
        Command::Extension => {
            if cfg.fixture()?.rep().is_none() {
                return Err(Error::Invalid("extension needs a measure-based fixture".into()));
            }
            cfg.needs_intervals()?;
            Ok(())
        }
    }
}

fn nonzero_gamma(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.generator()?.gamma == 0.0 {
        return Err(Error::Invalid("generator needs γ ≠ 0".into()));
    }
    Ok(())
}

/// Numeric failures become failing rows; only config problems are errors.
fn row_or_fail(name: String, r: Result<ResultRow>) -> ResultRow {
    r.unwrap_or_else(|e| ResultRow { name: format!("{name}: {e}"), lhs: f64::NAN, rhs: f64::NAN, residual: f64::NAN, budget: None, pass: false })
}

pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Outcome> {
    precheck(cmd, cfg)?;
    Ok(match cmd {
        Command::Evaluate => evaluate_cmd(cfg)?,
        Command::Flow => flow_cmd(cfg)?,
        Command::Xi => xi_cmd(cfg)?,
        Command::Average => average_cmd(cfg)?,
        Command::Global => global_cmd(cfg)?,
        Command::Classify => classify_cmd(cfg)?,
        Command::Rankone => rankone_cmd(cfg)?,
        Command::Extension => extension_cmd(cfg)?,
        Command::Suite => suite_cmd(cfg),
    })
}

fn evaluate_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let h = cfg.fixture()?.herglotz();
    let mut rows = Vec::new();
    let mut grid = Vec::new();
    for &(re, im) in &cfg.points {
        let name = format!("M({re}+{im}i)");
        let row = evaluate(h, point(re, im)).map(|m| {
            grid.push(vec![re, im, m.re, m.im]);
            ResultRow { name: name.clone(), lhs: m.re, rhs: m.im, residual: 0.0, budget: None, pass: m.im >= 0.0 }
        });
        rows.push(row_or_fail(name, row));
    }
    let csv = csv_text("evaluate", &["re_z", "im_z", "re_m", "im_m"], &grid);
    Ok(Outcome { rows, details: serde_json::Value::Null, csv: Some(("evaluate.csv".into(), csv)) })
}

fn flow_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let h = cfg.fixture()?.herglotz();
    let x = cfg.generator()?;
    let mut rows = Vec::new();
    let mut grid = Vec::new();
    let mut states = Vec::new();
    for &t in &cfg.t_grid {
        let name = format!("flow state at t = {t}");
        match flow_state(&x, h, t, &cfg.intervals, &cfg.schedule) {
            Ok(fs) => {
                let mut r = vec![t, fs.a_t, fs.b_t];
                r.extend(fs.interval_masses.iter().map(|m| m.mass));
                grid.push(r);
                let c_t = x.gamma * cos_sin(&x, t).1;
                if c_t != 0.0 {
                    rows.push(ResultRow::residual(format!("A_t at t = {t}"), fs.a_t.abs(), 1e-8));
                } else {
                    rows.push(ResultRow::info(format!("A_t at t = {t} (c_t = 0)"), fs.a_t, 0.0));
                }
                states.push(fs);
            }
            Err(e) => rows.push(row_or_fail(name, Err(e))),
        }
    }
    let mut header = vec!["t".to_string(), "A_t".into(), "B_t".into()];
    header.extend((0..cfg.intervals.len()).map(|i| format!("mass_{i}")));
    let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let meta = format!("flow X=({},{},{}) intervals={:?}", x.alpha, x.beta, x.gamma, cfg.intervals);
    Ok(Outcome { rows, details: json!(states), csv: Some(("flow.csv".into(), csv_text(&meta, &header, &grid))) })
}

fn xi_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let h = cfg.fixture()?.herglotz();
    let x = cfg.generator()?;
    let (t1, t2) = cfg.finite_range()?;
    match xi_density(&x, h, t1, t2, &cfg.lambda_grid, &cfg.schedule) {
        Ok(sample) => {
            let n = sample.converged.iter().filter(|c| **c).count();
            let rows = vec![ResultRow::compare("converged grid points", n as f64, sample.converged.len() as f64, 0.0)];
            let csv = sample.to_csv(&x, &cfg.schedule);
            Ok(Outcome { rows, details: json!(sample), csv: Some(("xi.csv".into(), csv)) })
        }
        Err(e) => Ok(Outcome::rows(vec![row_or_fail("ξ density".into(), Err(e))])),
    }
}

fn average_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let h = cfg.fixture()?.herglotz();
    let x = cfg.generator()?;
    let (t1, t2) = cfg.finite_range()?;
    let rows = cfg
        .intervals
        .iter()
        .map(|&(lo, hi)| {
            let name = format!("∫μ_t dt vs ∫ξ on ({lo}, {hi})");
            let r = verify_mz(&x, h, (lo, hi), t1, t2, &cfg.schedule)
                .map(|c| ResultRow::compare(name.clone(), c.lhs, c.rhs, cfg.tolerance));
            row_or_fail(name, r)
        })
        .collect();
    Ok(Outcome::rows(rows))
}

fn global_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let h = cfg.fixture()?.herglotz();
    let x = cfg.generator()?;
    if let Some(TRange::Finite(..)) = cfg.t_range {
        return Err(Error::Invalid("global takes t_range \"global\" or none".into()));
    }
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for &(lo, hi) in &cfg.intervals {
        let name = format!("global average on ({lo}, {hi})");
        let g = match global_average(&x, h, (lo, hi), &cfg.schedule, &cfg.truncation) {
            Ok(g) => g,
            Err(e) => {
                rows.push(row_or_fail(name, Err(e)));
                continue;
            }
        };
        let tol = cfg.tolerance + g.budget;
        if g.case == CaseTag::CaseIII {
            let r = global_xi_integral(&x, h, (lo, hi)).map(|xi| {
                let len = hi - lo;
                rows.push(ResultRow::info(
                    format!("{name}: alternative closed form density vs winding density (discrepant)"),
                    xi.printed_variant / len,
                    xi.value / len,
                ));
                details.push(json!({
                    "interval": [lo, hi], "case": g.case, "value": g.value,
                    "xi_global_density": xi.value / len, "alternative_density": xi.printed_variant / len,
                    "alternative_discrepant": (xi.printed_variant - xi.value).abs() > 1e-6 * len,
                }));
                ResultRow::compare(format!("{name} vs |γ|∫ξ_global"), g.value, x.gamma.abs() * xi.value, tol)
            });
            rows.push(row_or_fail(name, r));
        } else {
            details.push(json!({ "interval": [lo, hi], "case": g.case, "value": g.value, "tail_budget": g.budget }));
            rows.push(ResultRow::compare(format!("{name} vs |Δ|"), g.value, hi - lo, tol));
        }
    }
    Ok(Outcome { rows, details: json!(details), csv: None })
}

fn classify_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let h = cfg.fixture()?.herglotz();
    let mut lambdas = cfg.lambda_grid.clone();
    if let Some((a, b)) = cfg.lambda_range {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        lambdas.extend((0..cfg.random_lambdas).map(|_| rng.gen_range(a..b)));
    }
    let points = classify_points(h, &lambdas, &cfg.schedule, &Thresholds::default());
    let rows = points
        .iter()
        .map(|p| {
            let label = serde_json::to_value(p.class).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            ResultRow::info(format!("λ = {}: {label}", p.lambda), p.kappa_hat, 0.0)
        })
        .collect();
    Ok(Outcome { rows, details: json!(points), csv: None })
}

fn rankone_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let Fixture::Model(m) = cfg.fixture()? else {
        return Err(Error::Invalid("rankone needs a finite model".into()));
    };
    let (t1, t2) = cfg.finite_range()?;
    let mut rows = Vec::new();
    for t in [t1, t2] {
        let name = format!("secular vs dense spectrum at t = {t}");
        rows.push(row_or_fail(name.clone(), perturbed_spectrum(m, t).map(|_| ResultRow::flag(name, true))));
    }
    for &(lo, hi) in &cfg.intervals {
        let name = format!("Birman-Solomyak on ({lo}, {hi})");
        let r = birman_solomyak_check(m, lo, hi, t1, t2).map(|c| ResultRow::compare(name.clone(), c.lhs, c.rhs, cfg.tolerance));
        rows.push(row_or_fail(name, r));
        let name = format!("universality on ({lo}, {hi})");
        let r = universality_check(m, lo, hi, cfg.truncation.t_cut)
            .map(|u| ResultRow::compare(name.clone(), u.value, hi - lo, 1e-3_f64.max(u.budget)));
        rows.push(row_or_fail(name, r));
    }
    let z = Complex64::new(0.3, 0.7);
    for t in [t1, t2] {
        let name = format!("resolvent identity at t = {t}");
        rows.push(row_or_fail(name.clone(), resolvent_identity_check(m, t, z).map(|r| ResultRow::residual(name, r, 1e-10))));
        let name = format!("Krein identities at t = {t}");
        let r = krein_function_checks(m, t, z)
            .map(|k| ResultRow::residual(name.clone(), k.trace_residual.max(k.reparam_residual), 1e-12));
        rows.push(row_or_fail(name, r));
    }
    Ok(Outcome::rows(rows))
}

fn extension_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let rep = cfg.fixture()?.rep().ok_or_else(|| Error::Invalid("extension needs a measure".into()))?;
    let fam = match extension_family(&rep) {
        Ok(f) => f,
        Err(Error::Precondition(m)) => return Err(Error::Invalid(m)),
        Err(e) => return Err(e),
    };
    let mut rows = Vec::new();
    for &(lo, hi) in &cfg.intervals {
        let name = format!("extension average on ({lo}, {hi})");
        match extension_average(&fam, (lo, hi), &cfg.schedule) {
            Ok(e) => {
                rows.push(ResultRow::compare(format!("{name} vs |Δ|"), e.value, hi - lo, 1e-3));
                rows.push(ResultRow::residual("reparametrization f_tan(s) = g_s", e.reparam_residual, 1e-12));
                rows.push(ResultRow::residual("Re N(i)", e.re_n_at_i.abs(), 1e-12));
            }
            Err(e) => rows.push(row_or_fail(name, Err(e))),
        }
    }
    let details = json!({ "support": "bounded-support measures only" });
    Ok(Outcome { rows, details, csv: None })
}

fn suite_cmd(cfg: &ExperimentConfig) -> Outcome {
    let results = run_all(cfg.seed);
    let mut rows = Vec::new();
    for r in &results {
        eprintln!("{}", r.line());
        for row in &r.rows {
            let mut row = row.clone();
            row.name = format!("{:02} {}: {}", r.id, r.title, row.name);
            rows.push(row);
        }
        if let Some(e) = &r.error {
            rows.push(ResultRow { name: format!("{:02} {}: {e}", r.id, r.title), lhs: f64::NAN, rhs: f64::NAN, residual: f64::NAN, budget: None, pass: false });
        }
        if r.seconds > r.time_budget {
            rows.push(ResultRow::flag(format!("{:02} {}: within {} s", r.id, r.title, r.time_budget), false));
        }
    }
    Outcome::rows(rows)
}

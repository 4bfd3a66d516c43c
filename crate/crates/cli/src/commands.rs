use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use spemm::girsanov::{admissibility_check, AdmissibilityReport, MpreCondition};
use spemm::levy::DEFAULT_TOL;
use spemm::models::RngSpec;
use spemm::verify::{ConsistencyReport, McEngine, McReport, VerifyError};

use crate::config::LoadedConfig;
use crate::model::PreparedModel;
use crate::{CliError, Format, Outcome};

/// Stream tag for factor paths drawn by `check`, disjoint from the
/// Monte Carlo streams.
const CHECK_STREAM: u64 = 2 << 40;

#[derive(Debug, Serialize)]
struct CheckSample {
    sample: usize,
    admissibility: Option<AdmissibilityReport>,
    bs_factor_condition: Option<MpreCondition>,
    error: Option<String>,
    pass: bool,
}

fn check_sample(model: &PreparedModel, k: usize, seed: u64, tol: f64) -> CheckSample {
    let mut rng = RngSpec::new(seed, CHECK_STREAM | k as u64).rng();
    let mut out = CheckSample {
        sample: k,
        admissibility: None,
        bs_factor_condition: None,
        error: None,
        pass: false,
    };
    let factor = match model.sample_factor(&mut rng) {
        Ok(f) => f,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    out.bs_factor_condition = model.bs_condition(factor.as_ref());
    let built = model.characteristics(factor.as_ref()).and_then(|lc| {
        let pair = model.pair(&lc, factor.as_ref())?;
        Ok((lc, pair))
    });
    match built {
        Ok((lc, pair)) => {
            let report = admissibility_check(&lc, &pair, tol);
            out.pass = report.pass && out.bs_factor_condition.is_none_or(|c| c.finite);
            out.admissibility = Some(report);
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

/// Admissibility of the configured pair, on a sample of factor paths when
/// the factor is random.
pub fn check(cfg: &LoadedConfig, seed: u64, format: Format) -> Result<Outcome, CliError> {
    let model = PreparedModel::new(&cfg.config)?;
    let n = if model.is_random() {
        cfg.config.mc.check_paths.max(1)
    } else {
        1
    };
    let tol = cfg.config.tolerances.mpre;
    let samples: Vec<CheckSample> = (0..n)
        .into_par_iter()
        .map(|k| check_sample(&model, k, seed, tol))
        .collect();
    let pass = samples.iter().all(|s| s.pass);
    let body = match format {
        Format::Json => to_json(&json!({
            "command": "check",
            "config_hash": cfg.hash,
            "seed": seed,
            "samples": samples,
            "pass": pass,
        })),
        Format::Csv => {
            let mut s = String::from("sample,pass,mpre_max_residual,hellinger,error\n");
            for c in &samples {
                let a = c.admissibility.as_ref();
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    c.sample,
                    c.pass,
                    opt(a.and_then(|a| a.mpre_max_residual)),
                    opt(a.and_then(|a| a.hellinger.value())),
                    csv_field(c.error.as_deref().unwrap_or("")),
                );
            }
            s
        }
    };
    Ok(Outcome {
        code: if pass { 0 } else { 1 },
        body,
    })
}

#[derive(Debug, Serialize)]
struct Named<T> {
    name: &'static str,
    report: Option<T>,
    error: Option<String>,
}

fn named<T>(name: &'static str, r: &Result<T, VerifyError>) -> Named<T>
where
    T: Clone,
{
    match r {
        Ok(v) => Named {
            name,
            report: Some(v.clone()),
            error: None,
        },
        Err(e) => Named {
            name,
            report: None,
            error: Some(e.to_string()),
        },
    }
}

/// The three martingale checks plus the direct-vs-reweighted comparison.
pub fn verify(
    cfg: &LoadedConfig,
    seed: u64,
    n_paths: usize,
    format: Format,
) -> Result<Outcome, CliError> {
    let model = PreparedModel::new(&cfg.config)?;
    let engine = McEngine::with_band(n_paths, seed, cfg.config.mc.band_se)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let density = engine.density_martingale(&model);
    let via = engine.q_martingale_via_density(&model);
    let direct = engine.q_martingale_direct(&model);
    let consistency = match (&via, &direct) {
        (Ok(a), Ok(b)) => Ok(ConsistencyReport::from_reports(a, b, engine.band_se)),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    let drift_failed = matches!(direct, Err(VerifyError::DriftAssertionFailed { .. }));
    let reports = [
        named("density_martingale", &density),
        named("q_martingale_via_density", &via),
        named("q_martingale_direct", &direct),
    ];
    let consistency = named("direct_vs_reweighted", &consistency);
    let pass = reports.iter().all(|r| r.report.as_ref().is_some_and(|r| r.pass))
        && consistency.report.as_ref().is_some_and(|r| r.pass);
    let body = match format {
        Format::Json => to_json(&json!({
            "command": "verify",
            "config_hash": cfg.hash,
            "seed": seed,
            "n_paths": n_paths,
            "band_se": engine.band_se,
            "reports": reports,
            "direct_vs_reweighted": consistency,
            "pass": pass,
        })),
        Format::Csv => {
            let mut s = String::from("name,estimate,std_error,target,n_paths,seed,band_se,pass,error\n");
            for r in &reports {
                let m: Option<&McReport> = r.report.as_ref();
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{}",
                    r.name,
                    opt(m.map(|m| m.estimate)),
                    opt(m.map(|m| m.std_error)),
                    opt(m.map(|m| m.target)),
                    n_paths,
                    seed,
                    engine.band_se,
                    m.is_some_and(|m| m.pass),
                    csv_field(r.error.as_deref().unwrap_or("")),
                );
            }
            let c = consistency.report.as_ref();
            let _ = writeln!(
                s,
                "{},{},{},0,{},{},{},{},{}",
                consistency.name,
                opt(c.map(|c| c.difference)),
                opt(c.map(|c| c.combined_se)),
                n_paths,
                seed,
                engine.band_se,
                c.is_some_and(|c| c.pass),
                csv_field(consistency.error.as_deref().unwrap_or("")),
            );
            s
        }
    };
    let code = if drift_failed {
        3
    } else if pass {
        0
    } else {
        1
    };
    Ok(Outcome { code, body })
}

/// Paths under P as CSV rows `t,path_id,x,y,z`; `y` is empty without a
/// factor.
pub fn simulate(cfg: &LoadedConfig, seed: u64, n_paths: usize) -> Result<Outcome, CliError> {
    if n_paths == 0 {
        return Err(CliError::Config("at least one path is needed".into()));
    }
    let model = PreparedModel::new(&cfg.config)?;
    let engine = McEngine {
        n_paths,
        seed,
        band_se: cfg.config.mc.band_se,
    };
    let has_factor = model.has_factor();
    let paths = engine.collect(&model, false, |r, rng| {
        let (path, z) = r.sample_p_path(rng)?;
        let y = r.factor.as_ref().filter(|_| has_factor).map(|f| f.values().to_vec());
        Ok((path, z, y))
    });
    let paths = match paths {
        Ok(p) => p,
        Err(e) => {
            return Ok(Outcome {
                code: 1,
                body: format!("error: {e}\n"),
            })
        }
    };
    let mut body = String::from("t,path_id,x,y,z\n");
    for (id, (path, z, y)) in paths.iter().enumerate() {
        for (j, t) in path.grid.times().iter().enumerate() {
            let y = y.as_ref().map(|v| format!("{:?}", v[j])).unwrap_or_default();
            let _ = writeln!(body, "{t:?},{id},{:?},{y},{:?}", path.x[j], z.values[j]);
        }
    }
    Ok(Outcome { code: 0, body })
}

/// `ψ(u)` of the model's Lévy triplet.
pub fn exponent(cfg: &LoadedConfig, us: &[f64], format: Format) -> Result<Outcome, CliError> {
    let model = PreparedModel::new(&cfg.config)?;
    let triplet = model.triplet()?;
    let mut points = Vec::with_capacity(us.len());
    for &u in us {
        match triplet.characteristic_exponent(u, DEFAULT_TOL) {
            Ok(p) => points.push((u, p.re, p.im)),
            Err(e) => {
                return Ok(Outcome {
                    code: 1,
                    body: format!("error: {e}\n"),
                })
            }
        }
    }
    let body = match format {
        Format::Json => to_json(&json!({
            "command": "exponent",
            "config_hash": cfg.hash,
            "points": points
                .iter()
                .map(|(u, re, im)| json!({"u": u, "re": re, "im": im}))
                .collect::<Vec<_>>(),
        })),
        Format::Csv => {
            let mut s = String::from("u,re,im\n");
            for (u, re, im) in points {
                let _ = writeln!(s, "{u:?},{re:?},{im:?}");
            }
            s
        }
    };
    Ok(Outcome { code: 0, body })
}

/// Writes `body` to `out`, or stdout when absent. A missing parent directory
/// is a configuration error.
pub fn emit(body: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        None => {
            print!("{body}");
            Ok(())
        }
        Some(p) => std::fs::write(p, body)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display()))),
    }
}

fn to_json(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

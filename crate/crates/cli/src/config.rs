//! Run configuration: an INI-style file with `[section]` headers and
//! `key = value` lines, parsed fail-closed (unknown sections or keys are
//! errors, every diagnostic carries a line number).
//!
//! A minimal file is just `problem = ex1`; everything else defaults from
//! the builtin problem definition. The `[basis]` section overrides the
//! expansion basis, `[adaptive]` the adaptation knobs.

use std::path::PathBuf;

use hcsolve_core::adaptive::IndicatorMode;
use hcsolve_core::basis::{BasisFamily, BasisParams};
use hcsolve_core::error::{CoreError, Result};
use hcsolve_core::problems::{builtin, ProblemSpec};
use hcsolve_core::sparse_index::GammaSpec;

/// Everything a run needs, with overrides already folded into `spec`.
#[derive(Debug)]
pub struct RunConfig {
    pub spec: ProblemSpec,
    pub dt: f64,
    pub t_final: f64,
    /// Gauss stage count for the implicit scheme (2 = fourth order).
    pub stages: usize,
    /// Quadrature oversampling for analysis grids.
    pub oversample: f64,
    /// Write a field snapshot every this many steps; 0 = final time only.
    pub snapshot_interval: usize,
    pub out_dir: PathBuf,
}

fn perr(path: &str, line: usize, message: String) -> CoreError {
    CoreError::Parse {
        path: path.to_string(),
        line,
        message,
    }
}

struct Entry {
    line: usize,
    section: String,
    key: String,
    value: String,
}

fn split_entries(text: &str, path: &str) -> Result<Vec<Entry>> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| perr(path, line, "unterminated section header".into()))?
                .trim();
            match name {
                "basis" | "adaptive" => section = name.to_string(),
                other => {
                    return Err(perr(path, line, format!("unknown section [{other}]")));
                }
            }
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(perr(path, line, format!("expected key = value, got {trimmed:?}")));
        };
        out.push(Entry {
            line,
            section: section.clone(),
            key: key.trim().to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(e: &Entry, path: &str, kind: &str) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| perr(path, e.line, format!("{} expects {kind}, got {:?}", e.key, e.value)))
}

fn parse_bool(e: &Entry, path: &str) -> Result<bool> {
    match e.value.as_str() {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        other => Err(perr(
            path,
            e.line,
            format!("{} expects true/false, got {other:?}", e.key),
        )),
    }
}

/// Scalar or comma-separated tuple; a scalar broadcasts to every dimension.
fn parse_vec(e: &Entry, path: &str) -> Result<Vec<f64>> {
    e.value
        .split(',')
        .map(|p| {
            p.trim().parse::<f64>().map_err(|_| {
                perr(
                    path,
                    e.line,
                    format!("{} expects a number or comma tuple, got {:?}", e.key, e.value),
                )
            })
        })
        .collect()
}

fn broadcast(v: Vec<f64>, d: usize, key: &str, line: usize, path: &str) -> Result<Vec<f64>> {
    if v.len() == 1 {
        return Ok(vec![v[0]; d]);
    }
    if v.len() == d {
        return Ok(v);
    }
    Err(perr(
        path,
        line,
        format!("{key} needs 1 or {d} entries, got {}", v.len()),
    ))
}

#[derive(Default)]
struct Overrides {
    problem: Option<(usize, String)>,
    dt: Option<(usize, f64)>,
    t_final: Option<(usize, f64)>,
    stages: Option<(usize, usize)>,
    oversample: Option<(usize, f64)>,
    snapshot_interval: Option<usize>,
    out_dir: Option<PathBuf>,
    beta: Option<(usize, Vec<f64>)>,
    x0: Option<(usize, Vec<f64>)>,
    order: Option<usize>,
    gamma: Option<GammaSpec>,
    family: Option<(usize, BasisFamily)>,
    r: Option<(usize, u8)>,
    alpha: Option<f64>,
}

/// Parses configuration text; `path` labels diagnostics.
pub fn parse_str(text: &str, path: &str) -> Result<RunConfig> {
    let entries = split_entries(text, path)?;
    let mut ov = Overrides::default();
    // Adaptive overrides are applied after the problem defaults are known,
    // so they are staged as closures over the config.
    type AdaptiveEdit = Box<dyn FnOnce(&mut hcsolve_core::adaptive::AdaptiveConfig)>;
    let mut adaptive_edits: Vec<(usize, AdaptiveEdit)> = Vec::new();
    let mut d_max_raw: Option<(usize, Vec<f64>)> = None;

    for e in &entries {
        match (e.section.as_str(), e.key.as_str()) {
            ("", "problem") => ov.problem = Some((e.line, e.value.clone())),
            ("", "dt") => ov.dt = Some((e.line, parse_num(e, path, "a number")?)),
            ("", "T") => ov.t_final = Some((e.line, parse_num(e, path, "a number")?)),
            ("", "stages") => ov.stages = Some((e.line, parse_num(e, path, "an integer")?)),
            ("", "oversample") => {
                ov.oversample = Some((e.line, parse_num(e, path, "a number")?))
            }
            ("", "snapshot_interval") => {
                ov.snapshot_interval = Some(parse_num(e, path, "an integer")?)
            }
            ("", "out") => ov.out_dir = Some(PathBuf::from(&e.value)),
            ("basis", "beta") => ov.beta = Some((e.line, parse_vec(e, path)?)),
            ("basis", "x0") => ov.x0 = Some((e.line, parse_vec(e, path)?)),
            ("basis", "n") => ov.order = Some(parse_num(e, path, "an integer")?),
            ("basis", "gamma") => {
                ov.gamma = Some(if e.value == "full" {
                    GammaSpec::FullTensor
                } else {
                    GammaSpec::Value(parse_num(e, path, "a number or \"full\"")?)
                })
            }
            ("basis", "family") => {
                let family = match e.value.as_str() {
                    "mapped-jacobi" => BasisFamily::MappedJacobi,
                    "hermite" => BasisFamily::Hermite,
                    other => {
                        return Err(perr(
                            path,
                            e.line,
                            format!("family expects mapped-jacobi or hermite, got {other:?}"),
                        ))
                    }
                };
                ov.family = Some((e.line, family));
            }
            ("basis", "r") => ov.r = Some((e.line, parse_num(e, path, "0 or 1")?)),
            ("basis", "alpha") => ov.alpha = Some(parse_num(e, path, "a number")?),
            ("adaptive", "delta") => {
                let v: f64 = parse_num(e, path, "a number")?;
                adaptive_edits.push((e.line, Box::new(move |a| a.delta = v)));
            }
            ("adaptive", "d_max") => d_max_raw = Some((e.line, parse_vec(e, path)?)),
            ("adaptive", "mu") => {
                let v: f64 = parse_num(e, path, "a number")?;
                adaptive_edits.push((e.line, Box::new(move |a| a.mu = v)));
            }
            ("adaptive", "q") => {
                let v: f64 = parse_num(e, path, "a number")?;
                adaptive_edits.push((e.line, Box::new(move |a| a.q_ratio = v)));
            }
            ("adaptive", "nu") => {
                let v: f64 = parse_num(e, path, "a number")?;
                adaptive_edits.push((e.line, Box::new(move |a| a.nu = v)));
            }
            ("adaptive", "n_max") => {
                let v: usize = parse_num(e, path, "an integer")?;
                adaptive_edits.push((e.line, Box::new(move |a| a.n_max = v)));
            }
            ("adaptive", "eta0") => {
                let v: f64 = parse_num(e, path, "a number")?;
                adaptive_edits.push((e.line, Box::new(move |a| a.eta0 = v)));
            }
            ("adaptive", "sigma") => {
                let v: f64 = parse_num(e, path, "a number")?;
                adaptive_edits.push((e.line, Box::new(move |a| a.sigma = v)));
            }
            ("adaptive", "budget") => {
                let v: usize = parse_num(e, path, "an integer")?;
                adaptive_edits.push((e.line, Box::new(move |a| a.budget = v)));
            }
            ("adaptive", "indicator_mode") => {
                let mode = match e.value.as_str() {
                    "hyperbolic" | "Hyperbolic" => IndicatorMode::Hyperbolic,
                    "direct-truncation" | "DirectTruncation" => IndicatorMode::DirectTruncation,
                    other => {
                        return Err(perr(
                            path,
                            e.line,
                            format!(
                                "indicator_mode expects hyperbolic or direct-truncation, \
                                 got {other:?}"
                            ),
                        ))
                    }
                };
                adaptive_edits.push((e.line, Box::new(move |a| a.indicator_mode = mode)));
            }
            ("adaptive", "enable_move") => {
                let v = parse_bool(e, path)?;
                adaptive_edits.push((e.line, Box::new(move |a| a.enable_move = v)));
            }
            ("adaptive", "enable_scale") => {
                let v = parse_bool(e, path)?;
                adaptive_edits.push((e.line, Box::new(move |a| a.enable_scale = v)));
            }
            ("adaptive", "enable_order") => {
                let v = parse_bool(e, path)?;
                adaptive_edits.push((e.line, Box::new(move |a| a.enable_order = v)));
            }
            (section, key) => {
                let place = if section.is_empty() {
                    "top level".to_string()
                } else {
                    format!("section [{section}]")
                };
                return Err(perr(path, e.line, format!("unknown key {key:?} in {place}")));
            }
        }
    }

    let Some((problem_line, name)) = ov.problem else {
        return Err(perr(path, 0, "missing required key: problem".into()));
    };
    let mut spec =
        builtin(&name).map_err(|e| perr(path, problem_line, format!("problem: {e}")))?;
    let d = spec.dim;

    // Basis overrides, applied per dimension on top of the builtin params.
    let beta = match ov.beta {
        Some((line, v)) => Some(broadcast(v, d, "beta", line, path)?),
        None => None,
    };
    let x0 = match ov.x0 {
        Some((line, v)) => Some(broadcast(v, d, "x0", line, path)?),
        None => None,
    };
    if beta.is_some() || x0.is_some() || ov.family.is_some() || ov.r.is_some() || ov.alpha.is_some()
    {
        let mut params = Vec::with_capacity(d);
        for i in 0..d {
            let base = spec.params[i];
            let family = ov.family.map_or(base.family, |(_, f)| f);
            let b = beta.as_ref().map_or(base.beta, |v| v[i]);
            let c = x0.as_ref().map_or(base.x0, |v| v[i]);
            let built = match family {
                BasisFamily::Hermite => BasisParams::hermite(b, c),
                BasisFamily::MappedJacobi => {
                    let r = ov.r.map_or(base.r, |(_, r)| r);
                    let (a1, a2) = match ov.alpha {
                        Some(a) => (a, a),
                        // Switching family without alpha: pick the
                        // Chebyshev-like default rather than the zeroed
                        // placeholder a Hermite base carries.
                        None if base.family == BasisFamily::Hermite => (-0.5, -0.5),
                        None => (base.alpha1, base.alpha2),
                    };
                    BasisParams::mapped_jacobi(a1, a2, r, b, c)
                }
            };
            params.push(built.map_err(|e| perr(path, problem_line, format!("basis: {e}")))?);
        }
        spec.params = params;
    }
    if let Some(n) = ov.order {
        spec.order = n;
    }
    if let Some(g) = ov.gamma {
        spec.gamma = g;
    }
    if let Some((line, v)) = d_max_raw {
        spec.adaptive.d_max = broadcast(v, d, "d_max", line, path)?;
    }
    for (line, edit) in adaptive_edits {
        edit(&mut spec.adaptive);
        let _ = line;
    }
    spec.adaptive
        .validate(d)
        .map_err(|e| perr(path, 0, format!("adaptive: {e}")))?;

    let dt = ov.dt.map_or(0.1, |(_, v)| v);
    if !(dt > 0.0) {
        let line = ov.dt.map_or(0, |(l, _)| l);
        return Err(perr(path, line, format!("dt must be positive, got {dt}")));
    }
    let t_final = ov.t_final.map_or(spec.final_time, |(_, v)| v);
    if t_final < dt {
        let line = ov.t_final.map_or(0, |(l, _)| l);
        return Err(perr(
            path,
            line,
            format!("T must be at least dt, got T = {t_final} with dt = {dt}"),
        ));
    }
    let stages = ov.stages.map_or(2, |(_, v)| v);
    if !(1..=3).contains(&stages) {
        let line = ov.stages.map_or(0, |(l, _)| l);
        return Err(perr(path, line, format!("stages must be 1..=3, got {stages}")));
    }
    let oversample = ov.oversample.map_or(2.0, |(_, v)| v);
    if !(oversample >= 1.0) {
        let line = ov.oversample.map_or(0, |(l, _)| l);
        return Err(perr(
            path,
            line,
            format!("oversample must be at least 1, got {oversample}"),
        ));
    }

    Ok(RunConfig {
        spec,
        dt,
        t_final,
        stages,
        oversample,
        snapshot_interval: ov.snapshot_interval.unwrap_or(0),
        out_dir: ov.out_dir.unwrap_or_else(|| PathBuf::from(".")),
    })
}

/// Reads and parses a configuration file.
pub fn parse_config(path: &std::path::Path) -> Result<RunConfig> {
    let label = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| perr(&label, 0, format!("cannot read file: {e}")))?;
    parse_str(&text, &label)
}

//! Artifact emission: CSV snapshots, model files, sweep reports.
//!
//! Every number written by this crate uses decimal scientific notation with
//! twelve significant digits, so identical runs produce byte-identical
//! artifacts.

use crate::error::Error;
use crate::harness::ConvergenceReport;
use crate::hilbert::sources::{SourceSpec, SourceTerm};
use crate::hilbert::{DerivedModel, DiffusionTerm, SpeciesTerms, TaxisTerm};
use crate::linalg::Mat3;
use crate::turning::BetaLaw;
use crate::Result;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Scientific notation with 12 significant digits: `-1.23456789012e-3`.
pub fn fmt_sci(x: f64) -> String {
    format!("{x:.11e}")
}

/// Header + one row per cell: `x,u_1,…,u_n`.
pub fn snapshot_csv(xs: &[f64], fields: &[Vec<f64>]) -> String {
    let mut out = String::from("x");
    for i in 0..fields.len() {
        let _ = write!(out, ",u_{}", i + 1);
    }
    out.push('\n');
    for (j, x) in xs.iter().enumerate() {
        out.push_str(&fmt_sci(*x));
        for f in fields {
            out.push(',');
            out.push_str(&fmt_sci(f[j]));
        }
        out.push('\n');
    }
    out
}

/// Two-dimensional variant with `x,y,u_1,…,u_n` columns.
pub fn snapshot_csv_2d(xs: &[f64], ys: &[f64], fields: &[Vec<f64>]) -> String {
    let mut out = String::from("x,y");
    for i in 0..fields.len() {
        let _ = write!(out, ",u_{}", i + 1);
    }
    out.push('\n');
    let nx = xs.len();
    for (iy, y) in ys.iter().enumerate() {
        for (ix, x) in xs.iter().enumerate() {
            out.push_str(&fmt_sci(*x));
            out.push(',');
            out.push_str(&fmt_sci(*y));
            for f in fields {
                out.push(',');
                out.push_str(&fmt_sci(f[iy * nx + ix]));
            }
            out.push('\n');
        }
    }
    out
}

/// Write one CSV per snapshot plus a `<prefix>_times.csv` manifest mapping
/// file names to output times. Returns the snapshot paths.
pub fn write_snapshots(
    dir: &Path,
    prefix: &str,
    xs: &[f64],
    times: &[f64],
    frames: &[Vec<Vec<f64>>],
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let mut manifest = String::from("file,t\n");
    for (i, (t, frame)) in times.iter().zip(frames).enumerate() {
        let name = format!("{prefix}_t{i:03}.csv");
        let path = dir.join(&name);
        std::fs::write(&path, snapshot_csv(xs, frame))?;
        let _ = writeln!(manifest, "{name},{}", fmt_sci(*t));
        paths.push(path);
    }
    std::fs::write(dir.join(format!("{prefix}_times.csv")), manifest)?;
    Ok(paths)
}

/// `eps,species,err_l1,err_linf` rows of a convergence report.
pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from("eps,species,err_l1,err_linf\n");
    for (i, eps) in report.eps.iter().enumerate() {
        for (s, spec) in report.species.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                fmt_sci(*eps),
                s + 1,
                fmt_sci(spec.err_l1[i]),
                fmt_sci(spec.err_linf[i])
            );
        }
    }
    out
}

fn fmt_matrix(m: &Mat3, dim: usize) -> String {
    let mut parts = Vec::new();
    for row in m.iter().take(dim) {
        let cols: Vec<String> = row.iter().take(dim).map(|x| fmt_sci(*x)).collect();
        parts.push(cols.join(" "));
    }
    parts.join("  ")
}

fn parse_matrix(text: &str, dim: usize) -> Result<Mat3> {
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::ModelFormat(format!("bad number `{t}`")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != dim * dim {
        return Err(Error::ModelFormat(format!(
            "matrix needs {} entries, got {}",
            dim * dim,
            vals.len()
        )));
    }
    let mut m = crate::linalg::ZERO_MAT;
    for i in 0..dim {
        for j in 0..dim {
            m[i][j] = vals[i * dim + j];
        }
    }
    Ok(m)
}

fn fmt_source_term(term: &SourceTerm) -> Result<String> {
    Ok(match term {
        SourceTerm::Constant { rate } => format!("constant:{}", fmt_sci(*rate)),
        SourceTerm::Linear { rate, field } => {
            format!("linear:{}:{}", fmt_sci(*rate), field + 1)
        }
        SourceTerm::MassAction { rate, fields } => {
            let fs: Vec<String> = fields.iter().map(|f| (f + 1).to_string()).collect();
            format!("mass_action:{}:{}", fmt_sci(*rate), fs.join(":"))
        }
        SourceTerm::Logistic {
            rate,
            exponent,
            field,
        } => format!(
            "logistic:{}:{}:{}",
            fmt_sci(*rate),
            fmt_sci(*exponent),
            field + 1
        ),
        SourceTerm::Saturation {
            rate,
            numerator,
            saturation,
            theta_sat,
        } => format!(
            "saturation:{}:{}:{}:{}:{}",
            fmt_sci(*rate),
            numerator[0] + 1,
            numerator[1] + 1,
            fmt_sci(*saturation),
            fmt_sci(*theta_sat)
        ),
        SourceTerm::Hook { .. } => {
            return Err(Error::ModelFormat(
                "user hook sources cannot be written to a model file".into(),
            ))
        }
    })
}

fn parse_field(tok: &str, n: usize) -> Result<usize> {
    let idx: usize = tok
        .parse()
        .map_err(|_| Error::ModelFormat(format!("bad field index `{tok}`")))?;
    if idx < 1 || idx > n {
        return Err(Error::ModelFormat(format!(
            "field index {idx} out of range 1..={n}"
        )));
    }
    Ok(idx - 1)
}

fn parse_num(tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::ModelFormat(format!("bad number `{tok}`")))
}

fn parse_source_term(text: &str, n: usize) -> Result<SourceTerm> {
    let toks: Vec<&str> = text.split(':').collect();
    let term = match toks[0] {
        "constant" if toks.len() == 2 => SourceTerm::Constant {
            rate: parse_num(toks[1])?,
        },
        "linear" if toks.len() == 3 => SourceTerm::Linear {
            rate: parse_num(toks[1])?,
            field: parse_field(toks[2], n)?,
        },
        "mass_action" if toks.len() >= 3 => SourceTerm::MassAction {
            rate: parse_num(toks[1])?,
            fields: toks[2..]
                .iter()
                .map(|t| parse_field(t, n))
                .collect::<Result<_>>()?,
        },
        "logistic" if toks.len() == 4 => SourceTerm::Logistic {
            rate: parse_num(toks[1])?,
            exponent: parse_num(toks[2])?,
            field: parse_field(toks[3], n)?,
        },
        "saturation" if toks.len() == 6 => SourceTerm::Saturation {
            rate: parse_num(toks[1])?,
            numerator: [parse_field(toks[2], n)?, parse_field(toks[3], n)?],
            saturation: parse_num(toks[4])?,
            theta_sat: parse_num(toks[5])?,
        },
        other => {
            return Err(Error::ModelFormat(format!(
                "unknown or malformed source term `{other}`"
            )))
        }
    };
    Ok(term)
}

/// Serialise a derived model to the sectioned key-value model format.
pub fn emit_model(model: &DerivedModel) -> Result<String> {
    let dim = model.dim();
    let mut out = String::new();
    let _ = writeln!(out, "[model]");
    let _ = writeln!(out, "species = {}", model.species());
    let _ = writeln!(out, "dim = {dim}");
    for i in 0..model.species() {
        let terms = model.terms(i);
        let _ = writeln!(out, "\n[species.{}]", i + 1);
        match &terms.diffusion {
            Some(d) => {
                let _ = writeln!(out, "diffusion = {}", fmt_matrix(&d.tensor, dim));
                match &d.limiter {
                    Some(law) => {
                        let _ = writeln!(
                            out,
                            "diffusion_limiter = beta:{}:{}:{}:{}",
                            fmt_sci(law.0.offset),
                            fmt_sci(law.0.slope),
                            fmt_sci(law.1.offset),
                            fmt_sci(law.1.slope)
                        );
                    }
                    None => {
                        let _ = writeln!(out, "diffusion_limiter = none");
                    }
                }
            }
            None => {
                let _ = writeln!(out, "diffusion = none");
            }
        }
        for (t, taxis) in terms.taxis.iter().enumerate() {
            let _ = writeln!(out, "taxis.{}.target = {}", t + 1, taxis.target + 1);
            let _ = writeln!(
                out,
                "taxis.{}.matrix = {}",
                t + 1,
                fmt_matrix(&taxis.matrix, dim)
            );
            let _ = writeln!(
                out,
                "taxis.{}.limiter = {}",
                t + 1,
                if taxis.flux_limited {
                    "divide_by_target"
                } else {
                    "none"
                }
            );
        }
        let term_strings: Vec<String> = model
            .sources()
            .terms(i)
            .iter()
            .map(fmt_source_term)
            .collect::<Result<_>>()?;
        let _ = writeln!(out, "reaction = {}", term_strings.join(" "));
    }
    Ok(out)
}

/// Parse a model file produced by [`emit_model`].
pub fn parse_model(text: &str) -> Result<DerivedModel> {
    let mut species = 0usize;
    let mut dim = 0usize;
    let mut current = String::new();
    let mut per_species: Vec<Vec<(String, String)>> = Vec::new();

    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if let Some(idx) = current.strip_prefix("species.") {
                let idx: usize = idx
                    .parse()
                    .map_err(|_| Error::ModelFormat(format!("bad section `{current}`")))?;
                if idx != per_species.len() + 1 {
                    return Err(Error::ModelFormat(format!(
                        "species sections out of order at `{current}`"
                    )));
                }
                per_species.push(Vec::new());
            } else if current != "model" {
                return Err(Error::ModelFormat(format!("unknown section `{current}`")));
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::ModelFormat(format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim().to_string(), value.trim().to_string());
        if current == "model" {
            match key.as_str() {
                "species" => {
                    species = value
                        .parse()
                        .map_err(|_| Error::ModelFormat("bad species count".into()))?
                }
                "dim" => {
                    dim = value
                        .parse()
                        .map_err(|_| Error::ModelFormat("bad dim".into()))?
                }
                other => {
                    return Err(Error::ModelFormat(format!(
                        "unknown key `{other}` in [model]"
                    )))
                }
            }
        } else if current.starts_with("species.") {
            per_species
                .last_mut()
                .ok_or_else(|| Error::ModelFormat("key before any species section".into()))?
                .push((key, value));
        } else {
            return Err(Error::ModelFormat(format!("key `{key}` outside a section")));
        }
    }
    if species == 0 || per_species.len() != species {
        return Err(Error::ModelFormat(format!(
            "expected {species} species sections, found {}",
            per_species.len()
        )));
    }
    if dim != 2 && dim != 3 {
        return Err(Error::ModelFormat(format!("bad model dim {dim}")));
    }

    let mut all_terms = Vec::with_capacity(species);
    let mut all_sources = Vec::with_capacity(species);
    for entries in &per_species {
        let mut diffusion: Option<DiffusionTerm> = None;
        let mut taxis: Vec<(usize, TaxisTerm)> = Vec::new();
        let mut reaction: Vec<SourceTerm> = Vec::new();
        let mut limiter: Option<(BetaLaw, BetaLaw)> = None;
        let mut diffusion_text: Option<String> = None;

        for (key, value) in entries {
            match key.as_str() {
                "diffusion" => diffusion_text = Some(value.clone()),
                "diffusion_limiter" => {
                    if value != "none" {
                        let toks: Vec<&str> = value.split(':').collect();
                        if toks.len() != 5 || toks[0] != "beta" {
                            return Err(Error::ModelFormat(format!(
                                "bad diffusion_limiter `{value}`"
                            )));
                        }
                        limiter = Some((
                            BetaLaw {
                                offset: parse_num(toks[1])?,
                                slope: parse_num(toks[2])?,
                            },
                            BetaLaw {
                                offset: parse_num(toks[3])?,
                                slope: parse_num(toks[4])?,
                            },
                        ));
                    }
                }
                "reaction" => {
                    if !value.is_empty() {
                        reaction = value
                            .split_whitespace()
                            .map(|t| parse_source_term(t, species))
                            .collect::<Result<_>>()?;
                    }
                }
                other => {
                    let parts: Vec<&str> = other.split('.').collect();
                    if parts.len() == 3 && parts[0] == "taxis" {
                        let idx: usize = parts[1]
                            .parse()
                            .map_err(|_| Error::ModelFormat(format!("bad key `{other}`")))?;
                        if taxis.iter().all(|(i, _)| *i != idx) {
                            taxis.push((
                                idx,
                                TaxisTerm {
                                    matrix: crate::linalg::ZERO_MAT,
                                    target: 0,
                                    flux_limited: false,
                                },
                            ));
                        }
                        let entry = &mut taxis.iter_mut().find(|(i, _)| *i == idx).unwrap().1;
                        match parts[2] {
                            "target" => entry.target = parse_field(value, species)?,
                            "matrix" => entry.matrix = parse_matrix(value, dim)?,
                            "limiter" => entry.flux_limited = value == "divide_by_target",
                            _ => {
                                return Err(Error::ModelFormat(format!("unknown key `{other}`")))
                            }
                        }
                    } else {
                        return Err(Error::ModelFormat(format!("unknown key `{other}`")));
                    }
                }
            }
        }
        if let Some(text) = diffusion_text {
            if text != "none" {
                diffusion = Some(DiffusionTerm {
                    tensor: parse_matrix(&text, dim)?,
                    limiter: limiter.map(|(a, b)| crate::hilbert::RateLaw(a, b)),
                });
            }
        }
        taxis.sort_by_key(|(i, _)| *i);
        all_terms.push(SpeciesTerms {
            diffusion,
            taxis: taxis.into_iter().map(|(_, t)| t).collect(),
        });
        all_sources.push(reaction);
    }
    DerivedModel::new(dim, all_terms, SourceSpec::new(species, all_sources)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scientific_format_has_twelve_digits() {
        assert_eq!(fmt_sci(1.0), "1.00000000000e0");
        assert_eq!(fmt_sci(0.025), "2.50000000000e-2");
        assert_eq!(fmt_sci(-1234.5), "-1.23450000000e3");
    }

    #[test]
    fn snapshot_csv_shape() {
        let xs = vec![0.25, 0.75];
        let fields = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let text = snapshot_csv(&xs, &fields);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,u_1,u_2"));
        assert_eq!(
            lines.next(),
            Some("2.50000000000e-1,1.00000000000e0,3.00000000000e0")
        );
    }
}

//! Plain-text GLMB density format.
//!
//! ```text
//! glmb-density v1
//! state_dim <d>
//! hypervolume_unit <K>
//! component <history, 16 hex digits> <log_weight> <number of labels>
//! label <birth_time> <index> <number of gaussians>
//! gaussian <weight> <mean: d values> <covariance: d·d values, row major>
//! ```
//!
//! `label` records follow their `component`, `gaussian` records follow their
//! `label`. Blank lines and lines starting with `#` are ignored. Reals are
//! written in shortest round-trip form, so parsing a written density gives
//! back the same bits. Log-weights are written as stored; the reader does not
//! renormalize.

use crate::density::{GlmbComponent, GlmbDensity};
use crate::error::{GlmbError, Result};
use crate::gaussian::{Gaussian, GaussianMixture};
use crate::label::Label;
use std::fmt::Write as _;
use std::sync::Arc;

const HEADER: &str = "glmb-density v1";

pub fn write_density(density: &GlmbDensity) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "state_dim {}", density.state_dim());
    let _ = writeln!(out, "hypervolume_unit {:e}", density.hypervolume_unit());
    for c in density.components() {
        let _ = writeln!(out, "component {:016x} {:e} {}", c.history(), c.log_weight(), c.cardinality());
        for (label, mixture) in c.iter() {
            let _ = writeln!(out, "label {} {} {}", label.birth_time, label.index, mixture.len());
            for (w, g) in mixture.iter() {
                let _ = write!(out, "gaussian {w:e}");
                for v in g.mean().iter() {
                    let _ = write!(out, " {v:e}");
                }
                let d = g.dim();
                for r in 0..d {
                    for col in 0..d {
                        let _ = write!(out, " {:e}", g.cov()[(r, col)]);
                    }
                }
                out.push('\n');
            }
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_record(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Some((i + 1, t.split_whitespace().collect()));
        }
        None
    }

    fn expect(&mut self, keyword: &str) -> Result<(usize, Vec<&'a str>)> {
        match self.next_record() {
            Some((line, fields)) if fields[0] == keyword => Ok((line, fields)),
            Some((line, fields)) => Err(parse_error(line, format!("expected `{keyword}`, found `{}`", fields[0]))),
            None => Err(parse_error(0, format!("unexpected end of input, expected `{keyword}`"))),
        }
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> GlmbError {
    GlmbError::Parse { line, message: message.into() }
}

fn field<T: std::str::FromStr>(fields: &[&str], i: usize, line: usize) -> Result<T> {
    let raw = fields.get(i).ok_or_else(|| parse_error(line, format!("missing field {i}")))?;
    raw.parse().map_err(|_| parse_error(line, format!("cannot parse `{raw}`")))
}

fn arity(fields: &[&str], n: usize, line: usize) -> Result<()> {
    if fields.len() != n {
        return Err(parse_error(line, format!("expected {n} fields, found {}", fields.len())));
    }
    Ok(())
}

pub fn parse_density(text: &str) -> Result<GlmbDensity> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    match lines.next_record() {
        Some((_, f)) if f.join(" ") == HEADER => {}
        Some((line, _)) => return Err(parse_error(line, format!("missing `{HEADER}` header"))),
        None => return Err(parse_error(0, "empty input")),
    }
    let (line, f) = lines.expect("state_dim")?;
    arity(&f, 2, line)?;
    let state_dim: usize = field(&f, 1, line)?;
    let (line, f) = lines.expect("hypervolume_unit")?;
    arity(&f, 2, line)?;
    let k: f64 = field(&f, 1, line)?;

    let mut components = Vec::new();
    while let Some((line, f)) = lines.next_record() {
        if f[0] != "component" {
            return Err(parse_error(line, format!("expected `component`, found `{}`", f[0])));
        }
        arity(&f, 4, line)?;
        let history = u64::from_str_radix(f[1], 16).map_err(|_| parse_error(line, format!("bad history `{}`", f[1])))?;
        let log_weight: f64 = field(&f, 2, line)?;
        let n_labels: usize = field(&f, 3, line)?;
        let mut entries = Vec::with_capacity(n_labels);
        for _ in 0..n_labels {
            let (line, f) = lines.expect("label")?;
            arity(&f, 4, line)?;
            let label = Label::new(field(&f, 1, line)?, field(&f, 2, line)?);
            let n_gauss: usize = field(&f, 3, line)?;
            let mut terms = Vec::with_capacity(n_gauss);
            for _ in 0..n_gauss {
                let (line, f) = lines.expect("gaussian")?;
                arity(&f, 2 + state_dim + state_dim * state_dim, line)?;
                let values = f[1..]
                    .iter()
                    .map(|s| s.parse::<f64>().map_err(|_| parse_error(line, format!("cannot parse `{s}`"))))
                    .collect::<Result<Vec<f64>>>()?;
                let g = Gaussian::from_slices(&values[1..1 + state_dim], &values[1 + state_dim..])
                    .map_err(|e| parse_error(line, e.to_string()))?;
                terms.push((values[0], g));
            }
            let mixture = GaussianMixture::new(terms).map_err(|e| parse_error(line, e.to_string()))?;
            entries.push((label, Arc::new(mixture)));
        }
        components.push(GlmbComponent::new(history, entries, log_weight).map_err(|e| parse_error(line, e.to_string()))?);
    }
    GlmbDensity::unnormalized(components, state_dim, k)
}

pub fn read_density_file(path: &std::path::Path) -> Result<GlmbDensity> {
    parse_density(&std::fs::read_to_string(path)?)
}

pub fn write_density_file(density: &GlmbDensity, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, write_density(density))?;
    Ok(())
}

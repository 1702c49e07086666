//! Plain-text instance and probe files.
//!
//! Both formats are line oriented `key = value` records. Blank lines and
//! lines starting with `#` are ignored, and reals are written in scientific
//! notation with 17 significant digits so that `f64` data round-trip
//! bit-for-bit.
//!
//! Instance file:
//!
//! ```text
//! format = bipolar-instance/1
//! k = 2
//! l = 0
//! waiver = false
//! row 0 = 0.0000000000000000e0 1.0000000000000000e0 ...
//! row 1 = ...
//! ```
//!
//! Probe file (any number of `probe` blocks):
//!
//! ```text
//! format = bipolar-probe/1
//! manifold = sphere:r=1
//! probe 0
//! perpendicular = true
//! chart = 0
//! p = ...
//! w = ...
//! x = ...
//! y = ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::distgeo::{build_instance, build_instance_waived, ComparisonInstance};
use crate::error::{Error, Result};
use crate::manifold::{ChartPoint, ManifoldSpec};
use crate::mtw::MtwProbe;
use crate::scalar::Scalar;

pub const INSTANCE_FORMAT: &str = "bipolar-instance/1";
pub const PROBE_FORMAT: &str = "bipolar-probe/1";

/// 17 significant digits.
pub fn format_real<T: Scalar>(x: T) -> String {
    format!("{:.16e}", x.to_f64_lossy())
}

fn schema(field: impl Into<String>, line: usize, msg: impl Into<String>) -> Error {
    Error::Schema { path: field.into(), line, msg: msg.into() }
}

fn parse_real<T: Scalar>(field: &str, line: usize, s: &str) -> Result<T> {
    let x: f64 = s.parse().map_err(|_| schema(field, line, format!("`{s}` is not a number")))?;
    T::from_f64(x).ok_or_else(|| schema(field, line, format!("`{s}` is not representable")))
}

fn parse_reals<T: Scalar>(field: &str, line: usize, s: &str) -> Result<Vec<T>> {
    s.split_whitespace()
        .enumerate()
        .map(|(i, tok)| parse_real(&format!("{field}[{i}]"), line, tok))
        .collect()
}

fn parse_usize(field: &str, line: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|_| schema(field, line, format!("`{s}` is not a nonnegative integer")))
}

fn parse_bool(field: &str, line: usize, s: &str) -> Result<bool> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(schema(field, line, format!("expected true or false, found `{s}`"))),
    }
}

fn join<T: Scalar>(xs: &[T]) -> String {
    xs.iter().map(|&x| format_real(x)).collect::<Vec<_>>().join(" ")
}

/// Meaningful lines as `(line number, key, value)`; a line without `=` has
/// an empty value.
fn records(text: &str) -> Result<Vec<(usize, &str, &str)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = match line.split_once('=') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => (line, ""),
        };
        if k.is_empty() {
            return Err(schema("", idx + 1, "missing key"));
        }
        out.push((idx + 1, k, v));
    }
    Ok(out)
}

fn set_once<V>(slot: &mut Option<(V, usize)>, value: V, field: &str, line: usize) -> Result<()> {
    if let Some((_, first)) = slot {
        return Err(schema(field, line, format!("duplicate field (first given on line {first})")));
    }
    *slot = Some((value, line));
    Ok(())
}

pub fn write_instance<T: Scalar>(inst: &ComparisonInstance<T>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "format = {INSTANCE_FORMAT}");
    let _ = writeln!(s, "k = {}", inst.k);
    let _ = writeln!(s, "l = {}", inst.l);
    let _ = writeln!(s, "waiver = {}", inst.waiver);
    for (i, row) in inst.dist.iter().enumerate() {
        let _ = writeln!(s, "row {i} = {}", join(row));
    }
    s
}

pub fn read_instance<T: Scalar>(text: &str) -> Result<ComparisonInstance<T>> {
    let mut format = None;
    let mut k = None;
    let mut l = None;
    let mut waiver = None;
    let mut rows: Vec<Option<(Vec<T>, usize)>> = Vec::new();
    let mut last_line = 0;
    for (line, key, value) in records(text)? {
        last_line = line;
        match key {
            "format" => set_once(&mut format, value.to_string(), key, line)?,
            "k" => set_once(&mut k, parse_usize(key, line, value)?, key, line)?,
            "l" => set_once(&mut l, parse_usize(key, line, value)?, key, line)?,
            "waiver" => set_once(&mut waiver, parse_bool(key, line, value)?, key, line)?,
            _ => {
                let Some(idx) = key.strip_prefix("row ") else {
                    return Err(schema(key, line, "unknown field"));
                };
                let i = parse_usize("row", line, idx.trim())?;
                let field = format!("dist[{i}]");
                let row = parse_reals(&field, line, value)?;
                if rows.len() <= i {
                    rows.resize(i + 1, None);
                }
                set_once(&mut rows[i], row, &field, line)?;
            }
        }
    }
    match &format {
        Some((f, _)) if f == INSTANCE_FORMAT => {}
        Some((f, line)) => return Err(schema("format", *line, format!("unsupported format `{f}`"))),
        None => return Err(schema("format", last_line, "missing field")),
    }
    let (k, _) = k.ok_or_else(|| schema("k", last_line, "missing field"))?;
    let (l, _) = l.ok_or_else(|| schema("l", last_line, "missing field"))?;
    let waiver = waiver.map_or(false, |(w, _)| w);
    let n = k + l + 2;
    if rows.len() > n {
        let line = rows[n..].iter().flatten().map(|(_, ln)| *ln).next().unwrap_or(last_line);
        return Err(schema(format!("dist[{}]", rows.len() - 1), line, format!("only {n} rows expected for k={k}, l={l}")));
    }
    let mut dist = Vec::with_capacity(n);
    let mut lines = Vec::with_capacity(n);
    for i in 0..n {
        let Some((row, line)) = rows.get(i).cloned().flatten() else {
            return Err(schema(format!("dist[{i}]"), last_line, "missing row"));
        };
        if row.len() != n {
            return Err(schema(format!("dist[{i}]"), line, format!("expected {n} entries, found {}", row.len())));
        }
        dist.push(row);
        lines.push(line);
    }
    for i in 0..n {
        for j in 0..n {
            let d = dist[i][j];
            if !d.is_finite() || d < T::zero() {
                return Err(schema(format!("dist[{i}][{j}]"), lines[i], "must be finite and nonnegative"));
            }
            if i == j && d != T::zero() {
                return Err(schema(format!("dist[{i}][{i}]"), lines[i], "diagonal entry must be zero"));
            }
            if j < i && d != dist[j][i] {
                return Err(schema(format!("dist[{i}][{j}]"), lines[i], format!("differs from dist[{j}][{i}] (matrix not symmetric)")));
            }
        }
    }
    if waiver {
        build_instance_waived(k, l, dist)
    } else {
        build_instance(k, l, dist)
    }
}

pub fn write_instance_file<T: Scalar>(path: &Path, inst: &ComparisonInstance<T>) -> Result<()> {
    std::fs::write(path, write_instance(inst))?;
    Ok(())
}

pub fn read_instance_file<T: Scalar>(path: &Path) -> Result<ComparisonInstance<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_instance(&text)
}

pub fn write_probes<T: Scalar>(m: &ManifoldSpec<T>, probes: &[MtwProbe<T>]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "format = {PROBE_FORMAT}");
    let _ = writeln!(s, "manifold = {m}");
    for (i, p) in probes.iter().enumerate() {
        let _ = writeln!(s, "probe {i}");
        let _ = writeln!(s, "perpendicular = {}", p.perpendicular);
        let _ = writeln!(s, "chart = {}", p.p.chart);
        let _ = writeln!(s, "p = {}", join(&p.p.coords));
        let _ = writeln!(s, "w = {}", join(&p.w.components));
        let _ = writeln!(s, "x = {}", join(&p.x.components));
        let _ = writeln!(s, "y = {}", join(&p.y.components));
    }
    s
}

#[derive(Default)]
struct ProbeFields<T> {
    start: usize,
    perpendicular: Option<(bool, usize)>,
    chart: Option<(usize, usize)>,
    p: Option<(Vec<T>, usize)>,
    w: Option<(Vec<T>, usize)>,
    x: Option<(Vec<T>, usize)>,
    y: Option<(Vec<T>, usize)>,
}

impl<T: Scalar> ProbeFields<T> {
    fn finish(self, m: &ManifoldSpec<T>, idx: usize) -> Result<MtwProbe<T>> {
        let field = |name: &str| format!("probe[{idx}].{name}");
        let need = |v: Option<(Vec<T>, usize)>, name: &str| -> Result<(Vec<T>, usize)> {
            let (v, line) = v.ok_or_else(|| schema(field(name), self.start, "missing field"))?;
            if v.len() != m.dim() {
                return Err(schema(field(name), line, format!("expected {} components, found {}", m.dim(), v.len())));
            }
            Ok((v, line))
        };
        let (p, pline) = need(self.p.clone(), "p")?;
        let (w, _) = need(self.w.clone(), "w")?;
        let (x, _) = need(self.x.clone(), "x")?;
        let (y, _) = need(self.y.clone(), "y")?;
        let chart = self.chart.map_or(0, |(c, _)| c);
        let chart = u8::try_from(chart).map_err(|_| schema(field("chart"), self.start, "chart index out of range"))?;
        let perpendicular = self.perpendicular.map_or(false, |(b, _)| b);
        let base = ChartPoint::in_chart(chart, p);
        m.check_point(&base).map_err(|e| schema(field("p"), pline, e.to_string()))?;
        // Components are stored exactly as written; the perpendicular flag
        // is re-validated rather than re-imposed.
        let probe = MtwProbe {
            w: m.tangent(&base, w)?,
            x: m.tangent(&base, x)?,
            y: m.tangent(&base, y)?,
            p: base,
            perpendicular,
        };
        probe.check_perpendicular(m).map_err(|e| schema(field("y"), self.start, e.to_string()))?;
        Ok(probe)
    }
}

pub fn read_probes<T: Scalar>(text: &str) -> Result<(ManifoldSpec<T>, Vec<MtwProbe<T>>)> {
    let mut format = None;
    let mut manifold: Option<(ManifoldSpec<T>, usize)> = None;
    let mut blocks: Vec<ProbeFields<T>> = Vec::new();
    let mut last_line = 0;
    for (line, key, value) in records(text)? {
        last_line = line;
        if let Some(idx) = key.strip_prefix("probe") {
            let idx = idx.trim();
            if !idx.is_empty() && !value.is_empty() {
                return Err(schema(key, line, "probe header takes no value"));
            }
            if !idx.is_empty() && parse_usize("probe", line, idx)? != blocks.len() {
                return Err(schema(key, line, format!("expected probe {}", blocks.len())));
            }
            blocks.push(ProbeFields { start: line, ..Default::default() });
            continue;
        }
        let current = blocks.len().checked_sub(1);
        match (key, current) {
            ("format", None) => set_once(&mut format, value.to_string(), key, line)?,
            ("manifold", None) => {
                let m = crate::manifold::parse_manifold::<T>(value).map_err(|e| schema("manifold", line, e.to_string()))?;
                set_once(&mut manifold, m, key, line)?
            }
            (_, None) => return Err(schema(key, line, "unknown header field")),
            (_, Some(i)) => {
                let b = &mut blocks[i];
                let f = format!("probe[{i}].{key}");
                match key {
                    "perpendicular" => set_once(&mut b.perpendicular, parse_bool(&f, line, value)?, &f, line)?,
                    "chart" => set_once(&mut b.chart, parse_usize(&f, line, value)?, &f, line)?,
                    "p" => set_once(&mut b.p, parse_reals(&f, line, value)?, &f, line)?,
                    "w" => set_once(&mut b.w, parse_reals(&f, line, value)?, &f, line)?,
                    "x" => set_once(&mut b.x, parse_reals(&f, line, value)?, &f, line)?,
                    "y" => set_once(&mut b.y, parse_reals(&f, line, value)?, &f, line)?,
                    _ => return Err(schema(f, line, "unknown field")),
                }
            }
        }
    }
    match &format {
        Some((f, _)) if f == PROBE_FORMAT => {}
        Some((f, line)) => return Err(schema("format", *line, format!("unsupported format `{f}`"))),
        None => return Err(schema("format", last_line, "missing field")),
    }
    let (m, _) = manifold.ok_or_else(|| schema("manifold", last_line, "missing field"))?;
    let probes = blocks.into_iter().enumerate().map(|(i, b)| b.finish(&m, i)).collect::<Result<Vec<_>>>()?;
    Ok((m, probes))
}

pub fn write_probe_file<T: Scalar>(path: &Path, m: &ManifoldSpec<T>, probes: &[MtwProbe<T>]) -> Result<()> {
    std::fs::write(path, write_probes(m, probes))?;
    Ok(())
}

pub fn read_probe_file<T: Scalar>(path: &Path) -> Result<(ManifoldSpec<T>, Vec<MtwProbe<T>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_probes(&text)
}

//! The `.fgm` model file.
//!
//! Grammar, one statement per line, `#` starts a comment:
//!
//! ```text
//! file     := (line '\n')*
//! line     := '' | key '=' value | '[' section ']' | row
//! section  := caputo | sample_points | geodesic | g_h | g_v | N | D | source | frame
//! row      := value (',' value)*
//! ```
//!
//! Top-level keys are `n`, `m` (explicit mode only, defaults to `n`),
//! `alpha`, `mode` and `lagrangian`. `[caputo]` takes `grid_points` and
//! `tol`; `[geodesic]` takes `x0`, `v0`, `t_end` and `steps`. The matrix
//! sections `[g_h]`, `[g_v]`, `[N]`, `[source]` and `[frame]` hold one row
//! of expressions per line; `[N]` has m rows of n entries. `[D]` holds
//! `block i j k = expr` lines with 1-based indices, where block is one of
//! `Lh` (L^i_jk), `Lv` (L^a_bk), `Ch` (C^i_jc) or `Cv` (C^a_bc); absent
//! entries are zero. `[sample_points]` lists one point per line as
//! `x1, .., xn, y1, .., ym`.

use std::collections::BTreeMap;

use crate::caputo::{CaputoConfig, FractionalOrder};
use crate::error::{Error, Result};
use crate::expr::{parse_with_dims, Expression};
use crate::field::{ArrayField, DiffContext};
use crate::geometry::{DConnection, DConnectionBlocks, DMetric, GeometryData, NConnection};
use crate::gravity::{FrameTransform, SourceField};
use crate::lagrange::{LagrangeModel, DEFAULT_REGULARITY_TOL};
use crate::point::Point;

pub const DEFAULT_GRID_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Lagrangian,
    Explicit,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Lagrangian => "lagrangian",
            Mode::Explicit => "explicit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSetup {
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    pub t_end: f64,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct ExplicitTables {
    pub g_h: Vec<Expression>,
    pub g_v: Vec<Expression>,
    pub n_conn: Vec<Expression>,
    pub d: DConnectionTables,
}

/// Flat row-major entries of the four d-connection blocks.
#[derive(Debug, Clone)]
pub struct DConnectionTables {
    pub l_h: Vec<Expression>,
    pub l_v: Vec<Expression>,
    pub c_h: Vec<Expression>,
    pub c_v: Vec<Expression>,
}

#[derive(Debug, Clone)]
pub struct ModelFile {
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub mode: Mode,
    pub lagrangian: Option<Expression>,
    pub explicit: Option<ExplicitTables>,
    pub source: Option<Vec<Expression>>,
    pub frame: Option<Vec<Expression>>,
    pub grid_points: usize,
    pub tol: f64,
    pub sample_points: Vec<Vec<f64>>,
    pub geodesic: Option<GeodesicSetup>,
}

#[derive(Default)]
struct Raw {
    top: BTreeMap<String, (usize, String)>,
    keyed: BTreeMap<String, Vec<(usize, String, String)>>,
    rows: BTreeMap<String, Vec<(usize, String)>>,
}

const KEYED: &[&str] = &["caputo", "geodesic", "D"];
const TABLES: &[&str] = &["sample_points", "g_h", "g_v", "N", "source", "frame"];

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::ModelFile(format!("line {line}: {}", msg.into()))
}

fn scan(text: &str) -> Result<Raw> {
    let mut raw = Raw::default();
    let mut section: Option<String> = None;
    for (k, full) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = full.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, "unterminated section header"))?
                .trim();
            if !KEYED.contains(&name) && !TABLES.contains(&name) {
                return Err(err(line_no, format!("unknown section [{name}]")));
            }
            if raw.keyed.contains_key(name) || raw.rows.contains_key(name) {
                return Err(err(line_no, format!("section [{name}] repeated")));
            }
            if KEYED.contains(&name) {
                raw.keyed.insert(name.to_string(), Vec::new());
            } else {
                raw.rows.insert(name.to_string(), Vec::new());
            }
            section = Some(name.to_string());
            continue;
        }
        match section.as_deref() {
            None => {
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| err(line_no, "expected `key = value`"))?;
                let key = key.trim().to_string();
                if raw.top.contains_key(&key) {
                    return Err(err(line_no, format!("key `{key}` repeated")));
                }
                raw.top.insert(key, (line_no, value.trim().to_string()));
            }
            Some(s) if KEYED.contains(&s) => {
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| err(line_no, "expected `key = value`"))?;
                raw.keyed.get_mut(s).expect("section registered").push((
                    line_no,
                    key.trim().to_string(),
                    value.trim().to_string(),
                ));
            }
            Some(s) => raw
                .rows
                .get_mut(s)
                .expect("section registered")
                .push((line_no, line.to_string())),
        }
    }
    Ok(raw)
}

fn number<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| err(line, format!("`{key}` expects a number, got `{value}`")))
}

fn numbers(line: usize, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| number::<f64>(line, "entry", s.trim()))
        .collect()
}

fn expr(line: usize, src: &str, n: usize, m: usize) -> Result<Expression> {
    parse_with_dims(src, n, m).map_err(|e| match e {
        Error::Syntax { column, message, .. } => Error::Syntax { line, column, message },
        other => err(line, other.to_string()),
    })
}

fn table(raw: &Raw, name: &str, rows: usize, cols: usize, n: usize, m: usize) -> Result<Option<Vec<Expression>>> {
    let Some(lines) = raw.rows.get(name) else {
        return Ok(None);
    };
    if lines.len() != rows {
        return Err(Error::ModelFile(format!(
            "[{name}] needs {rows} rows, found {}",
            lines.len()
        )));
    }
    let mut out = Vec::with_capacity(rows * cols);
    for (line_no, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != cols {
            return Err(err(
                *line_no,
                format!("[{name}] rows need {cols} entries, found {}", cells.len()),
            ));
        }
        for c in cells {
            out.push(expr(*line_no, c.trim(), n, m)?);
        }
    }
    Ok(Some(out))
}

fn d_tables(raw: &Raw, n: usize, m: usize) -> Result<DConnectionTables> {
    let zero = || Expression::constant(0.0, n, m);
    let mut t = DConnectionTables {
        l_h: vec![zero(); n * n * n],
        l_v: vec![zero(); m * m * n],
        c_h: vec![zero(); n * n * m],
        c_v: vec![zero(); m * m * m],
    };
    let Some(lines) = raw.keyed.get("D") else {
        return Ok(t);
    };
    for (line_no, key, value) in lines {
        let mut parts = key.split_whitespace();
        let block = parts.next().unwrap_or("");
        let idx = parts
            .map(|s| number::<usize>(*line_no, "index", s))
            .collect::<Result<Vec<_>>>()?;
        // (upper range, first lower range, last lower range) of the block.
        let (dims, slot) = match block {
            "Lh" => ((n, n, n), &mut t.l_h),
            "Lv" => ((m, m, n), &mut t.l_v),
            "Ch" => ((n, n, m), &mut t.c_h),
            "Cv" => ((m, m, m), &mut t.c_v),
            _ => return Err(err(*line_no, format!("unknown d-connection block `{block}`"))),
        };
        let ranges = [dims.0, dims.1, dims.2];
        if idx.len() != 3 || idx.iter().zip(ranges).any(|(&i, r)| i == 0 || i > r) {
            return Err(err(
                *line_no,
                format!("`{key}` needs three 1-based indices within {ranges:?}"),
            ));
        }
        slot[((idx[0] - 1) * dims.1 + idx[1] - 1) * dims.2 + idx[2] - 1] = expr(*line_no, value, n, m)?;
    }
    Ok(t)
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<ModelFile> {
        let raw = scan(text)?;
        for key in raw.top.keys() {
            if !["n", "m", "alpha", "mode", "lagrangian"].contains(&key.as_str()) {
                let (line, _) = raw.top[key];
                return Err(err(line, format!("unknown key `{key}`")));
            }
        }
        let get = |k: &str| raw.top.get(k);
        let (nl, nv) = get("n").ok_or_else(|| Error::ModelFile("missing key `n`".into()))?;
        let n: usize = number(*nl, "n", nv)?;
        if n == 0 {
            return Err(err(*nl, "`n` must be positive"));
        }
        let alpha = match get("alpha") {
            Some((l, v)) => number(*l, "alpha", v)?,
            None => 1.0,
        };
        let mode = match get("mode") {
            None => Mode::Lagrangian,
            Some((_, v)) if v == "lagrangian" => Mode::Lagrangian,
            Some((_, v)) if v == "explicit" => Mode::Explicit,
            Some((l, v)) => return Err(err(*l, format!("mode `{v}` is neither lagrangian nor explicit"))),
        };
        let m = match get("m") {
            Some((l, v)) => {
                let m: usize = number(*l, "m", v)?;
                if mode == Mode::Lagrangian && m != n {
                    return Err(err(*l, "a Lagrangian model has m = n"));
                }
                if m == 0 {
                    return Err(err(*l, "`m` must be positive"));
                }
                m
            }
            None => n,
        };
        let d = n + m;

        let mut grid_points = DEFAULT_GRID_POINTS;
        let mut tol = DEFAULT_REGULARITY_TOL;
        for (l, k, v) in raw.keyed.get("caputo").into_iter().flatten() {
            match k.as_str() {
                "grid_points" => grid_points = number(*l, k, v)?,
                "tol" => tol = number(*l, k, v)?,
                _ => return Err(err(*l, format!("unknown [caputo] key `{k}`"))),
            }
        }

        let geodesic = match raw.keyed.get("geodesic") {
            None => None,
            Some(lines) => {
                let (mut x0, mut v0, mut t_end, mut steps) = (None, None, None, None);
                for (l, k, v) in lines {
                    match k.as_str() {
                        "x0" => x0 = Some(numbers(*l, v)?),
                        "v0" => v0 = Some(numbers(*l, v)?),
                        "t_end" => t_end = Some(number::<f64>(*l, k, v)?),
                        "steps" => steps = Some(number::<usize>(*l, k, v)?),
                        _ => return Err(err(*l, format!("unknown [geodesic] key `{k}`"))),
                    }
                }
                let missing = |k: &str| Error::ModelFile(format!("[geodesic] lacks `{k}`"));
                Some(GeodesicSetup {
                    x0: x0.ok_or_else(|| missing("x0"))?,
                    v0: v0.ok_or_else(|| missing("v0"))?,
                    t_end: t_end.ok_or_else(|| missing("t_end"))?,
                    steps: steps.ok_or_else(|| missing("steps"))?,
                })
            }
        };

        let sample_points = raw
            .rows
            .get("sample_points")
            .into_iter()
            .flatten()
            .map(|(l, line)| numbers(*l, line))
            .collect::<Result<Vec<_>>>()?;

        let (lagrangian, explicit) = match mode {
            Mode::Lagrangian => {
                let (l, src) = get("lagrangian")
                    .ok_or_else(|| Error::ModelFile("mode lagrangian requires `lagrangian`".into()))?;
                for s in ["g_h", "g_v", "N"] {
                    if raw.rows.contains_key(s) {
                        return Err(Error::ModelFile(format!("[{s}] is only allowed in explicit mode")));
                    }
                }
                if raw.keyed.contains_key("D") {
                    return Err(Error::ModelFile("[D] is only allowed in explicit mode".into()));
                }
                (Some(expr(*l, src, n, m)?), None)
            }
            Mode::Explicit => {
                if let Some((l, _)) = get("lagrangian") {
                    return Err(err(*l, "`lagrangian` is not allowed in explicit mode"));
                }
                let req = |name: &str, rows, cols| {
                    table(&raw, name, rows, cols, n, m)?
                        .ok_or_else(|| Error::ModelFile(format!("mode explicit requires [{name}]")))
                };
                let g_h = req("g_h", n, n)?;
                let g_v = req("g_v", m, m)?;
                let n_conn =
                    table(&raw, "N", m, n, n, m)?.unwrap_or_else(|| vec![Expression::constant(0.0, n, m); m * n]);
                let d = d_tables(&raw, n, m)?;
                (None, Some(ExplicitTables { g_h, g_v, n_conn, d }))
            }
        };
        let source = table(&raw, "source", d, d, n, m)?;
        let frame = table(&raw, "frame", d, d, n, m)?;

        let model = ModelFile {
            n,
            m,
            alpha,
            mode,
            lagrangian,
            explicit,
            source,
            frame,
            grid_points,
            tol,
            sample_points,
            geodesic,
        };
        model.validate()?;
        Ok(model)
    }

    /// Re-checks the invariants; call again after applying overrides.
    pub fn validate(&self) -> Result<()> {
        FractionalOrder::new(self.alpha)?;
        CaputoConfig::new(self.grid_points)?;
        if !(self.tol > 0.0) {
            return Err(Error::ModelFile(format!("tol must be positive, got {}", self.tol)));
        }
        let d = self.n + self.m;
        for (k, p) in self.sample_points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::ModelFile(format!(
                    "sample point {} has {} coordinates, expected {d}",
                    k + 1,
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::ModelFile(format!("sample point {} is not finite", k + 1)));
            }
            if self.alpha < 1.0 && p.iter().any(|&v| v <= 0.0) {
                return Err(Error::ModelFile(format!(
                    "sample point {} needs positive coordinates for alpha < 1",
                    k + 1
                )));
            }
        }
        if let Some(g) = &self.geodesic {
            if g.x0.len() != self.n || g.v0.len() != self.n {
                return Err(Error::ModelFile(format!(
                    "[geodesic] x0 and v0 need {} entries",
                    self.n
                )));
            }
            if !(g.t_end > 0.0) {
                return Err(Error::ModelFile("[geodesic] t_end must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn order(&self) -> FractionalOrder {
        FractionalOrder::new(self.alpha).expect("validated")
    }

    pub fn caputo(&self) -> CaputoConfig {
        CaputoConfig::new(self.grid_points).expect("validated")
    }

    pub fn ctx(&self) -> DiffContext {
        DiffContext::new(self.order(), self.caputo())
    }

    pub fn points(&self) -> Vec<Point> {
        self.sample_points
            .iter()
            .map(|c| Point::new(self.n, self.m, c.clone()).expect("validated"))
            .collect()
    }

    pub fn lagrange_model(&self) -> Result<LagrangeModel> {
        let l = self
            .lagrangian
            .clone()
            .ok_or_else(|| Error::ModelFile("this command needs mode = lagrangian".into()))?;
        Ok(LagrangeModel::from_expression(l, self.order(), self.caputo())?.with_regularity_tol(self.tol))
    }

    /// The geometry: canonical for a Lagrangian, the given tables otherwise.
    pub fn geometry(&self) -> Result<GeometryData> {
        match self.mode {
            Mode::Lagrangian => Ok(self.lagrange_model()?.geometry()),
            Mode::Explicit => {
                let t = self.explicit.as_ref().expect("explicit tables");
                let (n, m) = (self.n, self.m);
                let f = |e: &Vec<Expression>| ArrayField::symbolic(e.clone(), n, m);
                let blocks = DConnectionBlocks {
                    l_h: f(&t.d.l_h),
                    l_v: f(&t.d.l_v),
                    c_h: f(&t.d.c_h),
                    c_v: f(&t.d.c_v),
                };
                GeometryData::new(
                    DMetric::new(n, m, f(&t.g_h), f(&t.g_v))?,
                    NConnection::new(n, m, f(&t.n_conn))?,
                    DConnection::from_blocks(n, m, blocks)?,
                    self.ctx(),
                )
            }
        }
    }

    /// The source table, or vacuum when none is given.
    pub fn source_field(&self) -> Result<SourceField> {
        match &self.source {
            Some(e) => SourceField::new(self.n, self.m, ArrayField::symbolic(e.clone(), self.n, self.m)),
            None => Ok(SourceField::vacuum(self.n, self.m)),
        }
    }

    pub fn frame_transform(&self) -> Result<Option<FrameTransform>> {
        self.frame
            .as_ref()
            .map(|e| FrameTransform::new(self.n, self.m, ArrayField::symbolic(e.clone(), self.n, self.m)))
            .transpose()
    }
}

/// Parses a standalone frame file: D rows of D comma-separated expressions.
pub fn parse_frame_file(text: &str, n: usize, m: usize) -> Result<Vec<Expression>> {
    let d = n + m;
    let mut rows = Vec::new();
    for (k, full) in text.lines().enumerate() {
        let line = full.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line == "[frame]" {
            continue;
        }
        rows.push((k + 1, line.to_string()));
    }
    let mut raw = Raw::default();
    raw.rows.insert("frame".into(), rows);
    table(&raw, "frame", d, d, n, m).map(|t| t.expect("inserted"))
}

//! The `fgeom` command line: model files in, JSON reports out.
//!
//! Exit status is 0 on success, 1 for malformed input (parse and validation
//! errors) and 2 for numerical failure. The error name leads the message on
//! standard error.

pub mod model;
pub mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::dynamics::{reference_classical_solve, solve_semi_spray, sup_distance, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{idx3, metric_compatibility_residual, structure_equation_residual, GeometryData};
use crate::gravity::{
    apply_frame_transform, canonical_lc_constraint_residuals, einstein_residual, inverse_transform_n_connection,
    lc_constraint_residuals, transform_n_connection, FrameTransform,
};
use crate::point::Point;
use model::{parse_frame_file, Mode, ModelFile};
use report::{matrix, num, object, outcome, tensor, vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Validate the model and echo it
    Inspect,
    /// Fractional Hessian at the sample points
    Hessian,
    /// Full canonical pipeline at the sample points
    Geometry,
    /// Integrate the semi-spray and write a CSV trajectory
    Geodesic,
    /// Compatibility, structure-equation and constraint residuals
    Check,
    /// Einstein tensor against the source table
    Residual,
    /// Apply a frame transform
    Transform,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Inspect => "inspect",
            Command::Hessian => "hessian",
            Command::Geometry => "geometry",
            Command::Geodesic => "geodesic",
            Command::Check => "check",
            Command::Residual => "residual",
            Command::Transform => "transform",
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "fgeom",
    version,
    about = "Caputo fractional Lagrange geometry on model files"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Model file (.fgm)
    pub model: PathBuf,
    /// Fractional order in (0, 1]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Quadrature grid points
    #[arg(long)]
    pub grid: Option<usize>,
    /// Regularity tolerance on |det g|
    #[arg(long)]
    pub tol: Option<f64>,
    /// Sample points, `x1,..,y1,..;x1,..`
    #[arg(long)]
    pub points: Option<String>,
    /// Output path for `geodesic`; defaults to the model path with a .csv extension
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Frame file for `transform`, overriding the [frame] section
    #[arg(long)]
    pub frame: Option<PathBuf>,
    /// Add wall-clock time to the report
    #[arg(long)]
    pub timing: bool,
}

/// Maps a failure to the process exit status.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        1
    } else {
        2
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn parse_points(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::ModelFile(format!("--points: `{}` is not a number", v.trim())))
                })
                .collect()
        })
        .collect()
}

/// Loads the model and applies flag overrides.
pub fn load(cli: &Cli) -> Result<(ModelFile, String)> {
    let bytes = read(&cli.model)?;
    let hash = Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<String>();
    let text = String::from_utf8(bytes).map_err(|_| Error::ModelFile("model file is not UTF-8".into()))?;
    let mut model = ModelFile::parse(&text)?;
    if let Some(a) = cli.alpha {
        model.alpha = a;
    }
    if let Some(g) = cli.grid {
        model.grid_points = g;
    }
    if let Some(t) = cli.tol {
        model.tol = t;
    }
    if let Some(p) = &cli.points {
        model.sample_points = parse_points(p)?;
    }
    if let Some(f) = &cli.frame {
        let text = String::from_utf8(read(f)?).map_err(|_| Error::ModelFile("frame file is not UTF-8".into()))?;
        model.frame = Some(parse_frame_file(&text, model.n, model.m)?);
    }
    model.validate()?;
    Ok((model, hash))
}

fn require_points(model: &ModelFile) -> Result<Vec<Point>> {
    if model.sample_points.is_empty() {
        return Err(Error::ModelFile(
            "no sample points; add [sample_points] or pass --points".into(),
        ));
    }
    Ok(model.points())
}

/// Runs one command and writes the JSON report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let start = Instant::now();
    let (model, hash) = load(cli)?;
    let body = match cli.command {
        Command::Inspect => inspect(&model),
        Command::Hessian => hessian(&model)?,
        Command::Geometry => geometry(&model)?,
        Command::Geodesic => geodesic(cli, &model)?,
        Command::Check => check(&model)?,
        Command::Residual => residual(&model)?,
        Command::Transform => transform(&model)?,
    };
    let mut rep = Map::new();
    rep.insert("command".into(), Value::String(cli.command.name().into()));
    rep.insert("model".into(), Value::String(cli.model.display().to_string()));
    rep.insert("model_sha256".into(), Value::String(hash));
    rep.insert("config".into(), config(&model));
    for (k, v) in body {
        rep.insert(k, v);
    }
    if cli.timing {
        rep.insert("timing_seconds".into(), num(start.elapsed().as_secs_f64()));
    }
    let text = serde_json::to_string_pretty(&Value::Object(rep)).expect("serializable");
    writeln!(out, "{text}").map_err(|e| Error::Io(e.to_string()))
}

fn config(model: &ModelFile) -> Value {
    object([
        ("n", Value::from(model.n)),
        ("m", Value::from(model.m)),
        ("alpha", num(model.alpha)),
        ("mode", Value::String(model.mode.name().into())),
        ("grid_points", Value::from(model.grid_points)),
        ("tol", num(model.tol)),
    ])
}

fn inspect(model: &ModelFile) -> Map<String, Value> {
    let strings =
        |e: &[crate::expr::Expression]| Value::Array(e.iter().map(|x| Value::String(x.to_string())).collect());
    let mut m = Map::new();
    if let Some(l) = &model.lagrangian {
        m.insert("lagrangian".into(), Value::String(l.to_string()));
    }
    if let Some(t) = &model.explicit {
        m.insert("g_h".into(), strings(&t.g_h));
        m.insert("g_v".into(), strings(&t.g_v));
        m.insert("n_connection".into(), strings(&t.n_conn));
        m.insert(
            "d_connection".into(),
            object([
                ("L_h", strings(&t.d.l_h)),
                ("L_v", strings(&t.d.l_v)),
                ("C_h", strings(&t.d.c_h)),
                ("C_v", strings(&t.d.c_v)),
            ]),
        );
    }
    if let Some(s) = &model.source {
        m.insert("source".into(), strings(s));
    }
    if let Some(f) = &model.frame {
        m.insert("frame".into(), strings(f));
    }
    m.insert(
        "sample_points".into(),
        Value::Array(model.sample_points.iter().map(|p| vector(p)).collect()),
    );
    if let Some(g) = &model.geodesic {
        m.insert(
            "geodesic".into(),
            object([
                ("x0", vector(&g.x0)),
                ("v0", vector(&g.v0)),
                ("t_end", num(g.t_end)),
                ("steps", Value::from(g.steps)),
            ]),
        );
    }
    m
}

fn hessian(model: &ModelFile) -> Result<Map<String, Value>> {
    let lm = model.lagrange_model()?;
    let points = require_points(model)?;
    let mut rows = Vec::new();
    for p in &points {
        let h = lm.fractional_hessian(p)?;
        rows.push(object([
            ("point", vector(p.coords())),
            ("g", matrix(&h.g)),
            ("g_inv", matrix(&h.g_inv)),
            ("det", num(h.det)),
        ]));
    }
    let reg = lm.regularity_check(&points);
    let mut m = Map::new();
    m.insert("points".into(), Value::Array(rows));
    m.insert(
        "regularity".into(),
        object([
            ("min_abs_det", num(reg.min_abs_det)),
            ("max_condition", num(reg.max_condition)),
            ("passed", Value::Bool(reg.passed())),
        ]),
    );
    Ok(m)
}

fn connection_blocks(gamma: &[f64], n: usize, m: usize) -> Value {
    let d = n + m;
    let pick = |tr: std::ops::Range<usize>, br: std::ops::Range<usize>, gr: std::ops::Range<usize>| {
        let dims = [tr.len(), br.len(), gr.len()];
        let mut flat = Vec::new();
        for t in tr {
            for b in br.clone() {
                for g in gr.clone() {
                    flat.push(gamma[idx3(d, t, b, g)]);
                }
            }
        }
        tensor(&flat, &dims)
    };
    object([
        ("L_h", pick(0..n, 0..n, 0..n)),
        ("L_v", pick(n..d, n..d, 0..n)),
        ("C_h", pick(0..n, 0..n, n..d)),
        ("C_v", pick(n..d, n..d, n..d)),
    ])
}

fn geometry(model: &ModelFile) -> Result<Map<String, Value>> {
    let data = model.geometry()?;
    let points = require_points(model)?;
    let lm = match model.mode {
        Mode::Lagrangian => Some(model.lagrange_model()?),
        Mode::Explicit => None,
    };
    let (n, m, d) = (data.h_dim(), data.v_dim(), data.dim());
    let mut rows = Vec::new();
    let mut structure: f64 = 0.0;
    for p in &points {
        let geo = data.evaluate(p)?;
        let mut row = Map::new();
        row.insert("point".into(), vector(p.coords()));
        if let Some(lm) = &lm {
            let h = lm.fractional_hessian(p)?;
            row.insert("hessian".into(), matrix(&h.g));
        }
        row.insert("n_connection".into(), matrix(&data.nconn.matrix(p)?));
        row.insert(
            "connection".into(),
            connection_blocks(&data.dconn.coefficients(p)?, n, m),
        );
        row.insert("torsion".into(), tensor(&geo.torsion.values, &[d, d, d]));
        row.insert("curvature".into(), tensor(&geo.curvature.values, &[d, d, d, d]));
        row.insert("ricci".into(), matrix(&geo.ricci.values));
        row.insert(
            "scalar".into(),
            object([
                ("horizontal", num(geo.scalar.horizontal)),
                ("vertical", num(geo.scalar.vertical)),
                ("total", num(geo.scalar.total)),
            ]),
        );
        row.insert("einstein".into(), matrix(&geo.einstein.values));
        row.insert("torsion_max_abs".into(), num(geo.torsion.max_abs()));
        row.insert("curvature_max_abs".into(), num(geo.curvature.max_abs()));
        rows.push(Value::Object(row));
        structure = structure.max(structure_equation_residual(&data, p)?.max_abs);
    }
    let compat = metric_compatibility_residual(&data, &points)?;
    let mut out = Map::new();
    out.insert("points".into(), Value::Array(rows));
    out.insert(
        "residuals".into(),
        object([
            ("metric_compatibility", num(compat)),
            ("structure_equation", num(structure)),
        ]),
    );
    Ok(out)
}

fn default_out(model_path: &Path) -> PathBuf {
    model_path.with_extension("csv")
}

fn write_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let n = traj.h_dim();
    let mut s = String::from("tau");
    for i in 1..=n {
        s.push_str(&format!(",x{i}"));
    }
    for i in 1..=n {
        s.push_str(&format!(",y{i}"));
    }
    s.push('\n');
    for k in 0..traj.len() {
        s.push_str(&format!("{:.16e}", traj.tau()[k]));
        for v in traj.state(k) {
            s.push_str(&format!(",{v:.16e}"));
        }
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn geodesic(cli: &Cli, model: &ModelFile) -> Result<Map<String, Value>> {
    let lm = model.lagrange_model()?;
    let setup = model
        .geodesic
        .as_ref()
        .ok_or_else(|| Error::ModelFile("geodesic needs a [geodesic] section".into()))?;
    let spray = lm.semi_spray();
    let traj = solve_semi_spray(&spray, lm.order(), &setup.x0, &setup.v0, setup.t_end, setup.steps)?;
    let path = cli.out.clone().unwrap_or_else(|| default_out(&cli.model));
    write_csv(&path, &traj)?;
    let last = traj.len() - 1;
    let el = lm.euler_lagrange_residual(&traj).map(|r| r.max());
    let mut out = Map::new();
    out.insert("trajectory".into(), Value::String(path.display().to_string()));
    out.insert("samples".into(), Value::from(traj.len()));
    out.insert(
        "final".into(),
        object([
            ("tau", num(traj.tau()[last])),
            ("x", vector(traj.x(last))),
            ("y", vector(traj.y(last))),
        ]),
    );
    out.insert("euler_lagrange_max".into(), outcome(&el));
    if lm.order().is_classical() {
        let rk = reference_classical_solve(&spray, &setup.x0, &setup.v0, setup.t_end, setup.steps)
            .and_then(|r| sup_distance(&traj, &r));
        out.insert("classical_reference_distance".into(), outcome(&rk));
    }
    Ok(out)
}

fn check(model: &ModelFile) -> Result<Map<String, Value>> {
    let data = model.geometry()?;
    let points = require_points(model)?;
    let mut out = Map::new();
    let lc = match model.mode {
        Mode::Lagrangian => {
            let lm = model.lagrange_model()?;
            let reg = lm.regularity_check(&points);
            out.insert(
                "regularity".into(),
                object([
                    ("min_abs_det", num(reg.min_abs_det)),
                    ("max_condition", num(reg.max_condition)),
                    ("passed", Value::Bool(reg.passed())),
                ]),
            );
            canonical_lc_constraint_residuals(&lm, &points)
        }
        Mode::Explicit => lc_constraint_residuals(&data, &points),
    };
    out.insert(
        "metric_compatibility".into(),
        num(metric_compatibility_residual(&data, &points)?),
    );
    let (mut worst, mut scale): (f64, f64) = (0.0, 0.0);
    for p in &points {
        let s = structure_equation_residual(&data, p)?;
        worst = worst.max(s.max_abs);
        scale = scale.max(s.torsion_scale);
    }
    out.insert(
        "structure_equation".into(),
        object([("max_abs", num(worst)), ("torsion_scale", num(scale))]),
    );
    out.insert(
        "lc_constraints".into(),
        object([
            ("l", outcome(&lc.l)),
            ("c", outcome(&lc.c)),
            ("omega", outcome(&lc.omega)),
        ]),
    );
    Ok(out)
}

fn residual(model: &ModelFile) -> Result<Map<String, Value>> {
    let data: GeometryData = model.geometry()?;
    let points = require_points(model)?;
    let src = model.source_field()?;
    let mut rows = Vec::new();
    for p in &points {
        let geo = data.evaluate(p)?;
        let diff = &geo.einstein.values - src.matrix(p)?;
        rows.push(object([("point", vector(p.coords())), ("max_abs", num(diff.amax()))]));
    }
    let r = einstein_residual(&data, &src, &points)?;
    let mut out = Map::new();
    out.insert(
        "source".into(),
        Value::String(if model.source.is_some() { "table" } else { "vacuum" }.into()),
    );
    out.insert("points".into(), Value::Array(rows));
    out.insert("max_abs".into(), num(r.max_abs));
    out.insert("metric_compatibility".into(), num(r.compatibility));
    Ok(out)
}

fn transform(model: &ModelFile) -> Result<Map<String, Value>> {
    let a: FrameTransform = model
        .frame_transform()?
        .ok_or_else(|| Error::ModelFile("transform needs a [frame] section or --frame".into()))?;
    let data = model.geometry()?;
    let points = require_points(model)?;
    let mut rows = Vec::new();
    for p in &points {
        let g = apply_frame_transform(&data.metric, &a, p)?;
        let n_prime = transform_n_connection(&data.nconn, &a, p)?;
        let back = inverse_transform_n_connection(&n_prime, &a, p)?;
        let round_trip = (back - data.nconn.matrix(p)?).amax();
        rows.push(object([
            ("point", vector(p.coords())),
            ("metric", matrix(&g)),
            ("n_connection", matrix(&n_prime)),
            ("n_round_trip_error", num(round_trip)),
        ]));
    }
    let mut out = Map::new();
    out.insert("points".into(), Value::Array(rows));
    Ok(out)
}

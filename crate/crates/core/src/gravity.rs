//! Frame transforms, field-equation residuals and the Levi-Civita
//! constraints L̂^c_{aj} = e_a(N^c_j), Ĉ^i_{jb} = 0, Ω^a_{ji} = 0.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::ArrayField;
use crate::geometry::{
    anholonomy_coefficients, metric_compatibility_residual, DConnection, DMetric, GeometryData, NConnection,
};
use crate::lagrange::LagrangeModel;
use crate::point::Point;

/// Off-block magnitude above which a transform mixes h and v directions.
pub const N_ADAPTED_TOL: f64 = 1e-12;

/// A frame transform A^{α′}_α(u) over the total space.
#[derive(Debug, Clone)]
pub struct FrameTransform {
    h_dim: usize,
    v_dim: usize,
    matrix: ArrayField,
}

impl FrameTransform {
    /// Row-major (n+m)² component field.
    pub fn new(h_dim: usize, v_dim: usize, matrix: ArrayField) -> Result<Self> {
        let d = h_dim + v_dim;
        if matrix.len() != d * d {
            return Err(Error::DimensionMismatch(format!(
                "frame transform has {} components, expected {}",
                matrix.len(),
                d * d
            )));
        }
        Ok(FrameTransform { h_dim, v_dim, matrix })
    }

    pub fn constant(h_dim: usize, v_dim: usize, a: &DMatrix<f64>) -> Result<Self> {
        let d = h_dim + v_dim;
        if a.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!("expected a {d}×{d} matrix")));
        }
        let entries = a
            .transpose()
            .iter()
            .map(|&v| crate::expr::Expression::constant(v, h_dim, v_dim))
            .collect();
        Ok(FrameTransform {
            h_dim,
            v_dim,
            matrix: ArrayField::symbolic(entries, h_dim, v_dim),
        })
    }

    pub fn matrix(&self, p: &Point) -> Result<DMatrix<f64>> {
        let d = self.h_dim + self.v_dim;
        Ok(DMatrix::from_row_slice(d, d, &self.matrix.eval(p)?))
    }

    pub fn inverse(&self, p: &Point) -> Result<DMatrix<f64>> {
        invert(&self.matrix(p)?)
    }

    /// True when A preserves the h/v splitting at `p`.
    pub fn is_n_adapted(&self, p: &Point) -> Result<bool> {
        Ok(off_block_norm(&self.matrix(p)?, self.h_dim) <= N_ADAPTED_TOL)
    }
}

fn invert(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let det = a.determinant();
    let scale = a.amax().max(f64::MIN_POSITIVE).powi(a.nrows() as i32);
    if !(det.abs() > 1e-14 * scale) {
        return Err(Error::SingularTransform(format!("det A = {det:e}")));
    }
    a.clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularTransform(format!("det A = {det:e}")))
}

fn off_block_norm(a: &DMatrix<f64>, n: usize) -> f64 {
    let d = a.nrows();
    let mut worst: f64 = 0.0;
    for r in 0..d {
        for c in 0..d {
            if (r < n) != (c < n) {
                worst = worst.max(a[(r, c)].abs());
            }
        }
    }
    worst
}

/// Matter source Υ_{βδ} in the N-adapted frame, row-major.
#[derive(Debug, Clone)]
pub struct SourceField {
    h_dim: usize,
    v_dim: usize,
    field: ArrayField,
}

impl SourceField {
    pub fn new(h_dim: usize, v_dim: usize, field: ArrayField) -> Result<Self> {
        let d = h_dim + v_dim;
        if field.len() != d * d {
            return Err(Error::DimensionMismatch(format!(
                "source has {} components, expected {}",
                field.len(),
                d * d
            )));
        }
        Ok(SourceField { h_dim, v_dim, field })
    }

    pub fn vacuum(h_dim: usize, v_dim: usize) -> Self {
        let d = h_dim + v_dim;
        SourceField {
            h_dim,
            v_dim,
            field: ArrayField::zeros(d * d, h_dim, v_dim),
        }
    }

    /// The Einstein tensor of `data` itself, so the field equations close.
    pub fn einstein_of(data: &GeometryData) -> Self {
        let (n, m) = (data.h_dim(), data.v_dim());
        let d = n + m;
        let data = Arc::new(data.clone());
        let field = ArrayField::numeric(d * d, n, m, move |p| {
            Ok(data.evaluate(p)?.einstein.values.transpose().as_slice().to_vec())
        });
        SourceField {
            h_dim: n,
            v_dim: m,
            field,
        }
    }

    pub fn matrix(&self, p: &Point) -> Result<DMatrix<f64>> {
        let d = self.h_dim + self.v_dim;
        Ok(DMatrix::from_row_slice(d, d, &self.field.eval(p)?))
    }
}

/// g_{αβ} = A^{α′}_α A^{β′}_β g_{α′β′}, i.e. Aᵀ g A on the full metric.
pub fn apply_frame_transform(g: &DMetric, a: &FrameTransform, p: &Point) -> Result<DMatrix<f64>> {
    let am = a.matrix(p)?;
    invert(&am)?;
    let full = g.full(p)?;
    if am.shape() != full.shape() {
        return Err(Error::DimensionMismatch("transform and metric sizes differ".into()));
    }
    Ok(am.transpose() * full * am)
}

fn adapted_blocks(a: &FrameTransform, p: &Point) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let am = a.matrix(p)?;
    let n = a.h_dim;
    let off = off_block_norm(&am, n);
    if off > N_ADAPTED_TOL {
        return Err(Error::NotNAdapted(off));
    }
    let m = a.v_dim;
    Ok((
        am.view((0, 0), (n, n)).into_owned(),
        am.view((n, n), (m, m)).into_owned(),
    ))
}

/// N^{a′}_{j′} = A^{a′}_a A^j_{j′} N^a_j, with A^j_{j′} the inverse h-block.
pub fn transform_n_connection(nconn: &NConnection, a: &FrameTransform, p: &Point) -> Result<DMatrix<f64>> {
    let (ah, av) = adapted_blocks(a, p)?;
    let ah_inv = invert(&ah)?;
    Ok(av * nconn.matrix(p)? * ah_inv)
}

/// Inverse of [`transform_n_connection`]: recovers N from N′.
pub fn inverse_transform_n_connection(n_prime: &DMatrix<f64>, a: &FrameTransform, p: &Point) -> Result<DMatrix<f64>> {
    let (ah, av) = adapted_blocks(a, p)?;
    Ok(invert(&av)? * n_prime * ah)
}

/// Geometry pulled back along the constant linear change u = M u′ with M
/// block-diagonal. The metric follows [`apply_frame_transform`] with A = M,
/// N follows [`transform_n_connection`] with A = M⁻¹, and Γ transforms as a
/// tensor since M is constant. Points of the new chart are u′ = M⁻¹u.
pub fn transform_geometry(data: &GeometryData, m_mat: &DMatrix<f64>) -> Result<GeometryData> {
    let (n, m) = (data.h_dim(), data.v_dim());
    let d = n + m;
    if m_mat.shape() != (d, d) {
        return Err(Error::DimensionMismatch(format!("expected a {d}×{d} matrix")));
    }
    let off = off_block_norm(m_mat, n);
    if off > N_ADAPTED_TOL {
        return Err(Error::NotNAdapted(off));
    }
    let m_inv = invert(m_mat)?;
    let (mm, mi) = (m_mat.clone(), m_inv.clone());
    let push = move |p: &Point| -> Point {
        let u = &mm * nalgebra::DVector::from_column_slice(p.coords());
        Point::new(n, m, u.as_slice().to_vec()).expect("same dimensions")
    };
    let push = Arc::new(push);
    let src = Arc::new(data.clone());

    let metric = {
        let (src, push, mm) = (src.clone(), push.clone(), m_mat.clone());
        let blocks = Arc::new(move |p: &Point| -> Result<DMatrix<f64>> {
            let g = src.metric.full(&push(p))?;
            Ok(mm.transpose() * g * &mm)
        });
        let b1 = blocks.clone();
        let h = ArrayField::numeric(n * n, n, m, move |p| {
            let g = b1(p)?;
            Ok(g.view((0, 0), (n, n)).transpose().as_slice().to_vec())
        });
        let v = ArrayField::numeric(m * m, n, m, move |p| {
            let g = blocks(p)?;
            Ok(g.view((n, n), (m, m)).transpose().as_slice().to_vec())
        });
        DMetric::new(n, m, h, v)?
    };
    let nconn = {
        let (src, push) = (src.clone(), push.clone());
        let ph = m_mat.view((0, 0), (n, n)).into_owned();
        let qi = m_inv.view((n, n), (m, m)).into_owned();
        NConnection::new(
            n,
            m,
            ArrayField::numeric(m * n, n, m, move |p| {
                let nm = src.nconn.matrix(&push(p))?;
                Ok((&qi * nm * &ph).transpose().as_slice().to_vec())
            }),
        )?
    };
    let dconn = {
        let mm = m_mat.clone();
        let gamma = ArrayField::numeric(d * d * d, n, m, move |p| {
            let g = src.dconn.coefficients(&push(p))?;
            let at = |t: usize, b: usize, c: usize| g[(t * d + b) * d + c];
            let mut out = vec![0.0; d * d * d];
            for t in 0..d {
                for b in 0..d {
                    for c in 0..d {
                        let mut acc = 0.0;
                        for s in 0..d {
                            if mi[(t, s)] == 0.0 {
                                continue;
                            }
                            for mu in 0..d {
                                if mm[(mu, b)] == 0.0 {
                                    continue;
                                }
                                for nu in 0..d {
                                    acc += mi[(t, s)] * at(s, mu, nu) * mm[(mu, b)] * mm[(nu, c)];
                                }
                            }
                        }
                        out[(t * d + b) * d + c] = acc;
                    }
                }
            }
            Ok(out)
        });
        DConnection::from_full(n, m, gamma)
    };
    GeometryData::new(metric, nconn, dconn, data.ctx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EinsteinResidual {
    /// max |G_{βδ} − Υ_{βδ}| over the sample
    pub max_abs: f64,
    /// Metric-compatibility residual of the connection on the same sample;
    /// the field equations presume it vanishes.
    pub compatibility: f64,
}

pub fn einstein_residual(data: &GeometryData, src: &SourceField, sample: &[Point]) -> Result<EinsteinResidual> {
    if sample.is_empty() {
        return Err(Error::DimensionMismatch("empty sample".into()));
    }
    let mut max_abs: f64 = 0.0;
    for p in sample {
        let geo = data.evaluate(p)?;
        let diff = &geo.einstein.values - src.matrix(p)?;
        max_abs = max_abs.max(diff.amax());
    }
    let compatibility = metric_compatibility_residual(data, sample)?;
    Ok(EinsteinResidual { max_abs, compatibility })
}

/// The three constraint residuals, each computed on its own so one
/// undefined quantity does not hide the others.
#[derive(Debug, Clone, PartialEq)]
pub struct LcResiduals {
    /// max |L^c_{aj} − e_a(N^c_j)|
    pub l: Result<f64>,
    /// max |C^i_{jb}|
    pub c: Result<f64>,
    /// max |Ω^a_{ji}|
    pub omega: Result<f64>,
}

impl LcResiduals {
    /// All three present and at most `tol`.
    pub fn all_within(&self, tol: f64) -> bool {
        [&self.l, &self.c, &self.omega]
            .iter()
            .all(|r| matches!(r, Ok(v) if *v <= tol))
    }
}

fn max_over<F>(sample: &[Point], mut f: F) -> Result<f64>
where
    F: FnMut(&Point) -> Result<f64>,
{
    if sample.is_empty() {
        return Err(Error::DimensionMismatch("empty sample".into()));
    }
    sample.iter().try_fold(0.0f64, |acc, p| Ok(acc.max(f(p)?)))
}

fn l_residual(data: &GeometryData, p: &Point) -> Result<f64> {
    data.check_admissible(p)?;
    let (n, m) = (data.h_dim(), data.v_dim());
    let d = n + m;
    let gamma = data.dconn.coefficients(p)?;
    let mut worst: f64 = 0.0;
    for a in 0..m {
        let dn = data.nconn.field().partial(n + a, &data.ctx).eval(p)?;
        for c in 0..m {
            for j in 0..n {
                let l = gamma[((n + c) * d + n + a) * d + j];
                worst = worst.max((l - dn[c * n + j]).abs());
            }
        }
    }
    Ok(worst)
}

fn c_residual(data: &GeometryData, p: &Point) -> Result<f64> {
    data.check_admissible(p)?;
    let (n, m) = (data.h_dim(), data.v_dim());
    let d = n + m;
    let gamma = data.dconn.coefficients(p)?;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for b in 0..m {
                worst = worst.max(gamma[(i * d + j) * d + n + b].abs());
            }
        }
    }
    Ok(worst)
}

fn omega_residual(data: &GeometryData, p: &Point) -> Result<f64> {
    data.check_admissible(p)?;
    let an = anholonomy_coefficients(&data.nconn, p, &data.ctx)?;
    Ok(an.omega.iter().fold(0.0, |a, v| a.max(v.abs())))
}

/// Constraint residuals for explicit geometric data.
pub fn lc_constraint_residuals(data: &GeometryData, sample: &[Point]) -> LcResiduals {
    LcResiduals {
        l: max_over(sample, |p| l_residual(data, p)),
        c: max_over(sample, |p| c_residual(data, p)),
        omega: max_over(sample, |p| omega_residual(data, p)),
    }
}

/// Constraint residuals for the canonical data of a Lagrangian. The Ĉ term
/// comes straight from the Hessian, so it is available even where the
/// canonical N-connection is not.
pub fn canonical_lc_constraint_residuals(model: &LagrangeModel, sample: &[Point]) -> LcResiduals {
    let data = model.geometry();
    LcResiduals {
        l: max_over(sample, |p| l_residual(&data, p)),
        c: max_over(sample, |p| {
            Ok(model.c_hat(p)?.iter().fold(0.0, |a, v: &f64| a.max(v.abs())))
        }),
        omega: max_over(sample, |p| omega_residual(&data, p)),
    }
}

//! Distinguished geometry adapted to an h/v splitting.
//!
//! Index conventions used throughout: the total dimension is D = n + m with
//! base slots `0..n` (indices i, j, k) and fiber slots `n..D` (a, b, c).
//! Connection coefficients are stored as `Γ^τ_{βγ}` with γ the direction of
//! differentiation, so D_{e_γ} e_β = Γ^τ_{βγ} e_τ. A d-connection only has
//! the blocks L^i_{jk}, L^a_{bk}, C^i_{jc}, C^a_{bc}.

mod frame;
mod residual;
mod tensors;

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::{ArrayField, DiffContext};
use crate::point::Point;

pub use frame::{anholonomy_coefficients, frame_derivatives, n_adapted_frame_apply, Anholonomy};
pub use residual::{metric_compatibility_residual, structure_equation_residual, StructureResidual};
pub use tensors::{
    curvature_coefficients, einstein_tensor, ricci_tensor, scalar_curvature, torsion_coefficients, CurvatureData,
    EinsteinData, RicciData, ScalarCurvature, TorsionData,
};

#[inline]
pub(crate) fn idx3(d: usize, a: usize, b: usize, c: usize) -> usize {
    (a * d + b) * d + c
}

#[inline]
pub(crate) fn idx4(d: usize, a: usize, b: usize, c: usize, e: usize) -> usize {
    ((a * d + b) * d + c) * d + e
}

fn check_len(what: &str, field: &ArrayField, len: usize) -> Result<()> {
    if field.len() != len {
        return Err(Error::DimensionMismatch(format!(
            "{what} has {} components, expected {len}",
            field.len()
        )));
    }
    Ok(())
}

/// Coefficients N^a_i(u), stored row-major as `a * n + i`.
#[derive(Debug, Clone)]
pub struct NConnection {
    n: usize,
    m: usize,
    coeffs: ArrayField,
}

impl NConnection {
    pub fn new(n: usize, m: usize, coeffs: ArrayField) -> Result<Self> {
        check_len("N-connection", &coeffs, m * n)?;
        Ok(NConnection { n, m, coeffs })
    }

    pub fn zero(n: usize, m: usize) -> Self {
        NConnection {
            n,
            m,
            coeffs: ArrayField::zeros(m * n, n, m),
        }
    }

    pub fn h_dim(&self) -> usize {
        self.n
    }

    pub fn v_dim(&self) -> usize {
        self.m
    }

    pub fn field(&self) -> &ArrayField {
        &self.coeffs
    }

    /// The m×n matrix N^a_i at `p`.
    pub fn matrix(&self, p: &Point) -> Result<DMatrix<f64>> {
        let v = self.coeffs.eval(p)?;
        Ok(DMatrix::from_row_slice(self.m, self.n, &v))
    }
}

/// Block-diagonal d-metric {g_ij, g_ab}.
#[derive(Debug, Clone)]
pub struct DMetric {
    n: usize,
    m: usize,
    h_block: ArrayField,
    v_block: ArrayField,
}

impl DMetric {
    pub fn new(n: usize, m: usize, h_block: ArrayField, v_block: ArrayField) -> Result<Self> {
        check_len("h-block of the metric", &h_block, n * n)?;
        check_len("v-block of the metric", &v_block, m * m)?;
        Ok(DMetric { n, m, h_block, v_block })
    }

    pub fn h_dim(&self) -> usize {
        self.n
    }

    pub fn v_dim(&self) -> usize {
        self.m
    }

    pub fn h_field(&self) -> &ArrayField {
        &self.h_block
    }

    pub fn v_field(&self) -> &ArrayField {
        &self.v_block
    }

    pub fn blocks(&self, p: &Point) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let h = DMatrix::from_row_slice(self.n, self.n, &self.h_block.eval(p)?);
        let v = DMatrix::from_row_slice(self.m, self.m, &self.v_block.eval(p)?);
        Ok((h, v))
    }

    /// Full (n+m)×(n+m) matrix in the N-adapted frame.
    pub fn full(&self, p: &Point) -> Result<DMatrix<f64>> {
        let (h, v) = self.blocks(p)?;
        Ok(block_diag(&h, &v))
    }

    /// Inverse of the full metric; `SingularMetric` when either block is.
    pub fn inverse(&self, p: &Point) -> Result<DMatrix<f64>> {
        let (h, v) = self.blocks(p)?;
        let hi = h
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SingularMetric(format!("h-block singular at {p}")))?;
        let vi = v
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SingularMetric(format!("v-block singular at {p}")))?;
        Ok(block_diag(&hi, &vi))
    }

    /// Eigenvalue signs of each block at `p`.
    pub fn signature_at(&self, p: &Point) -> Result<(Vec<i8>, Vec<i8>)> {
        let (h, v) = self.blocks(p)?;
        let sig = |mat: DMatrix<f64>| -> Result<Vec<i8>> {
            let sym = (&mat + mat.transpose()) * 0.5;
            let eig = sym.symmetric_eigenvalues();
            let mut s: Vec<i8> = eig
                .iter()
                .map(|&l| {
                    if l > 0.0 {
                        Ok(1)
                    } else if l < 0.0 {
                        Ok(-1)
                    } else {
                        Err(Error::SingularMetric(format!("zero eigenvalue at {p}")))
                    }
                })
                .collect::<Result<_>>()?;
            s.sort_unstable_by(|a, b| b.cmp(a));
            Ok(s)
        };
        Ok((sig(h)?, sig(v)?))
    }
}

pub(crate) fn block_diag(h: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (h.nrows(), v.nrows());
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(h);
    out.view_mut((n, n), (m, m)).copy_from(v);
    out
}

/// The four coefficient blocks of a d-connection, each a field.
#[derive(Debug, Clone)]
pub struct DConnectionBlocks {
    /// L^i_{jk}, index `(i*n + j)*n + k`.
    pub l_h: ArrayField,
    /// L^a_{bk}, index `(a*m + b)*n + k`.
    pub l_v: ArrayField,
    /// C^i_{jc}, index `(i*n + j)*m + c`.
    pub c_h: ArrayField,
    /// C^a_{bc}, index `(a*m + b)*m + c`.
    pub c_v: ArrayField,
}

/// A d-connection Γ^τ_{βγ} stored over the full index range.
#[derive(Debug, Clone)]
pub struct DConnection {
    n: usize,
    m: usize,
    gamma: ArrayField,
}

impl DConnection {
    pub fn zero(n: usize, m: usize) -> Self {
        let d = n + m;
        DConnection {
            n,
            m,
            gamma: ArrayField::zeros(d * d * d, n, m),
        }
    }

    pub fn from_blocks(n: usize, m: usize, blocks: DConnectionBlocks) -> Result<Self> {
        check_len("L^i_jk", &blocks.l_h, n * n * n)?;
        check_len("L^a_bk", &blocks.l_v, m * m * n)?;
        check_len("C^i_jc", &blocks.c_h, n * n * m)?;
        check_len("C^a_bc", &blocks.c_v, m * m * m)?;
        let d = n + m;
        let all_symbolic = [&blocks.l_h, &blocks.l_v, &blocks.c_h, &blocks.c_v]
            .iter()
            .all(|b| b.expressions().is_some());
        if all_symbolic {
            let zero = crate::expr::Expression::constant(0.0, n, m);
            let mut full = vec![zero; d * d * d];
            scatter(
                n,
                m,
                &mut full,
                |k| blocks.l_h.expressions().unwrap()[k].clone(),
                |k| blocks.l_v.expressions().unwrap()[k].clone(),
                |k| blocks.c_h.expressions().unwrap()[k].clone(),
                |k| blocks.c_v.expressions().unwrap()[k].clone(),
            );
            return Ok(DConnection {
                n,
                m,
                gamma: ArrayField::symbolic(full, n, m),
            });
        }
        let blocks = Arc::new(blocks);
        let gamma = ArrayField::numeric(d * d * d, n, m, move |p| {
            let (lh, lv) = (blocks.l_h.eval(p)?, blocks.l_v.eval(p)?);
            let (ch, cv) = (blocks.c_h.eval(p)?, blocks.c_v.eval(p)?);
            let mut full = vec![0.0; d * d * d];
            scatter(n, m, &mut full, |k| lh[k], |k| lv[k], |k| ch[k], |k| cv[k]);
            Ok(full)
        });
        Ok(DConnection { n, m, gamma })
    }

    /// Wraps a full Γ field; entries outside the d-connection blocks must vanish.
    pub(crate) fn from_full(n: usize, m: usize, gamma: ArrayField) -> Self {
        DConnection { n, m, gamma }
    }

    pub fn h_dim(&self) -> usize {
        self.n
    }

    pub fn v_dim(&self) -> usize {
        self.m
    }

    pub fn field(&self) -> &ArrayField {
        &self.gamma
    }

    pub fn coefficients(&self, p: &Point) -> Result<Vec<f64>> {
        self.gamma.eval(p)
    }
}

fn scatter<T, A, B, C, E>(n: usize, m: usize, full: &mut [T], l_h: A, l_v: B, c_h: C, c_v: E)
where
    A: Fn(usize) -> T,
    B: Fn(usize) -> T,
    C: Fn(usize) -> T,
    E: Fn(usize) -> T,
{
    let d = n + m;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                full[idx3(d, i, j, k)] = l_h((i * n + j) * n + k);
            }
            for c in 0..m {
                full[idx3(d, i, j, n + c)] = c_h((i * n + j) * m + c);
            }
        }
    }
    for a in 0..m {
        for b in 0..m {
            for k in 0..n {
                full[idx3(d, n + a, n + b, k)] = l_v((a * m + b) * n + k);
            }
            for c in 0..m {
                full[idx3(d, n + a, n + b, n + c)] = c_v((a * m + b) * m + c);
            }
        }
    }
}

/// Everything needed to evaluate distinguished geometry: (g, N, D) plus the
/// differentiation rule.
#[derive(Debug, Clone)]
pub struct GeometryData {
    pub metric: DMetric,
    pub nconn: NConnection,
    pub dconn: DConnection,
    pub ctx: DiffContext,
}

impl GeometryData {
    pub fn new(metric: DMetric, nconn: NConnection, dconn: DConnection, ctx: DiffContext) -> Result<Self> {
        let dims = [
            (metric.h_dim(), metric.v_dim()),
            (nconn.h_dim(), nconn.v_dim()),
            (dconn.h_dim(), dconn.v_dim()),
        ];
        if dims.iter().any(|&d| d != dims[0]) {
            return Err(Error::DimensionMismatch(format!(
                "metric, N-connection and d-connection dimensions differ: {dims:?}"
            )));
        }
        Ok(GeometryData {
            metric,
            nconn,
            dconn,
            ctx,
        })
    }

    pub fn h_dim(&self) -> usize {
        self.metric.h_dim()
    }

    pub fn v_dim(&self) -> usize {
        self.metric.v_dim()
    }

    pub fn dim(&self) -> usize {
        self.h_dim() + self.v_dim()
    }

    /// Positivity of every coordinate whenever the order is fractional.
    pub fn check_admissible(&self, p: &Point) -> Result<()> {
        if !self.ctx.is_classical() {
            if let Some(&c) = p.coords().iter().find(|&&c| c <= 0.0) {
                return Err(Error::NonPositiveAbscissa(c));
            }
        }
        Ok(())
    }

    /// Torsion, curvature, Ricci, scalar curvature and Einstein tensor at `p`.
    pub fn evaluate(&self, p: &Point) -> Result<PointGeometry> {
        self.check_admissible(p)?;
        let gamma = self.dconn.coefficients(p)?;
        let an = anholonomy_coefficients(&self.nconn, p, &self.ctx)?;
        let torsion = tensors::torsion_from(&gamma, &an);
        let curvature = tensors::curvature_from(&self.dconn, &self.nconn, p, &self.ctx, &gamma, &an)?;
        let ricci = ricci_tensor(&curvature);
        let scalar = scalar_curvature(&self.metric, &ricci, p)?;
        let einstein = einstein_tensor(&self.metric, &ricci, scalar.total, p)?;
        Ok(PointGeometry {
            point: p.clone(),
            torsion,
            curvature,
            ricci,
            scalar,
            einstein,
        })
    }
}

#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub point: Point,
    pub torsion: TorsionData,
    pub curvature: CurvatureData,
    pub ricci: RicciData,
    pub scalar: ScalarCurvature,
    pub einstein: EinsteinData,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_with_dims;

    fn sym(n: usize, m: usize, src: &[&str]) -> ArrayField {
        ArrayField::symbolic(src.iter().map(|s| parse_with_dims(s, n, m).unwrap()).collect(), n, m)
    }

    #[test]
    fn block_assembly_places_coefficients() {
        let (n, m) = (2, 1);
        let blocks = DConnectionBlocks {
            l_h: sym(n, m, &["1", "2", "3", "4", "5", "6", "7", "8"]),
            l_v: sym(n, m, &["9", "10"]),
            c_h: sym(n, m, &["11", "12", "13", "14"]),
            c_v: sym(n, m, &["15"]),
        };
        let dc = DConnection::from_blocks(n, m, blocks).unwrap();
        let p = Point::new(2, 1, vec![1.0, 1.0, 1.0]).unwrap();
        let g = dc.coefficients(&p).unwrap();
        let d = 3;
        assert_eq!(g[idx3(d, 1, 0, 1)], 6.0); // L^2_12
        assert_eq!(g[idx3(d, 2, 2, 1)], 10.0); // L^1_12 (v)
        assert_eq!(g[idx3(d, 1, 1, 2)], 14.0); // C^2_21
        assert_eq!(g[idx3(d, 2, 2, 2)], 15.0);
        assert_eq!(g[idx3(d, 0, 2, 0)], 0.0); // mixed block absent
        let nonzero = g.iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 15);
    }

    #[test]
    fn metric_signature_and_inverse() {
        let metric = DMetric::new(2, 1, sym(2, 1, &["1", "0", "0", "-2"]), sym(2, 1, &["3"])).unwrap();
        let p = Point::new(2, 1, vec![0.5, 0.5, 0.5]).unwrap();
        assert_eq!(metric.signature_at(&p).unwrap(), (vec![1, -1], vec![1]));
        let inv = metric.inverse(&p).unwrap();
        assert!((inv[(1, 1)] + 0.5).abs() < 1e-15);
        let singular = DMetric::new(2, 1, sym(2, 1, &["1", "1", "1", "1"]), sym(2, 1, &["3"])).unwrap();
        assert!(matches!(singular.inverse(&p), Err(Error::SingularMetric(_))));
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        assert!(NConnection::new(2, 2, sym(2, 2, &["1"])).is_err());
        assert!(DMetric::new(2, 2, sym(2, 2, &["1"]), sym(2, 2, &["1", "0", "0", "1"])).is_err());
    }
}

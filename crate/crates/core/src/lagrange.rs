//! Canonical geometry induced by a regular Lagrangian L(x, y) on a tangent
//! bundle (n = m): Hessian metric, semi-spray, N-connection, Sasaki metric and
//! the Christoffel-type d-connection.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::caputo::{l1_from_samples, CaputoConfig, FractionalOrder};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::expr::{parse, Coord, Expression};
use crate::field::{ArrayField, DiffContext};
use crate::geometry::{frame_derivatives, DConnection, DMetric, GeometryData, NConnection};
use crate::point::Point;

pub const DEFAULT_REGULARITY_TOL: f64 = 1e-10;

/// Relative tolerance of the 2-homogeneity test.
pub const HOMOGENEITY_TOL: f64 = 1e-8;

/// Fewest trajectory samples accepted by [`LagrangeModel::euler_lagrange_residual`].
pub const MIN_TRAJECTORY_SAMPLES: usize = 16;

#[derive(Debug, Clone)]
pub struct Hessian {
    pub point: Point,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub det: f64,
}

/// Evaluates the symmetrized Hessian field at `p` and inverts it.
fn hessian_at(field: &ArrayField, n: usize, tol: f64, p: &Point) -> Result<Hessian> {
    let g = DMatrix::from_row_slice(n, n, &field.eval(p)?);
    let lu = g.clone().lu();
    let det = lu.determinant();
    if !(det.abs() > tol) {
        return Err(Error::DegenerateHessian {
            det,
            point: p.to_string(),
        });
    }
    let g_inv = lu.try_inverse().ok_or_else(|| Error::DegenerateHessian {
        det,
        point: p.to_string(),
    })?;
    Ok(Hessian {
        point: p.clone(),
        g,
        g_inv,
        det,
    })
}

/// Nested partial ∂_second(∂_first f). Partials along different slots
/// commute, so the order with the fewest quadrature layers is used.
fn mixed_partial(f: &ArrayField, first: usize, second: usize, ctx: &DiffContext) -> ArrayField {
    let a = f.partial(first, ctx);
    if first == second {
        return a.partial(second, ctx);
    }
    let b = f.partial(second, ctx);
    let mut fallback = None;
    for (inner, outer) in [(&a, second), (&b, first)] {
        if inner.expressions().is_some() {
            let d = inner.partial(outer, ctx);
            if d.expressions().is_some() {
                return d;
            }
            fallback.get_or_insert(d);
        }
    }
    fallback.unwrap_or_else(|| a.partial(second, ctx))
}

#[derive(Debug, Clone)]
pub struct RegularityReport {
    pub dets: Vec<f64>,
    pub conditions: Vec<f64>,
    pub min_abs_det: f64,
    pub max_condition: f64,
    /// Sample indices where the Hessian is degenerate or not computable.
    pub failures: Vec<usize>,
}

impl RegularityReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// G^k(x, y); integrating D^α x = y, D^α y = −2G gives the nonlinear geodesics.
#[derive(Debug, Clone)]
pub struct SemiSpray {
    field: ArrayField,
}

impl SemiSpray {
    pub fn field(&self) -> &ArrayField {
        &self.field
    }

    pub fn eval(&self, p: &Point) -> Result<Vec<f64>> {
        self.field.eval(p)
    }

    /// True when G vanishes identically by construction.
    pub fn is_zero(&self) -> bool {
        self.field
            .expressions()
            .is_some_and(|e| e.iter().all(|x| x.as_constant() == Some(0.0)))
    }
}

/// Euler–Lagrange residual ‖∂^α_τ(∂^α_y L) − ∂^α_x L‖∞ per sample.
#[derive(Debug, Clone)]
pub struct EulerLagrangeResidual {
    pub tau: Vec<f64>,
    pub residual: Vec<f64>,
}

impl EulerLagrangeResidual {
    pub fn max(&self) -> f64 {
        self.residual.iter().fold(0.0, |a, r| a.max(r.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct LagrangeModel {
    n: usize,
    lagrangian: Expression,
    ctx: DiffContext,
    regularity_tol: f64,
    hessian: ArrayField,
}

impl LagrangeModel {
    pub fn new(n: usize, source: &str, order: FractionalOrder, cfg: CaputoConfig) -> Result<Self> {
        LagrangeModel::from_expression(parse(source, n)?, order, cfg)
    }

    pub fn from_expression(lagrangian: Expression, order: FractionalOrder, cfg: CaputoConfig) -> Result<Self> {
        let n = lagrangian.h_dim();
        if n == 0 || lagrangian.v_dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "a Lagrangian needs n = m > 0, got ({}, {})",
                n,
                lagrangian.v_dim()
            )));
        }
        let ctx = DiffContext::new(order, cfg);
        let l = ArrayField::symbolic(vec![lagrangian.clone()], n, n);
        // second[i][j] = ∂_{y^i} ∂_{y^j} L
        let second: Vec<Vec<ArrayField>> = (0..n)
            .map(|i| (0..n).map(|j| l.partial(n + j, &ctx).partial(n + i, &ctx)).collect())
            .collect();
        let symbolic: Option<Vec<Expression>> = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                let a = second[i][j].expressions()?;
                let b = second[j][i].expressions()?;
                Some(a[0].plus(&b[0]).scaled(0.25))
            })
            .collect();
        let hessian = match symbolic {
            Some(entries) => ArrayField::symbolic(entries, n, n),
            None => {
                let second = Arc::new(second);
                ArrayField::numeric(n * n, n, n, move |p| {
                    let s = second
                        .iter()
                        .map(|row| row.iter().map(|f| Ok(f.eval(p)?[0])).collect::<Result<Vec<f64>>>())
                        .collect::<Result<Vec<_>>>()?;
                    Ok((0..n * n).map(|k| 0.25 * (s[k / n][k % n] + s[k % n][k / n])).collect())
                })
            }
        };
        Ok(LagrangeModel {
            n,
            lagrangian,
            ctx,
            regularity_tol: DEFAULT_REGULARITY_TOL,
            hessian,
        })
    }

    pub fn with_regularity_tol(mut self, tol: f64) -> Self {
        self.regularity_tol = tol;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> FractionalOrder {
        self.ctx.order
    }

    pub fn caputo(&self) -> CaputoConfig {
        self.ctx.cfg
    }

    pub fn ctx(&self) -> DiffContext {
        self.ctx
    }

    pub fn lagrangian(&self) -> &Expression {
        &self.lagrangian
    }

    pub fn regularity_tol(&self) -> f64 {
        self.regularity_tol
    }

    /// g_ij = ¼(∂^α_i ∂^α_j + ∂^α_j ∂^α_i) L over the fiber coordinates.
    pub fn hessian_field(&self) -> &ArrayField {
        &self.hessian
    }

    fn check_admissible(&self, p: &Point) -> Result<()> {
        if p.h_dim() != self.n || p.v_dim() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "model has n = {}, point has ({}, {})",
                self.n,
                p.h_dim(),
                p.v_dim()
            )));
        }
        if !self.ctx.is_classical() {
            if let Some(&c) = p.coords().iter().find(|&&c| c <= 0.0) {
                return Err(Error::NonPositiveAbscissa(c));
            }
        }
        Ok(())
    }

    pub fn fractional_hessian(&self, p: &Point) -> Result<Hessian> {
        self.check_admissible(p)?;
        hessian_at(&self.hessian, self.n, self.regularity_tol, p)
    }

    pub fn regularity_check(&self, sample: &[Point]) -> RegularityReport {
        let mut report = RegularityReport {
            dets: Vec::with_capacity(sample.len()),
            conditions: Vec::with_capacity(sample.len()),
            min_abs_det: f64::INFINITY,
            max_condition: 0.0,
            failures: Vec::new(),
        };
        for (k, p) in sample.iter().enumerate() {
            let g = self
                .check_admissible(p)
                .and_then(|_| self.hessian.eval(p))
                .map(|v| DMatrix::from_row_slice(self.n, self.n, &v));
            let Ok(g) = g else {
                report.dets.push(f64::NAN);
                report.conditions.push(f64::NAN);
                report.failures.push(k);
                continue;
            };
            let det = g.determinant();
            let sv = g.singular_values();
            let cond = sv.max() / sv.min();
            report.min_abs_det = report.min_abs_det.min(det.abs());
            report.max_condition = report.max_condition.max(cond);
            if !(det.abs() > self.regularity_tol) {
                report.failures.push(k);
            }
            report.dets.push(det);
            report.conditions.push(cond);
        }
        report
    }

    /// L(x, λy) = λ²L(x, y) at every sample and λ, and L > 0 for y ≠ 0.
    pub fn finsler_homogeneity_check(&self, sample: &[Point], lambdas: &[f64]) -> bool {
        let n = self.n;
        sample.iter().all(|p| {
            let Ok(base) = self.lagrangian.evaluate(p) else {
                return false;
            };
            if p.y().iter().any(|&v| v != 0.0) && base <= 0.0 {
                return false;
            }
            lambdas.iter().all(|&lam| {
                let mut coords = p.coords().to_vec();
                coords[n..].iter_mut().for_each(|v| *v *= lam);
                match self.lagrangian.eval_coords(&coords) {
                    Ok(v) => {
                        let expect = lam * lam * base;
                        (v - expect).abs() <= HOMOGENEITY_TOL * expect.abs().max(f64::MIN_POSITIVE)
                    }
                    Err(_) => false,
                }
            })
        })
    }

    /// G^k = ¼ g^{kj}( y^i ∂^α_{y^j}∂^α_{x^i} L − ∂^α_{x^j} L ).
    pub fn semi_spray(&self) -> SemiSpray {
        let n = self.n;
        let depends_on_x = (0..n).any(|i| self.lagrangian.depends_on(Coord::X(i)));
        if !depends_on_x {
            return SemiSpray {
                field: ArrayField::zeros(n, n, n),
            };
        }
        let ctx = self.ctx;
        let l = ArrayField::symbolic(vec![self.lagrangian.clone()], n, n);
        let dx: Vec<ArrayField> = (0..n).map(|i| l.partial(i, &ctx)).collect();
        // dyx[j][i] = ∂_{y^j} ∂_{x^i} L
        let dyx: Vec<Vec<ArrayField>> = (0..n)
            .map(|j| (0..n).map(|i| mixed_partial(&l, i, n + j, &ctx)).collect())
            .collect();
        let hessian = self.hessian.clone();
        let tol = self.regularity_tol;
        let field = ArrayField::numeric(n, n, n, move |p| {
            let h = hessian_at(&hessian, n, tol, p)?;
            let y = p.y();
            let mut bracket = vec![0.0; n];
            for j in 0..n {
                let mut b = -dx[j].eval(p)?[0];
                for i in 0..n {
                    b += y[i] * dyx[j][i].eval(p)?[0];
                }
                bracket[j] = b;
            }
            Ok((0..n)
                .map(|k| 0.25 * (0..n).map(|j| h.g_inv[(k, j)] * bracket[j]).sum::<f64>())
                .collect())
        });
        SemiSpray { field }
    }

    /// N^a_j = ∂^α_{y^j} G^a.
    pub fn canonical_n_connection(&self) -> NConnection {
        let n = self.n;
        let spray = self.semi_spray();
        let parts: Vec<ArrayField> = (0..n).map(|j| spray.field.partial(n + j, &self.ctx)).collect();
        let picks = (0..n).flat_map(|a| (0..n).map(move |j| (j, a))).collect();
        NConnection::new(n, n, ArrayField::gather(&parts, picks)).expect("n×n components")
    }

    /// Both blocks equal to the Hessian.
    pub fn sasaki_d_metric(&self) -> DMetric {
        DMetric::new(self.n, self.n, self.hessian.clone(), self.hessian.clone()).expect("n×n blocks")
    }

    /// L̂^i_jk = ½ g^{ir}(e_k g_jr + e_j g_kr − e_r g_jk),
    /// Ĉ^a_bc = ½ g^{ad}(e_c g_bd + e_b g_cd − e_d g_bc),
    /// with L̂^a_bk and Ĉ^i_jc given by the same numbers under i ↔ a.
    pub fn canonical_d_connection(&self) -> DConnection {
        self.canonical_d_connection_with(&self.canonical_n_connection())
    }

    fn canonical_d_connection_with(&self, nconn: &NConnection) -> DConnection {
        let n = self.n;
        let d = 2 * n;
        let hessian = self.hessian.clone();
        let grad = self.hessian.gradient(&self.ctx);
        let nfield = nconn.field().clone();
        let tol = self.regularity_tol;
        let gamma = ArrayField::numeric(d * d * d, n, n, move |p| {
            let h = hessian_at(&hessian, n, tol, p)?;
            let dg = grad.iter().map(|f| f.eval(p)).collect::<Result<Vec<_>>>()?;
            let nmat = DMatrix::from_row_slice(n, n, &nfield.eval(p)?);
            let eg = frame_derivatives(&dg, &nmat);
            let gi = &h.g_inv;
            let mut out = vec![0.0; d * d * d];
            let at = |t: usize, b: usize, c: usize| (t * d + b) * d + c;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let l: f64 = 0.5
                            * (0..n)
                                .map(|r| gi[(i, r)] * (eg[k][j * n + r] + eg[j][k * n + r] - eg[r][j * n + k]))
                                .sum::<f64>();
                        let c: f64 = 0.5
                            * (0..n)
                                .map(|r| {
                                    gi[(i, r)] * (eg[n + k][j * n + r] + eg[n + j][k * n + r] - eg[n + r][j * n + k])
                                })
                                .sum::<f64>();
                        out[at(i, j, k)] = l;
                        out[at(n + i, n + j, k)] = l;
                        out[at(i, j, n + k)] = c;
                        out[at(n + i, n + j, n + k)] = c;
                    }
                }
            }
            Ok(out)
        });
        DConnection::from_full(n, n, gamma)
    }

    /// Ĉ^a_bc at `p`, index `(a*n + b)*n + c`. Only fiber derivatives of
    /// the Hessian enter, so this stays defined where N is not.
    pub fn c_hat(&self, p: &Point) -> Result<Vec<f64>> {
        self.check_admissible(p)?;
        let n = self.n;
        let h = hessian_at(&self.hessian, n, self.regularity_tol, p)?;
        let dg = (0..n)
            .map(|c| self.hessian.partial(n + c, &self.ctx).eval(p))
            .collect::<Result<Vec<_>>>()?;
        let mut out = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    out[(a * n + b) * n + c] = 0.5
                        * (0..n)
                            .map(|d| h.g_inv[(a, d)] * (dg[c][b * n + d] + dg[b][c * n + d] - dg[d][b * n + c]))
                            .sum::<f64>();
                }
            }
        }
        Ok(out)
    }

    /// The canonical triple (Sasaki metric, N, d-connection).
    pub fn geometry(&self) -> GeometryData {
        let nconn = self.canonical_n_connection();
        let dconn = self.canonical_d_connection_with(&nconn);
        GeometryData::new(self.sasaki_d_metric(), nconn, dconn, self.ctx).expect("consistent dimensions")
    }

    /// Residual of ∂^α_τ(∂^α_{y^i} L) − ∂^α_{x^i} L = 0 along `traj`.
    ///
    /// At α = 1 the τ-derivative is a five-point central difference and only
    /// samples with two neighbours on each side are reported. Otherwise the L1
    /// scheme runs from the first sample, which must sit at τ = 0.
    pub fn euler_lagrange_residual(&self, traj: &Trajectory) -> Result<EulerLagrangeResidual> {
        let n = self.n;
        if traj.len() < MIN_TRAJECTORY_SAMPLES {
            return Err(Error::GridTooCoarse(traj.len()));
        }
        if traj.h_dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "trajectory dimension {} for a model with n = {n}",
                traj.h_dim()
            )));
        }
        let h = traj.step()?;
        let l = ArrayField::symbolic(vec![self.lagrangian.clone()], n, n);
        let dy: Vec<ArrayField> = (0..n).map(|i| l.partial(n + i, &self.ctx)).collect();
        let dx: Vec<ArrayField> = (0..n).map(|i| l.partial(i, &self.ctx)).collect();
        let mut momenta = vec![vec![0.0; traj.len()]; n];
        let mut forces = vec![vec![0.0; traj.len()]; n];
        for k in 0..traj.len() {
            let p = traj.point(k);
            for i in 0..n {
                momenta[i][k] = dy[i].eval(&p)?[0];
                forces[i][k] = dx[i].eval(&p)?[0];
            }
        }
        let mut tau = Vec::new();
        let mut residual = Vec::new();
        if self.ctx.is_classical() {
            for k in 2..traj.len() - 2 {
                let r = (0..n)
                    .map(|i| {
                        let m = &momenta[i];
                        let dm = (m[k - 2] - 8.0 * m[k - 1] + 8.0 * m[k + 1] - m[k + 2]) / (12.0 * h);
                        (dm - forces[i][k]).abs()
                    })
                    .fold(0.0, f64::max);
                tau.push(traj.tau()[k]);
                residual.push(r);
            }
        } else {
            if traj.tau()[0] != 0.0 {
                return Err(Error::DimensionMismatch(
                    "fractional residual needs the trajectory to start at τ = 0".into(),
                ));
            }
            for k in 1..traj.len() {
                let r = (0..n)
                    .map(|i| (l1_from_samples(&momenta[i][..=k], h, self.ctx.order) - forces[i][k]).abs())
                    .fold(0.0, f64::max);
                tau.push(traj.tau()[k]);
                residual.push(r);
            }
        }
        Ok(EulerLagrangeResidual { tau, residual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classical(src: &str) -> LagrangeModel {
        LagrangeModel::new(2, src, FractionalOrder::one(), CaputoConfig::default()).unwrap()
    }

    fn half(src: &str) -> LagrangeModel {
        LagrangeModel::new(
            2,
            src,
            FractionalOrder::new(0.5).unwrap(),
            CaputoConfig::new(512).unwrap(),
        )
        .unwrap()
    }

    fn pt(x: [f64; 2], y: [f64; 2]) -> Point {
        Point::from_xy(&x, &y).unwrap()
    }

    #[test]
    fn flat_hessian_is_identity() {
        let h = classical("y1^2+y2^2")
            .fractional_hessian(&pt([0.3, 0.1], [2.0, -1.0]))
            .unwrap();
        assert_eq!(h.g, DMatrix::identity(2, 2));
        assert_eq!(h.g_inv, DMatrix::identity(2, 2));
    }

    #[test]
    fn fractional_hessian_of_quadratic() {
        // ∂^½(∂^½ y²) = 2y, so g = diag(y1, y2).
        let h = half("y1^2+y2^2")
            .fractional_hessian(&pt([0.3, 0.1], [1.0, 1.0]))
            .unwrap();
        assert!((h.g[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((h.g[(1, 1)] - 1.0).abs() < 1e-12);
        assert_eq!(h.g[(0, 1)], 0.0);
        let h = half("y1^2+y2^2")
            .fractional_hessian(&pt([0.3, 0.1], [2.0, 0.5]))
            .unwrap();
        assert!((h.g[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((h.g[(1, 1)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_hessian_is_reported() {
        let m = classical("y1^2");
        assert!(matches!(
            m.fractional_hessian(&pt([0.0, 0.0], [1.0, 1.0])),
            Err(Error::DegenerateHessian { .. })
        ));
        let rep = m.regularity_check(&[pt([0.0, 0.0], [1.0, 1.0])]);
        assert!(!rep.passed());
        assert_eq!(rep.min_abs_det, 0.0);
    }

    #[test]
    fn curved_regularity() {
        let m = classical("exp(x1)*(y1^2+y2^2)");
        let sample: Vec<Point> = (0..=4).map(|k| pt([k as f64 * 0.25, 0.0], [1.0, 0.5])).collect();
        let rep = m.regularity_check(&sample);
        assert!(rep.passed());
        assert!((rep.min_abs_det - 1.0).abs() < 1e-12);
        assert!((rep.max_condition - 1.0).abs() < 1e-12);
    }

    #[test]
    fn homogeneity() {
        let sample = [pt([0.1, 0.2], [1.0, 2.0]), pt([0.5, 0.0], [-0.3, 0.7])];
        let lambdas = [2.0, 3.0, 0.5];
        assert!(classical("y1^2+y2^2").finsler_homogeneity_check(&sample, &lambdas));
        assert!(classical("sqrt(y1^2+y2^2)^2").finsler_homogeneity_check(&sample, &lambdas));
        assert!(!classical("y1^2+y2^2+y1").finsler_homogeneity_check(&sample, &lambdas));
        assert!(!classical("-(y1^2+y2^2)").finsler_homogeneity_check(&sample, &lambdas));
    }

    #[test]
    fn curved_spray_and_n_connection() {
        let m = classical("exp(x1)*(y1^2+y2^2)");
        let spray = m.semi_spray();
        let g = spray.eval(&pt([0.4, -0.2], [1.0, 0.0])).unwrap();
        assert!((g[0] - 0.25).abs() < 1e-14 && g[1].abs() < 1e-14);
        let g = spray.eval(&pt([0.4, -0.2], [1.0, 1.0])).unwrap();
        assert!(g[0].abs() < 1e-14 && (g[1] - 0.5).abs() < 1e-14);

        let nc = m.canonical_n_connection();
        let nm = nc.matrix(&pt([0.4, -0.2], [1.0, 0.0])).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
        assert!((nm - expect).amax() < 1e-10);
        let nm = nc.matrix(&pt([0.4, -0.2], [0.0, 1.0])).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        assert!((nm - expect).amax() < 1e-10);
    }

    #[test]
    fn no_x_means_no_spray() {
        for m in [classical("y1^2+y2^2"), half("y1^2+y2^2+y1*y2")] {
            let s = m.semi_spray();
            assert!(s.is_zero());
            let nc = m.canonical_n_connection();
            assert!(nc.field().expressions().is_some());
        }
    }

    #[test]
    fn canonical_connection_of_conformal_model() {
        // L̂^1_11 = ½, L̂^1_22 = −½, L̂^2_12 = L̂^2_21 = ½ and Ĉ = 0.
        let m = classical("exp(x1)*(y1^2+y2^2)");
        let dc = m.canonical_d_connection();
        let g = dc.coefficients(&pt([0.7, 0.3], [0.4, -1.2])).unwrap();
        let at = |t: usize, b: usize, c: usize| g[(t * 4 + b) * 4 + c];
        assert!((at(0, 0, 0) - 0.5).abs() < 1e-10);
        assert!((at(0, 1, 1) + 0.5).abs() < 1e-10);
        assert!((at(1, 0, 1) - 0.5).abs() < 1e-10);
        assert!((at(1, 1, 0) - 0.5).abs() < 1e-10);
        assert!((at(2, 2, 0) - 0.5).abs() < 1e-10);
        assert!((0..4).all(|t| (0..4).all(|b| (2..4).all(|c| at(t, b, c).abs() < 1e-10))));
    }

    #[test]
    fn c_hat_is_symmetric() {
        let m = classical("(1+x1^2)*(y1^2+y2^2) + 0.1*y1^4");
        let g = m
            .canonical_d_connection()
            .coefficients(&pt([0.3, 0.2], [0.8, 0.5]))
            .unwrap();
        let at = |t: usize, b: usize, c: usize| g[(t * 4 + b) * 4 + c];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    assert!((at(2 + a, 2 + b, 2 + c) - at(2 + a, 2 + c, 2 + b)).abs() < 1e-14);
                }
            }
        }
        assert!(at(2, 2, 2).abs() > 1e-3);
        let c = m.c_hat(&pt([0.3, 0.2], [0.8, 0.5])).unwrap();
        for (k, v) in c.iter().enumerate() {
            let (a, b, cc) = (k / 4, (k / 2) % 2, k % 2);
            assert!((v - at(2 + a, 2 + b, 2 + cc)).abs() < 1e-12);
        }
    }

    #[test]
    fn fractional_c_hat_without_n() {
        // g_jj = e^{x1} y_j, so Ĉ^1_11 = ½ g^{11} ∂^½_{y1}(e^{x1} y1) = y1^{-1/2}/(2Γ(3/2)).
        let m = half("exp(x1)*(y1^2+y2^2)");
        let p = pt([0.4, 0.3], [0.7, 1.3]);
        let c = m.c_hat(&p).unwrap();
        let expect = 0.5 / (0.7f64.sqrt() * crate::gamma::gamma(1.5));
        assert!((c[0] - expect).abs() < 1e-12, "{} vs {expect}", c[0]);
        assert!(m.geometry().dconn.coefficients(&p).is_err());
    }

    #[test]
    fn straight_line_solves_free_motion() {
        let m = classical("y1^2+y2^2");
        let tau: Vec<f64> = (0..=40).map(|k| k as f64 * 0.025).collect();
        let states = tau.iter().map(|&t| vec![0.1 + 0.5 * t, 0.2 - t, 0.5, -1.0]).collect();
        let traj = Trajectory::new(2, tau.clone(), states).unwrap();
        assert!(m.euler_lagrange_residual(&traj).unwrap().max() < 1e-8);

        // x = 0.1·sin τ on top of the line: residual 2·(0.1 sin τ)″ is large.
        let states = tau
            .iter()
            .map(|&t| vec![0.1 + 0.5 * t + 0.1 * t.sin(), 0.2, 0.5 + 0.1 * t.cos(), 0.0])
            .collect();
        let traj = Trajectory::new(2, tau, states).unwrap();
        assert!(m.euler_lagrange_residual(&traj).unwrap().max() > 0.05);

        let short = Trajectory::new(2, vec![0.0; 3], vec![vec![0.0; 4]; 3]).unwrap();
        assert_eq!(m.euler_lagrange_residual(&short).unwrap_err(), Error::GridTooCoarse(3));
    }
}

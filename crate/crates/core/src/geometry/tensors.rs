use nalgebra::DMatrix;

use super::frame::{anholonomy_coefficients, field_frame_derivatives, Anholonomy};
use super::{idx3, idx4, DConnection, DMetric, NConnection};
use crate::error::Result;
use crate::field::DiffContext;
use crate::point::Point;

/// Torsion T^τ_{βγ} in the N-adapted frame.
#[derive(Debug, Clone)]
pub struct TorsionData {
    pub h_dim: usize,
    pub v_dim: usize,
    pub values: Vec<f64>,
}

impl TorsionData {
    pub fn dim(&self) -> usize {
        self.h_dim + self.v_dim
    }

    pub fn get(&self, t: usize, b: usize, g: usize) -> f64 {
        self.values[idx3(self.dim(), t, b, g)]
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }
}

/// Curvature R^τ_{βγδ}: the endomorphism R(e_γ, e_δ) applied to e_β.
#[derive(Debug, Clone)]
pub struct CurvatureData {
    pub h_dim: usize,
    pub v_dim: usize,
    pub values: Vec<f64>,
}

impl CurvatureData {
    pub fn dim(&self) -> usize {
        self.h_dim + self.v_dim
    }

    pub fn get(&self, t: usize, b: usize, g: usize, d: usize) -> f64 {
        self.values[idx4(self.dim(), t, b, g, d)]
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }
}

#[derive(Debug, Clone)]
pub struct RicciData {
    pub h_dim: usize,
    pub v_dim: usize,
    /// Full matrix with blocks R_ij, R_ia, R_ai, R_ab.
    pub values: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarCurvature {
    /// g^{ij} R_ij
    pub horizontal: f64,
    /// g^{ab} R_ab
    pub vertical: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct EinsteinData {
    pub h_dim: usize,
    pub v_dim: usize,
    pub values: DMatrix<f64>,
}

impl EinsteinData {
    /// g^{αβ} G_{αβ}; equals (1 − D/2)·sR for a block-diagonal metric.
    pub fn trace(&self, g_inv: &DMatrix<f64>) -> f64 {
        g_inv.component_mul(&self.values).sum()
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn torsion_coefficients(
    dconn: &DConnection,
    nconn: &NConnection,
    p: &Point,
    ctx: &DiffContext,
) -> Result<TorsionData> {
    let gamma = dconn.coefficients(p)?;
    let an = anholonomy_coefficients(nconn, p, ctx)?;
    Ok(torsion_from(&gamma, &an))
}

pub(crate) fn torsion_from(gamma: &[f64], an: &Anholonomy) -> TorsionData {
    let (n, m) = (an.h_dim, an.v_dim);
    let d = n + m;
    let mut values = vec![0.0; d * d * d];
    for t in 0..d {
        for b in 0..d {
            for g in 0..d {
                values[idx3(d, t, b, g)] = gamma[idx3(d, t, b, g)] - gamma[idx3(d, t, g, b)] + an.w[idx3(d, t, b, g)];
            }
        }
    }
    TorsionData {
        h_dim: n,
        v_dim: m,
        values,
    }
}

pub fn curvature_coefficients(
    dconn: &DConnection,
    nconn: &NConnection,
    p: &Point,
    ctx: &DiffContext,
) -> Result<CurvatureData> {
    let gamma = dconn.coefficients(p)?;
    let an = anholonomy_coefficients(nconn, p, ctx)?;
    curvature_from(dconn, nconn, p, ctx, &gamma, &an)
}

pub(crate) fn curvature_from(
    dconn: &DConnection,
    nconn: &NConnection,
    p: &Point,
    ctx: &DiffContext,
    gamma: &[f64],
    an: &Anholonomy,
) -> Result<CurvatureData> {
    let (n, m) = (dconn.h_dim(), dconn.v_dim());
    let d = n + m;
    let nmat = nconn.matrix(p)?;
    let e_gamma = field_frame_derivatives(dconn.field(), &nmat, p, ctx)?;
    let w = &an.w;
    let gm = |t: usize, b: usize, g: usize| gamma[idx3(d, t, b, g)];
    let mut values = vec![0.0; d * d * d * d];
    for t in 0..d {
        for b in 0..d {
            for g in 0..d {
                for dl in 0..d {
                    if g == dl {
                        continue;
                    }
                    let mut r = e_gamma[g][idx3(d, t, b, dl)] - e_gamma[dl][idx3(d, t, b, g)];
                    for e in 0..d {
                        r += gm(t, e, g) * gm(e, b, dl)
                            - gm(t, e, dl) * gm(e, b, g)
                            - w[idx3(d, e, g, dl)] * gm(t, b, e);
                    }
                    values[idx4(d, t, b, g, dl)] = r;
                }
            }
        }
    }
    Ok(CurvatureData {
        h_dim: n,
        v_dim: m,
        values,
    })
}

/// Ricci blocks R_ij = R^k_{ijk}, R_ia = −R^k_{ika}, R_ai = R^b_{aib},
/// R_ab = R^c_{abc}.
pub fn ricci_tensor(curv: &CurvatureData) -> RicciData {
    let (n, m) = (curv.h_dim, curv.v_dim);
    let mut r = DMatrix::zeros(n + m, n + m);
    for i in 0..n {
        for j in 0..n {
            r[(i, j)] = (0..n).map(|k| curv.get(k, i, j, k)).sum();
        }
        for a in 0..m {
            r[(i, n + a)] = -(0..n).map(|k| curv.get(k, i, k, n + a)).sum::<f64>();
        }
    }
    for a in 0..m {
        for i in 0..n {
            r[(n + a, i)] = (0..m).map(|b| curv.get(n + b, n + a, i, n + b)).sum();
        }
        for b in 0..m {
            r[(n + a, n + b)] = (0..m).map(|c| curv.get(n + c, n + a, n + b, n + c)).sum();
        }
    }
    RicciData {
        h_dim: n,
        v_dim: m,
        values: r,
    }
}

pub fn scalar_curvature(metric: &DMetric, ricci: &RicciData, p: &Point) -> Result<ScalarCurvature> {
    let n = metric.h_dim();
    let g_inv = metric.inverse(p)?;
    let d = g_inv.nrows();
    let mut horizontal = 0.0;
    let mut vertical = 0.0;
    for i in 0..n {
        for j in 0..n {
            horizontal += g_inv[(i, j)] * ricci.values[(i, j)];
        }
    }
    for a in n..d {
        for b in n..d {
            vertical += g_inv[(a, b)] * ricci.values[(a, b)];
        }
    }
    Ok(ScalarCurvature {
        horizontal,
        vertical,
        total: horizontal + vertical,
    })
}

/// G_{αβ} = R_{αβ} − ½ g_{αβ} sR. The metric has no mixed block, so the
/// mixed blocks of G coincide with those of Ricci.
pub fn einstein_tensor(metric: &DMetric, ricci: &RicciData, scalar: f64, p: &Point) -> Result<EinsteinData> {
    let g = metric.full(p)?;
    Ok(EinsteinData {
        h_dim: ricci.h_dim,
        v_dim: ricci.v_dim,
        values: &ricci.values - g * (0.5 * scalar),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_with_dims;
    use crate::field::ArrayField;
    use crate::geometry::DConnectionBlocks;

    fn sym(src: &[&str]) -> ArrayField {
        ArrayField::symbolic(src.iter().map(|s| parse_with_dims(s, 2, 1).unwrap()).collect(), 2, 1)
    }

    fn zeros(k: usize) -> ArrayField {
        ArrayField::zeros(k, 2, 1)
    }

    // Levi-Civita connection of the round-sphere metric dθ² + sin²θ dφ² on the
    // h-block, trivial vertical data.
    fn sphere() -> (DMetric, NConnection, DConnection) {
        let metric = DMetric::new(2, 1, sym(&["1", "0", "0", "sin(x1)^2"]), sym(&["1"])).unwrap();
        let l_h = sym(&[
            "0",
            "0",
            "0",
            "-sin(x1)*cos(x1)", // Γ^θ
            "0",
            "cos(x1)/sin(x1)",
            "cos(x1)/sin(x1)",
            "0", // Γ^φ
        ]);
        let dc = DConnection::from_blocks(
            2,
            1,
            DConnectionBlocks {
                l_h,
                l_v: zeros(2),
                c_h: zeros(4),
                c_v: zeros(1),
            },
        )
        .unwrap();
        (metric, NConnection::zero(2, 1), dc)
    }

    #[test]
    fn round_sphere_curvature() {
        let (metric, nc, dc) = sphere();
        let ctx = DiffContext::classical();
        let p = Point::new(2, 1, vec![0.9, 0.3, 0.5]).unwrap();
        let curv = curvature_coefficients(&dc, &nc, &p, &ctx).unwrap();
        let s2 = 0.9f64.sin().powi(2);
        // R^θ_{φθφ} = sin²θ
        assert!((curv.get(0, 1, 0, 1) - s2).abs() < 1e-12);
        assert!((curv.get(0, 1, 1, 0) + s2).abs() < 1e-12);
        // R_ij = R^k_{ijk} contracts the last slot, so the round sphere
        // comes out with Ricci −g and sR = −2 in this convention.
        let ric = ricci_tensor(&curv);
        assert!((ric.values[(0, 0)] + 1.0).abs() < 1e-12);
        assert!((ric.values[(1, 1)] + s2).abs() < 1e-12);
        let sr = scalar_curvature(&metric, &ric, &p).unwrap();
        assert!((sr.horizontal + 2.0).abs() < 1e-12);
        assert_eq!(sr.vertical, 0.0);
        let ein = einstein_tensor(&metric, &ric, sr.total, &p).unwrap();
        assert!(ein.values[(0, 0)].abs() < 1e-12);
        assert!((ein.values[(2, 2)] - 1.0).abs() < 1e-12);
        let tr = ein.trace(&metric.inverse(&p).unwrap());
        assert!((tr - (1.0 - 1.5) * sr.total).abs() < 1e-12);
        let tors = torsion_coefficients(&dc, &nc, &p, &ctx).unwrap();
        assert!(tors.max_abs() < 1e-15);
    }

    #[test]
    fn curvature_is_antisymmetric_in_last_pair() {
        let (_, nc, dc) = sphere();
        let p = Point::new(2, 1, vec![1.2, 0.1, 0.5]).unwrap();
        let curv = curvature_coefficients(&dc, &nc, &p, &DiffContext::classical()).unwrap();
        for t in 0..3 {
            for b in 0..3 {
                for g in 0..3 {
                    for d in 0..3 {
                        assert!((curv.get(t, b, g, d) + curv.get(t, b, d, g)).abs() < 1e-14);
                    }
                }
            }
        }
    }
}

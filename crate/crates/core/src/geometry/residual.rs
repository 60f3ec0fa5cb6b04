use nalgebra::DMatrix;

use super::frame::frame_derivatives;
use super::tensors::torsion_coefficients;
use super::{block_diag, idx3, GeometryData};
use crate::error::{Error, Result};
use crate::point::Point;

/// Max over the sample of |D_γ g_{αβ}| in the N-adapted frame:
/// e_γ g_{αβ} − Γ^τ_{αγ} g_{τβ} − Γ^τ_{βγ} g_{ατ}.
pub fn metric_compatibility_residual(data: &GeometryData, sample: &[Point]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::DimensionMismatch("empty sample".into()));
    }
    let (n, m) = (data.h_dim(), data.v_dim());
    let d = n + m;
    let dh = data.metric.h_field().gradient(&data.ctx);
    let dv = data.metric.v_field().gradient(&data.ctx);
    let mut worst: f64 = 0.0;
    for p in sample {
        data.check_admissible(p)?;
        let g = data.metric.full(p)?;
        let gamma = data.dconn.coefficients(p)?;
        let partials = (0..d)
            .map(|s| {
                let h = DMatrix::from_row_slice(n, n, &dh[s].eval(p)?);
                let v = DMatrix::from_row_slice(m, m, &dv[s].eval(p)?);
                Ok(block_diag(&h, &v).as_slice().to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        let eg = frame_derivatives(&partials, &data.nconn.matrix(p)?);
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    // Column-major storage; g is symmetric so (a, b) ↔ (b, a) is harmless.
                    let mut r = eg[c][a + b * d];
                    for t in 0..d {
                        r -= gamma[idx3(d, t, a, c)] * g[(t, b)] + gamma[idx3(d, t, b, c)] * g[(a, t)];
                    }
                    worst = worst.max(r.abs());
                }
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureResidual {
    /// max |de^τ − e^β∧Γ^τ_β + T^τ| over coordinate pairs
    pub max_abs: f64,
    /// max |T^τ| in coordinate components, for scale
    pub torsion_scale: f64,
}

/// Checks de^τ − e^β∧Γ^τ_β = −T^τ on every coordinate pair (μ, ν).
///
/// The exterior derivative of the coframe e^a = dy^a + N^a_j dx^j is taken
/// from coordinate partials of N directly, independently of the frame
/// machinery behind [`torsion_coefficients`].
pub fn structure_equation_residual(data: &GeometryData, p: &Point) -> Result<StructureResidual> {
    data.check_admissible(p)?;
    let (n, m) = (data.h_dim(), data.v_dim());
    let d = n + m;
    let nmat = data.nconn.matrix(p)?;
    let dn = data
        .nconn
        .field()
        .gradient(&data.ctx)
        .iter()
        .map(|f| f.eval(p))
        .collect::<Result<Vec<_>>>()?;
    let gamma = data.dconn.coefficients(p)?;
    let torsion = torsion_coefficients(&data.dconn, &data.nconn, p, &data.ctx)?;

    // Coframe e^τ = E^τ_μ du^μ.
    let mut e = DMatrix::<f64>::identity(d, d);
    for a in 0..m {
        for j in 0..n {
            e[(n + a, j)] = nmat[(a, j)];
        }
    }
    // de^τ on the pair (μ, ν).
    let de = |t: usize, mu: usize, nu: usize| -> f64 {
        if t < n {
            return 0.0;
        }
        let a = t - n;
        let part = |s: usize, j: usize| if j < n { dn[s][a * n + j] } else { 0.0 };
        part(mu, nu) - part(nu, mu)
    };
    // Γ^τ_β in coordinate components: Γ^τ_{βγ} E^γ_ν.
    let mut gc = vec![0.0; d * d * d];
    for t in 0..d {
        for b in 0..d {
            for nu in 0..d {
                gc[idx3(d, t, b, nu)] = (0..d).map(|g| gamma[idx3(d, t, b, g)] * e[(g, nu)]).sum();
            }
        }
    }
    let mut max_abs: f64 = 0.0;
    let mut torsion_scale: f64 = 0.0;
    for t in 0..d {
        for mu in 0..d {
            for nu in 0..d {
                let wedge: f64 = (0..d)
                    .map(|b| e[(b, mu)] * gc[idx3(d, t, b, nu)] - e[(b, nu)] * gc[idx3(d, t, b, mu)])
                    .sum();
                let lhs = de(t, mu, nu) - wedge;
                let mut tc = 0.0;
                for b in 0..d {
                    for g in 0..d {
                        tc += torsion.get(t, b, g) * e[(b, mu)] * e[(g, nu)];
                    }
                }
                max_abs = max_abs.max((lhs + tc).abs());
                torsion_scale = torsion_scale.max(tc.abs());
            }
        }
    }
    Ok(StructureResidual { max_abs, torsion_scale })
}

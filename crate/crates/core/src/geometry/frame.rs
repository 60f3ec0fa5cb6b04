use nalgebra::DMatrix;

use super::{idx3, NConnection};
use crate::error::{Error, Result};
use crate::field::{ArrayField, DiffContext};
use crate::point::Point;

/// Converts coordinate partials `partials[slot][c]` into N-adapted frame
/// derivatives: e_j = ∂_j − N^a_j ∂_a and e_b = ∂_b.
pub fn frame_derivatives(partials: &[Vec<f64>], nmat: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let (m, n) = nmat.shape();
    let mut out: Vec<Vec<f64>> = partials.to_vec();
    for j in 0..n {
        for (c, v) in out[j].iter_mut().enumerate() {
            for a in 0..m {
                *v -= nmat[(a, j)] * partials[n + a][c];
            }
        }
    }
    out
}

/// Frame derivatives of every component of `field` along every direction.
pub(crate) fn field_frame_derivatives(
    field: &ArrayField,
    nmat: &DMatrix<f64>,
    p: &Point,
    ctx: &DiffContext,
) -> Result<Vec<Vec<f64>>> {
    let partials = field
        .gradient(ctx)
        .iter()
        .map(|d| d.eval(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(frame_derivatives(&partials, nmat))
}

/// Applies the frame vector e_dir to a field at `p`.
pub fn n_adapted_frame_apply(
    nconn: &NConnection,
    field: &ArrayField,
    dir: usize,
    p: &Point,
    ctx: &DiffContext,
) -> Result<Vec<f64>> {
    let (n, m) = (nconn.h_dim(), nconn.v_dim());
    if dir >= n + m {
        return Err(Error::DimensionMismatch(format!(
            "frame direction {dir} outside dimension {}",
            n + m
        )));
    }
    let mut out = field.partial(dir, ctx).eval(p)?;
    if dir < n {
        let nmat = nconn.matrix(p)?;
        for a in 0..m {
            let coef = nmat[(a, dir)];
            if coef == 0.0 {
                continue;
            }
            let dv = field.partial(n + a, ctx).eval(p)?;
            for (o, d) in out.iter_mut().zip(dv) {
                *o -= coef * d;
            }
        }
    }
    Ok(out)
}

/// Nonholonomy of the N-adapted frame at a point.
#[derive(Debug, Clone)]
pub struct Anholonomy {
    pub h_dim: usize,
    pub v_dim: usize,
    /// Ω^a_ij = e_i N^a_j − e_j N^a_i, index `(a*n + i)*n + j`.
    pub omega: Vec<f64>,
    /// W^τ_{βγ} with [e_β, e_γ] = W^τ_{βγ} e_τ.
    pub w: Vec<f64>,
}

impl Anholonomy {
    pub fn omega(&self, a: usize, i: usize, j: usize) -> f64 {
        self.omega[(a * self.h_dim + i) * self.h_dim + j]
    }

    pub fn w(&self, t: usize, b: usize, g: usize) -> f64 {
        self.w[idx3(self.h_dim + self.v_dim, t, b, g)]
    }
}

pub fn anholonomy_coefficients(nconn: &NConnection, p: &Point, ctx: &DiffContext) -> Result<Anholonomy> {
    let (n, m) = (nconn.h_dim(), nconn.v_dim());
    let d = n + m;
    let nmat = nconn.matrix(p)?;
    let en = field_frame_derivatives(nconn.field(), &nmat, p, ctx)?;
    let mut omega = vec![0.0; m * n * n];
    let mut w = vec![0.0; d * d * d];
    for a in 0..m {
        for i in 0..n {
            for j in 0..n {
                let o = en[i][a * n + j] - en[j][a * n + i];
                omega[(a * n + i) * n + j] = o;
                w[idx3(d, n + a, i, j)] = -o;
            }
            for b in 0..m {
                let v = en[n + b][a * n + i];
                w[idx3(d, n + a, i, n + b)] = v;
                w[idx3(d, n + a, n + b, i)] = -v;
            }
        }
    }
    Ok(Anholonomy {
        h_dim: n,
        v_dim: m,
        omega,
        w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn nconn(src: &[&str]) -> NConnection {
        let e = src.iter().map(|s| parse(s, 2).unwrap()).collect();
        NConnection::new(2, 2, ArrayField::symbolic(e, 2, 2)).unwrap()
    }

    #[test]
    fn frame_apply_subtracts_vertical_part() {
        let nc = nconn(&["x2", "0", "0", "y1"]);
        let f = ArrayField::symbolic(vec![parse("x1*y1 + y2^2", 2).unwrap()], 2, 2);
        let p = Point::from_xy(&[0.5, 2.0], &[3.0, 4.0]).unwrap();
        let ctx = DiffContext::classical();
        // e_1 f = y1 − N^1_1 x1 − N^2_1 2y2 = 3 − 2·0.5 − 0
        let v = n_adapted_frame_apply(&nc, &f, 0, &p, &ctx).unwrap()[0];
        assert!((v - 2.0).abs() < 1e-14);
        // e_2 f = 0 − 0 − N^2_2·2y2 = −3·8
        let v = n_adapted_frame_apply(&nc, &f, 1, &p, &ctx).unwrap()[0];
        assert!((v + 24.0).abs() < 1e-14);
        let v = n_adapted_frame_apply(&nc, &f, 3, &p, &ctx).unwrap()[0];
        assert!((v - 8.0).abs() < 1e-14);
    }

    #[test]
    fn anholonomy_is_antisymmetric() {
        let nc = nconn(&["x2*y1", "x1^2", "sin(y2)", "x1*y2"]);
        let p = Point::from_xy(&[0.3, 0.7], &[1.1, -0.4]).unwrap();
        let an = anholonomy_coefficients(&nc, &p, &DiffContext::classical()).unwrap();
        for t in 0..4 {
            for b in 0..4 {
                for g in 0..4 {
                    assert!((an.w(t, b, g) + an.w(t, g, b)).abs() < 1e-14);
                }
            }
        }
        assert!(an.omega(0, 0, 1).abs() > 1e-3);
    }

    #[test]
    fn integrable_linear_splitting() {
        // Ω^1_12 = N^1_2 − N^2_1 and Ω^2_12 = N^1_1 + N^2_2, both zero here.
        let nc = nconn(&["y1", "y2", "y2", "-y1"]);
        let p = Point::from_xy(&[0.3, 0.7], &[1.1, -0.4]).unwrap();
        let an = anholonomy_coefficients(&nc, &p, &DiffContext::classical()).unwrap();
        assert!(an.omega.iter().all(|v| v.abs() < 1e-14));
    }
}

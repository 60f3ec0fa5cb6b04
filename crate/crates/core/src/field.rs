//! Array-valued fields on the total space and their partial derivatives.
//!
//! A field is either a table of expressions, whose partials stay symbolic
//! whenever a closed form exists, or an opaque function of the point. Partials
//! of opaque fields are numeric: a five-point central stencil at α = 1 and
//! the L1 scheme along the coordinate line from the terminal 0 otherwise.
//! Nesting partials of opaque fields therefore nests the numeric rules.

use std::fmt;
use std::sync::Arc;

use crate::caputo::{l1_from_vector_samples, stencil_step, CaputoConfig, FractionalOrder};
use crate::error::{Error, Result};
use crate::expr::{Coord, Expression};
use crate::point::Point;

pub type FieldFn = dyn Fn(&Point) -> Result<Vec<f64>> + Send + Sync;

/// The differentiation rule in force: order α and quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffContext {
    pub order: FractionalOrder,
    pub cfg: CaputoConfig,
}

impl DiffContext {
    pub fn new(order: FractionalOrder, cfg: CaputoConfig) -> Self {
        DiffContext { order, cfg }
    }

    pub fn classical() -> Self {
        DiffContext::new(FractionalOrder::one(), CaputoConfig::default())
    }

    pub fn is_classical(&self) -> bool {
        self.order.is_classical()
    }

    /// Numeric partial ∂^α along `slot` of a vector-valued function.
    pub fn numeric_partial(&self, f: &FieldFn, len: usize, slot: usize, p: &Point) -> Result<Vec<f64>> {
        let x = p.coord(slot);
        if self.order.is_classical() {
            let h = stencil_step(x);
            let at = |t: f64| f(&p.with_coord(slot, t));
            let (m2, m1, p1, p2) = (at(x - 2.0 * h)?, at(x - h)?, at(x + h)?, at(x + 2.0 * h)?);
            return Ok((0..len)
                .map(|c| (m2[c] - 8.0 * m1[c] + 8.0 * p1[c] - p2[c]) / (12.0 * h))
                .collect());
        }
        if x == 0.0 {
            // Empty integration interval.
            return Ok(vec![0.0; len]);
        }
        if x < 0.0 {
            return Err(Error::NonPositiveAbscissa(x));
        }
        let n = self.cfg.grid_points();
        let h = x / n as f64;
        let mut q = p.clone();
        let mut samples = Vec::with_capacity(n + 1);
        for k in 0..=n {
            q.set_coord(slot, k as f64 * h);
            samples.push(f(&q)?);
        }
        Ok(l1_from_vector_samples(&samples, h, self.order))
    }
}

#[derive(Clone)]
enum Repr {
    Symbolic(Arc<Vec<Expression>>),
    Numeric(Arc<FieldFn>),
}

/// A field with `len` real components at every point.
#[derive(Clone)]
pub struct ArrayField {
    len: usize,
    h_dim: usize,
    v_dim: usize,
    repr: Repr,
}

impl fmt::Debug for ArrayField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Symbolic(e) => f
                .debug_struct("ArrayField")
                .field("entries", &e.iter().map(|x| x.to_string()).collect::<Vec<_>>())
                .finish(),
            Repr::Numeric(_) => write!(f, "ArrayField(numeric, {} components)", self.len),
        }
    }
}

impl ArrayField {
    pub fn symbolic(entries: Vec<Expression>, h_dim: usize, v_dim: usize) -> Self {
        ArrayField {
            len: entries.len(),
            h_dim,
            v_dim,
            repr: Repr::Symbolic(Arc::new(entries)),
        }
    }

    pub fn numeric<F>(len: usize, h_dim: usize, v_dim: usize, f: F) -> Self
    where
        F: Fn(&Point) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        ArrayField {
            len,
            h_dim,
            v_dim,
            repr: Repr::Numeric(Arc::new(f)),
        }
    }

    pub fn zeros(len: usize, h_dim: usize, v_dim: usize) -> Self {
        ArrayField::symbolic(vec![Expression::constant(0.0, h_dim, v_dim); len], h_dim, v_dim)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn h_dim(&self) -> usize {
        self.h_dim
    }

    pub fn v_dim(&self) -> usize {
        self.v_dim
    }

    pub fn expressions(&self) -> Option<&[Expression]> {
        match &self.repr {
            Repr::Symbolic(e) => Some(e),
            Repr::Numeric(_) => None,
        }
    }

    pub fn eval(&self, p: &Point) -> Result<Vec<f64>> {
        if p.h_dim() != self.h_dim || p.v_dim() != self.v_dim {
            return Err(Error::DimensionMismatch(format!(
                "field over ({}, {}) evaluated at a point of dimension ({}, {})",
                self.h_dim,
                self.v_dim,
                p.h_dim(),
                p.v_dim()
            )));
        }
        match &self.repr {
            Repr::Symbolic(e) => e.iter().map(|x| x.evaluate(p)).collect(),
            Repr::Numeric(f) => {
                let v = f(p)?;
                debug_assert_eq!(v.len(), self.len);
                Ok(v)
            }
        }
    }

    /// Partial ∂^α along coordinate `slot` as a new field.
    pub fn partial(&self, slot: usize, ctx: &DiffContext) -> ArrayField {
        let coord = Coord::from_slot(slot, self.h_dim);
        match &self.repr {
            Repr::Symbolic(entries) => {
                let derived: Vec<Option<Expression>> = entries
                    .iter()
                    .map(|e| e.caputo_partial_symbolic(coord, ctx.order))
                    .collect();
                if derived.iter().all(Option::is_some) {
                    return ArrayField::symbolic(
                        derived.into_iter().map(Option::unwrap).collect(),
                        self.h_dim,
                        self.v_dim,
                    );
                }
                // Mixed: closed forms where available, quadrature elsewhere.
                let rest: Vec<(usize, Expression)> = entries
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| derived[*k].is_none())
                    .map(|(k, e)| (k, e.clone()))
                    .collect();
                let rest_exprs: Vec<Expression> = rest.iter().map(|(_, e)| e.clone()).collect();
                let rest_len = rest_exprs.len();
                let rest_fn: Arc<FieldFn> =
                    Arc::new(move |p: &Point| rest_exprs.iter().map(|e| e.evaluate(p)).collect());
                let ctx = *ctx;
                let len = self.len;
                ArrayField::numeric(len, self.h_dim, self.v_dim, move |p| {
                    let mut out = vec![0.0; len];
                    for (k, d) in derived.iter().enumerate() {
                        if let Some(d) = d {
                            out[k] = d.evaluate(p)?;
                        }
                    }
                    let num = ctx.numeric_partial(&*rest_fn, rest_len, slot, p)?;
                    for ((k, _), v) in rest.iter().zip(num) {
                        out[*k] = v;
                    }
                    Ok(out)
                })
            }
            Repr::Numeric(f) => {
                let f = f.clone();
                let ctx = *ctx;
                let len = self.len;
                ArrayField::numeric(len, self.h_dim, self.v_dim, move |p| {
                    ctx.numeric_partial(&*f, len, slot, p)
                })
            }
        }
    }

    /// Output component k is component `picks[k].1` of `parts[picks[k].0]`.
    /// Stays symbolic when every part is.
    pub fn gather(parts: &[ArrayField], picks: Vec<(usize, usize)>) -> ArrayField {
        let (h_dim, v_dim) = (parts[0].h_dim, parts[0].v_dim);
        if let Some(exprs) = parts.iter().map(|f| f.expressions()).collect::<Option<Vec<_>>>() {
            let out = picks.iter().map(|&(f, c)| exprs[f][c].clone()).collect();
            return ArrayField::symbolic(out, h_dim, v_dim);
        }
        let parts = parts.to_vec();
        ArrayField::numeric(picks.len(), h_dim, v_dim, move |p| {
            let vals = parts.iter().map(|f| f.eval(p)).collect::<Result<Vec<_>>>()?;
            Ok(picks.iter().map(|&(f, c)| vals[f][c]).collect())
        })
    }

    /// Partials along every coordinate, in slot order.
    pub fn gradient(&self, ctx: &DiffContext) -> Vec<ArrayField> {
        (0..self.h_dim + self.v_dim).map(|s| self.partial(s, ctx)).collect()
    }
}

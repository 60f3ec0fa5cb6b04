//! Symbolic differentiation and the Caputo fast path.

use std::sync::Arc;

use super::{Coord, Expression, Func, Node};
use crate::caputo::{caputo_left, caputo_power_rule, power_rule_factor, CaputoConfig, FractionalOrder, PowerTerm};
use crate::error::Result;
use crate::point::Point;

type N = Arc<Node>;

fn num(v: f64) -> N {
    Arc::new(Node::Num(v))
}

fn is_num(n: &Node, v: f64) -> bool {
    matches!(n, Node::Num(x) if *x == v)
}

fn neg(a: N) -> N {
    match &*a {
        Node::Num(v) => num(-v),
        Node::Neg(inner) => inner.clone(),
        _ => Arc::new(Node::Neg(a)),
    }
}

fn add(a: N, b: N) -> N {
    match (&*a, &*b) {
        (Node::Num(x), Node::Num(y)) => num(x + y),
        _ if is_num(&a, 0.0) => b,
        _ if is_num(&b, 0.0) => a,
        _ => Arc::new(Node::Add(a, b)),
    }
}

fn sub(a: N, b: N) -> N {
    match (&*a, &*b) {
        (Node::Num(x), Node::Num(y)) => num(x - y),
        _ if is_num(&b, 0.0) => a,
        _ if is_num(&a, 0.0) => neg(b),
        _ => Arc::new(Node::Sub(a, b)),
    }
}

fn mul(a: N, b: N) -> N {
    match (&*a, &*b) {
        (Node::Num(x), Node::Num(y)) => num(x * y),
        _ if is_num(&a, 0.0) || is_num(&b, 0.0) => num(0.0),
        _ if is_num(&a, 1.0) => b,
        _ if is_num(&b, 1.0) => a,
        _ if is_num(&a, -1.0) => neg(b),
        _ if is_num(&b, -1.0) => neg(a),
        _ => Arc::new(Node::Mul(a, b)),
    }
}

fn div(a: N, b: N) -> N {
    match (&*a, &*b) {
        (Node::Num(x), Node::Num(y)) if *y != 0.0 => num(x / y),
        _ if is_num(&a, 0.0) => num(0.0),
        _ if is_num(&b, 1.0) => a,
        _ => Arc::new(Node::Div(a, b)),
    }
}

fn pow(a: N, p: f64) -> N {
    if p == 0.0 {
        return num(1.0);
    }
    if p == 1.0 {
        return a;
    }
    match &*a {
        Node::Num(v) if *v >= 0.0 || p == p.trunc() => num(v.powf(p)),
        _ => Arc::new(Node::Pow(a, p)),
    }
}

fn call(f: Func, a: N) -> N {
    Arc::new(Node::Call(f, a))
}

fn derive(node: &N, wrt: Coord) -> N {
    match &**node {
        Node::Num(_) => num(0.0),
        Node::Var(c) => num(if *c == wrt { 1.0 } else { 0.0 }),
        Node::Neg(a) => neg(derive(a, wrt)),
        Node::Add(a, b) => add(derive(a, wrt), derive(b, wrt)),
        Node::Sub(a, b) => sub(derive(a, wrt), derive(b, wrt)),
        Node::Mul(a, b) => add(mul(derive(a, wrt), b.clone()), mul(a.clone(), derive(b, wrt))),
        Node::Div(a, b) => {
            let da = derive(a, wrt);
            let db = derive(b, wrt);
            if is_num(&db, 0.0) {
                div(da, b.clone())
            } else {
                div(sub(mul(da, b.clone()), mul(a.clone(), db)), pow(b.clone(), 2.0))
            }
        }
        Node::Pow(a, p) => {
            let da = derive(a, wrt);
            mul(mul(num(*p), pow(a.clone(), p - 1.0)), da)
        }
        Node::Call(f, a) => {
            let da = derive(a, wrt);
            if is_num(&da, 0.0) {
                return num(0.0);
            }
            let outer = match f {
                Func::Exp => node.clone(),
                Func::Log => div(num(1.0), a.clone()),
                Func::Sin => call(Func::Cos, a.clone()),
                Func::Cos => neg(call(Func::Sin, a.clone())),
                Func::Sqrt => div(num(0.5), node.clone()),
            };
            mul(outer, da)
        }
    }
}

/// One monomial c·w^p of an expression viewed as a polynomial in w, with a
/// coefficient that may depend on the other coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyTerm {
    pub coefficient: Expression,
    pub exponent: f64,
}

// Terms as (coefficient node, exponent).
type Terms = Vec<(N, f64)>;

const MAX_EXPANDED_POWER: f64 = 12.0;

fn merge(mut terms: Terms) -> Terms {
    let mut out: Terms = Vec::new();
    terms.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    for (c, p) in terms {
        match out.last_mut() {
            Some(last) if last.1 == p => last.0 = add(last.0.clone(), c),
            _ => out.push((c, p)),
        }
    }
    out.retain(|(c, _)| !is_num(c, 0.0));
    out
}

fn product(a: &Terms, b: &Terms) -> Terms {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for (ca, pa) in a {
        for (cb, pb) in b {
            out.push((mul(ca.clone(), cb.clone()), pa + pb));
        }
    }
    merge(out)
}

fn poly(node: &N, wrt: Coord) -> Option<Terms> {
    if !super::node_depends_on(node, wrt) {
        return Some(vec![(node.clone(), 0.0)]);
    }
    match &**node {
        Node::Num(_) => unreachable!("literals never depend on a coordinate"),
        Node::Var(_) => Some(vec![(num(1.0), 1.0)]),
        Node::Neg(a) => Some(poly(a, wrt)?.into_iter().map(|(c, p)| (neg(c), p)).collect()),
        Node::Add(a, b) => {
            let mut t = poly(a, wrt)?;
            t.extend(poly(b, wrt)?);
            Some(merge(t))
        }
        Node::Sub(a, b) => {
            let mut t = poly(a, wrt)?;
            t.extend(poly(b, wrt)?.into_iter().map(|(c, p)| (neg(c), p)));
            Some(merge(t))
        }
        Node::Mul(a, b) => Some(product(&poly(a, wrt)?, &poly(b, wrt)?)),
        Node::Div(a, b) => {
            if super::node_depends_on(b, wrt) {
                return None;
            }
            Some(poly(a, wrt)?.into_iter().map(|(c, p)| (div(c, b.clone()), p)).collect())
        }
        Node::Pow(a, p) => {
            let base = poly(a, wrt)?;
            if base.len() == 1 {
                let (c, q) = &base[0];
                let e = q * p;
                if e < 0.0 {
                    return None;
                }
                return Some(vec![(pow(c.clone(), *p), e)]);
            }
            if *p >= 0.0 && *p == p.trunc() && *p <= MAX_EXPANDED_POWER {
                let mut acc: Terms = vec![(num(1.0), 0.0)];
                for _ in 0..(*p as usize) {
                    acc = product(&acc, &base);
                }
                return Some(acc);
            }
            None
        }
        Node::Call(..) => None,
    }
}

impl Expression {
    fn wrap(&self, node: N) -> Expression {
        Expression::from_node(node, self.h_dim, self.v_dim)
    }

    /// Sum with light constant folding.
    pub fn plus(&self, other: &Expression) -> Expression {
        self.wrap(add(self.root.clone(), other.root.clone()))
    }

    pub fn minus(&self, other: &Expression) -> Expression {
        self.wrap(sub(self.root.clone(), other.root.clone()))
    }

    pub fn times(&self, other: &Expression) -> Expression {
        self.wrap(mul(self.root.clone(), other.root.clone()))
    }

    pub fn scaled(&self, c: f64) -> Expression {
        self.wrap(mul(num(c), self.root.clone()))
    }

    /// Exact partial derivative with respect to `wrt`.
    pub fn integer_partial(&self, wrt: Coord) -> Expression {
        self.wrap(derive(&self.root, wrt))
    }

    /// Terms c_k·w^{p_k} when the expression is a finite sum of such terms
    /// with p_k ≥ 0 in the coordinate `wrt`; `None` otherwise.
    pub fn polynomial_terms(&self, wrt: Coord) -> Option<Vec<PolyTerm>> {
        poly(&self.root, wrt).map(|terms| {
            terms
                .into_iter()
                .map(|(c, p)| PolyTerm {
                    coefficient: self.wrap(c),
                    exponent: p,
                })
                .collect()
        })
    }

    /// Polynomial test with the extracted terms; empty terms when false.
    pub fn is_polynomial(&self, wrt: Coord) -> (bool, Vec<PolyTerm>) {
        match self.polynomial_terms(wrt) {
            Some(t) => (true, t),
            None => (false, Vec::new()),
        }
    }

    /// Caputo partial as a new expression, when one exists in closed form:
    /// always at order 1, and for polynomial-in-`wrt` expressions otherwise.
    pub fn caputo_partial_symbolic(&self, wrt: Coord, order: FractionalOrder) -> Option<Expression> {
        if order.is_classical() {
            return Some(self.integer_partial(wrt));
        }
        let terms = poly(&self.root, wrt)?;
        let alpha = order.value();
        let var = Arc::new(Node::Var(wrt));
        let mut acc = num(0.0);
        for (c, p) in terms {
            if p == 0.0 {
                continue;
            }
            let factor = power_rule_factor(p, order);
            let term = mul(mul(num(factor), c), pow(var.clone(), p - alpha));
            acc = add(acc, term);
        }
        Some(self.wrap(acc))
    }

    /// Caputo partial ∂^α along `wrt` at `p`, other coordinates frozen.
    pub fn caputo_partial(&self, wrt: Coord, order: FractionalOrder, p: &Point, cfg: &CaputoConfig) -> Result<f64> {
        if order.is_classical() {
            return self.integer_partial(wrt).evaluate(p);
        }
        let slot = wrt.slot(self.h_dim);
        if let Some(terms) = self.polynomial_terms(wrt) {
            let w = p.coord(slot);
            let mut acc = 0.0;
            for t in terms {
                if t.exponent == 0.0 {
                    continue;
                }
                let c = t.coefficient.evaluate(p)?;
                acc += caputo_power_rule(PowerTerm::new(c, t.exponent), order, w)?;
            }
            return Ok(acc);
        }
        let base = p.coords().to_vec();
        caputo_left(
            |t| {
                let mut coords = base.clone();
                coords[slot] = t;
                self.eval_coords(&coords)
            },
            order,
            p.coord(slot),
            cfg,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;
    use crate::error::Error;

    fn pt(x: [f64; 2], y: [f64; 2]) -> Point {
        Point::from_xy(&x, &y).unwrap()
    }

    #[test]
    fn integer_partial_examples() {
        let e = parse("y1^2+y2^2", 2).unwrap();
        let d = e.integer_partial(Coord::Y(0));
        assert_eq!(d.to_string(), "2*y1");
        let dd = d.integer_partial(Coord::Y(1));
        assert_eq!(dd.as_constant(), Some(0.0));

        let e = parse("exp(x1)*y1^2", 2).unwrap();
        let d = e.integer_partial(Coord::X(0));
        let p = pt([0.3, 0.1], [1.7, 0.2]);
        assert_eq!(d.evaluate(&p).unwrap(), e.evaluate(&p).unwrap());
    }

    #[test]
    fn polynomial_detection() {
        let e = parse("y1^2 + x1*y1", 2).unwrap();
        let (ok, terms) = e.is_polynomial(Coord::Y(0));
        assert!(ok);
        let p = pt([3.0, 1.0], [1.0, 1.0]);
        let got: Vec<(f64, f64)> = terms
            .iter()
            .map(|t| (t.coefficient.evaluate(&p).unwrap(), t.exponent))
            .collect();
        assert_eq!(got, vec![(3.0, 1.0), (1.0, 2.0)]);

        assert!(!parse("exp(y1)", 2).unwrap().is_polynomial(Coord::Y(0)).0);

        let e = parse("exp(x1)*y1^2", 2).unwrap();
        let (ok, terms) = e.is_polynomial(Coord::Y(0));
        assert!(ok);
        assert_eq!(terms.len(), 1);
        assert_eq!(terms[0].exponent, 2.0);
        assert_eq!(terms[0].coefficient.to_string(), "exp(x1)");

        // (y1 + 1)^3 expands; 1/y1 does not qualify.
        let e = parse("(y1+1)^3", 2).unwrap();
        assert_eq!(e.polynomial_terms(Coord::Y(0)).unwrap().len(), 4);
        assert!(parse("1/y1", 2).unwrap().polynomial_terms(Coord::Y(0)).is_none());
        assert!(parse("y1^-1", 2).unwrap().polynomial_terms(Coord::Y(0)).is_none());
        assert!(parse("sqrt(y1^2+y2^2)^2", 2)
            .unwrap()
            .polynomial_terms(Coord::Y(0))
            .is_none());
    }

    #[test]
    fn caputo_partial_examples() {
        let cfg = CaputoConfig::default();
        let half = FractionalOrder::new(0.5).unwrap();
        let e = parse("y1^2", 2).unwrap();
        let v = e
            .caputo_partial(Coord::Y(0), half, &pt([1.0, 1.0], [1.0, 1.0]), &cfg)
            .unwrap();
        assert!((v - 1.504_505_556_127_350_1).abs() < 1e-14);

        let seven = parse("7", 2).unwrap();
        for &a in &[0.2, 0.5, 1.0] {
            let o = FractionalOrder::new(a).unwrap();
            let v = seven
                .caputo_partial(Coord::Y(0), o, &pt([1.0, 1.0], [0.4, 1.0]), &cfg)
                .unwrap();
            assert_eq!(v, 0.0);
        }
        let v = seven
            .caputo_partial(Coord::Y(0), half, &pt([1.0, 1.0], [-2.0, 1.0]), &cfg)
            .unwrap();
        assert_eq!(v, 0.0);

        let v = e
            .caputo_partial(Coord::Y(0), FractionalOrder::one(), &pt([1.0, 1.0], [3.0, 1.0]), &cfg)
            .unwrap();
        assert_eq!(v, 6.0);
    }

    #[test]
    fn quadrature_fallback_and_errors() {
        let half = FractionalOrder::new(0.5).unwrap();
        let cfg = CaputoConfig::new(2048).unwrap();
        // exp is not polynomial, so this goes through the L1 scheme; compare
        // against the power-rule series of exp truncated at high degree.
        let e = parse("exp(y1)", 2).unwrap();
        let p = pt([1.0, 1.0], [0.8, 1.0]);
        let quad = e.caputo_partial(Coord::Y(0), half, &p, &cfg).unwrap();
        let mut series = 0.0;
        let mut fact = 1.0;
        for k in 1..30 {
            fact *= k as f64;
            series += caputo_power_rule(PowerTerm::new(1.0 / fact, k as f64), half, 0.8).unwrap();
        }
        assert!((quad - series).abs() / series < 1e-4);

        let bad = pt([1.0, 1.0], [0.0, 1.0]);
        assert_eq!(
            e.caputo_partial(Coord::Y(0), half, &bad, &cfg),
            Err(Error::NonPositiveAbscissa(0.0))
        );
    }

    #[test]
    fn symbolic_caputo_is_iterable() {
        let half = FractionalOrder::new(0.5).unwrap();
        let e = parse("y1^2", 2).unwrap();
        let once = e.caputo_partial_symbolic(Coord::Y(0), half).unwrap();
        let twice = once.caputo_partial_symbolic(Coord::Y(0), half).unwrap();
        // ∂^½∂^½ y² = Γ(3)/Γ(2) · y = 2y
        let p = pt([1.0, 1.0], [1.3, 1.0]);
        assert!((twice.evaluate(&p).unwrap() - 2.6).abs() < 1e-13);
    }
}

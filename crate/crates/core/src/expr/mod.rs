//! Scalar-field expressions in the coordinates (x¹..xⁿ, y¹..yᵐ).
//!
//! Expressions are immutable trees shared through `Arc`. The grammar is
//! closed under the symbolic rules in [`diff`], so every expression has an
//! exact integer-order derivative, and sums of monomials in one coordinate
//! also have an exact Caputo derivative along it.

mod diff;
mod parse;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::point::Point;

pub use diff::PolyTerm;
pub use parse::{parse, parse_with_dims};

/// A coordinate symbol, zero-based: `X(0)` prints as `x1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coord {
    X(usize),
    Y(usize),
}

impl Coord {
    /// Position of the coordinate inside a point with `h_dim` base coordinates.
    pub fn slot(self, h_dim: usize) -> usize {
        match self {
            Coord::X(i) => i,
            Coord::Y(a) => h_dim + a,
        }
    }

    /// Inverse of [`Coord::slot`].
    pub fn from_slot(slot: usize, h_dim: usize) -> Coord {
        if slot < h_dim {
            Coord::X(slot)
        } else {
            Coord::Y(slot - h_dim)
        }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coord::X(i) => write!(f, "x{}", i + 1),
            Coord::Y(a) => write!(f, "y{}", a + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(Coord),
    Neg(Arc<Node>),
    Add(Arc<Node>, Arc<Node>),
    Sub(Arc<Node>, Arc<Node>),
    Mul(Arc<Node>, Arc<Node>),
    Div(Arc<Node>, Arc<Node>),
    Pow(Arc<Node>, f64),
    Call(Func, Arc<Node>),
}

/// A parsed expression together with the dimensions it was declared over.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Arc<Node>,
    h_dim: usize,
    v_dim: usize,
}

impl Expression {
    pub(crate) fn from_node(root: Arc<Node>, h_dim: usize, v_dim: usize) -> Self {
        Expression { root, h_dim, v_dim }
    }

    pub fn constant(value: f64, h_dim: usize, v_dim: usize) -> Self {
        Expression::from_node(Arc::new(Node::Num(value)), h_dim, v_dim)
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn h_dim(&self) -> usize {
        self.h_dim
    }

    pub fn v_dim(&self) -> usize {
        self.v_dim
    }

    /// Numeric value if the tree is a literal.
    pub fn as_constant(&self) -> Option<f64> {
        match *self.root {
            Node::Num(v) => Some(v),
            _ => None,
        }
    }

    pub fn depends_on(&self, c: Coord) -> bool {
        node_depends_on(&self.root, c)
    }

    pub fn evaluate(&self, p: &Point) -> Result<f64> {
        if p.h_dim() != self.h_dim || p.v_dim() != self.v_dim {
            return Err(Error::DimensionMismatch(format!(
                "expression over ({}, {}) evaluated at a point of dimension ({}, {})",
                self.h_dim,
                self.v_dim,
                p.h_dim(),
                p.v_dim()
            )));
        }
        self.eval_coords(p.coords())
    }

    /// Evaluates against a raw coordinate slice laid out as (x, y).
    pub fn eval_coords(&self, coords: &[f64]) -> Result<f64> {
        let v = eval_node(&self.root, coords, self.h_dim)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::EvaluationDomain(format!("non-finite value {v} from `{self}`")))
        }
    }
}

fn node_depends_on(node: &Node, c: Coord) -> bool {
    match node {
        Node::Num(_) => false,
        Node::Var(v) => *v == c,
        Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => node_depends_on(a, c),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            node_depends_on(a, c) || node_depends_on(b, c)
        }
    }
}

fn eval_node(node: &Node, coords: &[f64], h_dim: usize) -> Result<f64> {
    Ok(match node {
        Node::Num(v) => *v,
        Node::Var(c) => coords[c.slot(h_dim)],
        Node::Neg(a) => -eval_node(a, coords, h_dim)?,
        Node::Add(a, b) => eval_node(a, coords, h_dim)? + eval_node(b, coords, h_dim)?,
        Node::Sub(a, b) => eval_node(a, coords, h_dim)? - eval_node(b, coords, h_dim)?,
        Node::Mul(a, b) => eval_node(a, coords, h_dim)? * eval_node(b, coords, h_dim)?,
        Node::Div(a, b) => {
            let den = eval_node(b, coords, h_dim)?;
            if den == 0.0 {
                return Err(Error::EvaluationDomain("division by zero".into()));
            }
            eval_node(a, coords, h_dim)? / den
        }
        Node::Pow(a, p) => {
            let base = eval_node(a, coords, h_dim)?;
            if *p == p.trunc() && p.abs() < 64.0 {
                if base == 0.0 && *p < 0.0 {
                    return Err(Error::EvaluationDomain("zero raised to a negative power".into()));
                }
                base.powi(*p as i32)
            } else {
                if base < 0.0 {
                    return Err(Error::EvaluationDomain(format!(
                        "negative base {base} raised to non-integer power {p}"
                    )));
                }
                if base == 0.0 && *p < 0.0 {
                    return Err(Error::EvaluationDomain("zero raised to a negative power".into()));
                }
                base.powf(*p)
            }
        }
        Node::Call(f, a) => {
            let arg = eval_node(a, coords, h_dim)?;
            match f {
                Func::Exp => arg.exp(),
                Func::Log => {
                    if arg <= 0.0 {
                        return Err(Error::EvaluationDomain(format!("log of non-positive {arg}")));
                    }
                    arg.ln()
                }
                Func::Sin => arg.sin(),
                Func::Cos => arg.cos(),
                Func::Sqrt => {
                    if arg < 0.0 {
                        return Err(Error::EvaluationDomain(format!("sqrt of negative {arg}")));
                    }
                    arg.sqrt()
                }
            }
        }
    })
}

// Precedence levels used by the printer.
fn precedence(node: &Node) -> u8 {
    match node {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(_) => 3,
        Node::Pow(..) => 4,
        Node::Num(v) if *v < 0.0 => 3,
        _ => 5,
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Node, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "(")?;
        write_node(f, child)?;
        write!(f, ")")
    } else {
        write_node(f, child)
    }
}

fn write_num(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v < 0.0 {
        write!(f, "-{}", -v)
    } else {
        write!(f, "{v}")
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, node: &Node) -> fmt::Result {
    match node {
        Node::Num(v) => write_num(f, *v),
        Node::Var(c) => write!(f, "{c}"),
        Node::Neg(a) => {
            write!(f, "-")?;
            write_child(f, a, precedence(a) < 3)
        }
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            let (op, level) = match node {
                Node::Add(..) => ("+", 1),
                Node::Sub(..) => ("-", 1),
                Node::Mul(..) => ("*", 2),
                _ => ("/", 2),
            };
            write_child(f, a, precedence(a) < level)?;
            write!(f, "{op}")?;
            // A negative literal on the right would read as a unary minus.
            let right_neg_literal = matches!(**b, Node::Num(v) if v < 0.0);
            write_child(f, b, precedence(b) <= level || right_neg_literal)
        }
        Node::Pow(a, p) => {
            write_child(f, a, precedence(a) < 5)?;
            write!(f, "^")?;
            write_num(f, *p)
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(f, a)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.root)
    }
}

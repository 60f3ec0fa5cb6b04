//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | base ('^' '-'? number)?
//! base   := number | ident | '(' expr ')' | func '(' expr ')'
//! ident  := ('x'|'y') digits
//! func   := 'exp' | 'log' | 'sin' | 'cos' | 'sqrt'
//! ```

use std::sync::Arc;

use super::{Coord, Expression, Func, Node};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let (start_line, start_col) = (line, col);
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = text
                .parse::<f64>()
                .map_err(|_| syntax(start_line, start_col, format!("malformed number `{text}`")))?;
            col += i - start;
            out.push(Token {
                tok: Tok::Num(value),
                line: start_line,
                column: start_col,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: start_line,
                column: start_col,
            });
        } else if "+-*/^()".contains(c) {
            i += 1;
            col += 1;
            out.push(Token {
                tok: Tok::Op(c),
                line: start_line,
                column: start_col,
            });
        } else {
            return Err(syntax(line, col, format!("unexpected character `{c}`")));
        }
    }
    out.push(Token {
        tok: Tok::End,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    h_dim: usize,
    v_dim: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek().tok == Tok::Op(op) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, op: char) -> Result<()> {
        let t = self.next();
        if t.tok == Tok::Op(op) {
            Ok(())
        } else {
            Err(syntax(
                t.line,
                t.column,
                format!("expected `{op}`, found {}", describe(&t.tok)),
            ))
        }
    }

    fn expr(&mut self) -> Result<Arc<Node>> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Arc::new(Node::Add(lhs, self.term()?));
            } else if self.eat('-') {
                lhs = Arc::new(Node::Sub(lhs, self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Arc<Node>> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat('*') {
                lhs = Arc::new(Node::Mul(lhs, self.factor()?));
            } else if self.eat('/') {
                lhs = Arc::new(Node::Div(lhs, self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Arc<Node>> {
        if self.eat('-') {
            return Ok(Arc::new(Node::Neg(self.factor()?)));
        }
        let base = self.base()?;
        if self.eat('^') {
            let negative = self.eat('-');
            let t = self.next();
            let Tok::Num(p) = t.tok else {
                return Err(syntax(
                    t.line,
                    t.column,
                    format!("exponent must be a number, found {}", describe(&t.tok)),
                ));
            };
            return Ok(Arc::new(Node::Pow(base, if negative { -p } else { p })));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Arc<Node>> {
        let t = self.next();
        match t.tok {
            Tok::Num(v) => Ok(Arc::new(Node::Num(v))),
            Tok::Op('(') => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Arc::new(Node::Call(func, arg)));
                }
                Ok(Arc::new(Node::Var(self.coordinate(&name)?)))
            }
            other => Err(syntax(t.line, t.column, format!("unexpected {}", describe(&other)))),
        }
    }

    fn coordinate(&self, name: &str) -> Result<Coord> {
        let (kind, digits) = name.split_at(1);
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(Error::UnknownSymbol(name.to_string()));
        }
        let index: usize = digits.parse().map_err(|_| Error::UnknownSymbol(name.to_string()))?;
        if index == 0 {
            return Err(Error::UnknownSymbol(name.to_string()));
        }
        let (coord, dim) = match kind {
            "x" => (Coord::X(index - 1), self.h_dim),
            "y" => (Coord::Y(index - 1), self.v_dim),
            _ => return Err(Error::UnknownSymbol(name.to_string())),
        };
        if index > dim {
            return Err(Error::IndexOutOfRange {
                symbol: name.to_string(),
                dim,
            });
        }
        Ok(coord)
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Op(c) => format!("`{c}`"),
        Tok::End => "end of input".into(),
    }
}

/// Parses over a tangent bundle: x and y indices both run to `n`.
pub fn parse(source: &str, n: usize) -> Result<Expression> {
    parse_with_dims(source, n, n)
}

/// Parses with `h_dim` base and `v_dim` fiber coordinates.
pub fn parse_with_dims(source: &str, h_dim: usize, v_dim: usize) -> Result<Expression> {
    let mut p = Parser {
        tokens: tokenize(source)?,
        pos: 0,
        h_dim,
        v_dim,
    };
    let root = p.expr()?;
    let t = p.next();
    if t.tok != Tok::End {
        return Err(syntax(t.line, t.column, format!("trailing {}", describe(&t.tok))));
    }
    Ok(Expression::from_node(root, h_dim, v_dim))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_grammar_examples() {
        let e = parse("y1^2 + y2^2", 2).unwrap();
        match e.root() {
            Node::Add(a, b) => {
                assert!(matches!(**a, Node::Pow(_, p) if p == 2.0));
                assert!(matches!(**b, Node::Pow(_, p) if p == 2.0));
            }
            other => panic!("unexpected tree {other:?}"),
        }
        assert!(parse("exp(x1)*(y1^2 + y2^2)", 2).is_ok());
        assert!(parse("  sqrt( y1 ^ 2 )\n + 1.5e-3*x2", 2).is_ok());
    }

    #[test]
    fn rejects_bad_symbols_and_indices() {
        assert_eq!(
            parse("y3^2", 2),
            Err(Error::IndexOutOfRange {
                symbol: "y3".into(),
                dim: 2
            })
        );
        assert_eq!(parse("z1", 2), Err(Error::UnknownSymbol("z1".into())));
        assert_eq!(parse("tan(x1)", 2), Err(Error::UnknownSymbol("tan".into())));
        assert_eq!(parse("x0", 2), Err(Error::UnknownSymbol("x0".into())));
        assert!(parse_with_dims("y3", 2, 3).is_ok());
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse("x1 +\n  * y1", 2) {
            Err(Error::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("(x1", 2), Err(Error::Syntax { .. })));
        assert!(matches!(parse("x1^y1", 2), Err(Error::Syntax { .. })));
        assert!(matches!(parse("x1 x2", 2), Err(Error::Syntax { .. })));
        assert!(matches!(parse("x1 # 2", 2), Err(Error::Syntax { .. })));
    }
}

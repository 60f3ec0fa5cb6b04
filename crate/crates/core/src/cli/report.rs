//! JSON building blocks with a fixed float format.
//!
//! Every real is written with 17 significant digits in scientific notation,
//! so reports are byte-identical across runs. Non-finite values become null.

use std::str::FromStr;

use nalgebra::DMatrix;
use serde_json::{Map, Number, Value};

use crate::error::Result;

pub fn num(v: f64) -> Value {
    if !v.is_finite() {
        return Value::Null;
    }
    let v = if v == 0.0 { 0.0 } else { v };
    Value::Number(Number::from_str(&format!("{v:.16e}")).expect("valid JSON number"))
}

pub fn vector(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

pub fn matrix(m: &DMatrix<f64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|r| Value::Array((0..m.ncols()).map(|c| num(m[(r, c)])).collect()))
            .collect(),
    )
}

/// Nested arrays of shape `dims` over row-major `flat`.
pub fn tensor(flat: &[f64], dims: &[usize]) -> Value {
    match dims {
        [] => num(flat[0]),
        [_] => vector(flat),
        [first, rest @ ..] => {
            let stride: usize = rest.iter().product();
            Value::Array(
                (0..*first)
                    .map(|k| tensor(&flat[k * stride..(k + 1) * stride], rest))
                    .collect(),
            )
        }
    }
}

/// A number, or `{"error": message}` when the computation failed.
pub fn outcome(r: &Result<f64>) -> Value {
    match r {
        Ok(v) => num(*v),
        Err(e) => object([("error", Value::String(e.to_string()))]),
    }
}

pub fn object<const N: usize>(fields: [(&str, Value); N]) -> Value {
    let mut m = Map::new();
    for (k, v) in fields {
        m.insert(k.to_string(), v);
    }
    Value::Object(m)
}

use std::fmt;

use crate::error::{Error, Result};

/// A point u = (x¹..xⁿ, y¹..yᵐ) of the total space.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    h_dim: usize,
    v_dim: usize,
    coords: Vec<f64>,
}

impl Point {
    pub fn new(h_dim: usize, v_dim: usize, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != h_dim + v_dim {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, expected {} + {}",
                coords.len(),
                h_dim,
                v_dim
            )));
        }
        Ok(Point { h_dim, v_dim, coords })
    }

    /// Tangent-bundle point with fiber dimension equal to the base dimension.
    pub fn from_xy(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "x has {} entries, y has {}",
                x.len(),
                y.len()
            )));
        }
        let mut coords = x.to_vec();
        coords.extend_from_slice(y);
        Point::new(x.len(), y.len(), coords)
    }

    pub fn h_dim(&self) -> usize {
        self.h_dim
    }

    pub fn v_dim(&self) -> usize {
        self.v_dim
    }

    pub fn dim(&self) -> usize {
        self.h_dim + self.v_dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn x(&self) -> &[f64] {
        &self.coords[..self.h_dim]
    }

    pub fn y(&self) -> &[f64] {
        &self.coords[self.h_dim..]
    }

    pub fn coord(&self, k: usize) -> f64 {
        self.coords[k]
    }

    /// Copy with coordinate `k` replaced.
    pub fn with_coord(&self, k: usize, value: f64) -> Point {
        let mut q = self.clone();
        q.coords[k] = value;
        q
    }

    pub fn set_coord(&mut self, k: usize, value: f64) {
        self.coords[k] = value;
    }

    /// Every coordinate strictly positive.
    pub fn is_positive(&self) -> bool {
        self.coords.iter().all(|&c| c > 0.0)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.coords.iter().enumerate() {
            if k == self.h_dim {
                write!(f, "; ")?;
            } else if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

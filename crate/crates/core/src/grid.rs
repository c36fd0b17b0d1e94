use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::FieldParams;

/// Rectangular sampling grid. Points are `x₁ = x1_min + i·(x1_max − x1_min)/n1`,
/// `i = 0..n1`, so the upper edge is excluded and a unit square with `n = 2^m`
/// has dyadic spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
    pub x1_min: f64,
    pub x1_max: f64,
    pub x2_min: f64,
    pub x2_max: f64,
}

impl GridSpec {
    pub fn new(n1: usize, n2: usize, x1: (f64, f64), x2: (f64, f64)) -> Result<Self> {
        let g = Self {
            n1,
            n2,
            x1_min: x1.0,
            x1_max: x1.1,
            x2_min: x2.0,
            x2_max: x2.1,
        };
        g.validate()?;
        Ok(g)
    }

    /// `n × n` points on `[0, extent)²`.
    pub fn square(n: usize, extent: f64) -> Result<Self> {
        Self::new(n, n, (0.0, extent), (0.0, extent))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 < 2 || self.n2 < 2 {
            return Err(invalid("grid", "need at least 2 points per axis"));
        }
        for (name, lo, hi) in [("x1 extent", self.x1_min, self.x1_max), ("x2 extent", self.x2_min, self.x2_max)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid(name, format!("need finite min < max, got [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn spacing(&self) -> (f64, f64) {
        (
            (self.x1_max - self.x1_min) / self.n1 as f64,
            (self.x2_max - self.x2_min) / self.n2 as f64,
        )
    }

    pub fn x1(&self, i: usize) -> f64 {
        self.x1_min + i as f64 * self.spacing().0
    }

    pub fn x2(&self, j: usize) -> f64 {
        self.x2_min + j as f64 * self.spacing().1
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether both axes' grid points (and the origin) sit on the lattice `spacing·ℤ`.
    pub fn is_aligned(&self) -> bool {
        let (d1, d2) = self.spacing();
        let on = |x: f64, d: f64| {
            let r = x / d;
            (r - r.round()).abs() < 1e-9 * r.abs().max(1.0)
        };
        on(self.x1_min, d1) && on(self.x2_min, d2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cholesky,
    Spectral,
    /// Data not produced by a synthesis path (imported arrays, derived blocks).
    External,
}

impl Method {
    pub fn code(self) -> u8 {
        match self {
            Method::Cholesky => 0,
            Method::Spectral => 1,
            Method::External => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Method::Cholesky),
            1 => Some(Method::Spectral),
            2 => Some(Method::External),
            _ => None,
        }
    }
}

/// A sampled field: `values[[i, j]]` is the value at `(grid.x1(i), grid.x2(j))`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    pub values: Array2<f64>,
    pub grid: GridSpec,
    pub params: Option<FieldParams>,
    pub seed: u64,
    pub method: Method,
}

impl FieldRealization {
    pub fn external(grid: GridSpec, values: Array2<f64>) -> Result<Self> {
        grid.validate()?;
        if values.dim() != (grid.n1, grid.n2) {
            return Err(Error::ShapeMismatch(format!(
                "values are {:?}, grid is {}×{}",
                values.dim(),
                grid.n1,
                grid.n2
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("values", "must be finite"));
        }
        Ok(Self {
            values,
            grid,
            params: None,
            seed: 0,
            method: Method::External,
        })
    }

    /// Sample `f(x₁, x₂)` on the grid.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = Array2::from_shape_fn((grid.n1, grid.n2), |(i, j)| f(grid.x1(i), grid.x2(j)));
        Self::external(grid, values)
    }

    /// Same provenance, new values.
    pub fn with_values(&self, values: Array2<f64>) -> Self {
        Self {
            values,
            grid: self.grid,
            params: self.params,
            seed: self.seed,
            method: Method::External,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest |value| over grid points lying on a coordinate axis.
    pub fn axis_max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.grid.n1 {
            for j in 0..self.grid.n2 {
                if self.grid.x1(i) == 0.0 || self.grid.x2(j) == 0.0 {
                    m = m.max(self.values[[i, j]].abs());
                }
            }
        }
        m
    }
}

//! Uniform Cartesian discretization of an interval or rectangle with
//! homogeneous Dirichlet boundary.
//!
//! Interior nodes only are stored; the zero boundary values are implicit
//! ghosts. A `Grid` uses the same node count and side length on every axis,
//! with spacing `h = length / (n + 1)`. Node `i` along an axis sits at
//! `(i + 1) * h`, strictly inside `(0, length)`.
//!
//! 2D fields are row-major: index = ix * n + iy, with coordinates
//! x = (ix + 1) h, y = (iy + 1) h.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
}

impl Grid {
    /// Build a grid with `n` interior nodes per axis on a box of side `length`.
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Grid> {
        if dim != 1 && dim != 2 {
            return Err(Error::ParameterDomain(format!("dim must be 1 or 2, got {dim}")));
        }
        if n < 2 {
            return Err(Error::ParameterDomain(format!("n must be >= 2, got {n}")));
        }
        let length_ok = length.is_finite() && length > 0.0;
        if !length_ok {
            return Err(Error::ParameterDomain(format!("length must be > 0, got {length}")));
        }
        Ok(Grid { dim, n, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Interior nodes per axis.
    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn length_per_axis(&self) -> f64 {
        self.length
    }

    /// Mesh spacing, `length / (n + 1)`.
    pub fn spacing(&self) -> f64 {
        self.length / (self.n as f64 + 1.0)
    }

    /// Total number of interior nodes.
    pub fn node_count(&self) -> usize {
        match self.dim {
            1 => self.n,
            _ => self.n * self.n,
        }
    }

    /// Quadrature weight of one node / cell, `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        match self.dim {
            1 => h,
            _ => h * h,
        }
    }

    /// Coordinates of interior node `idx`; the second entry is 0 in 1D.
    pub fn node_coords(&self, idx: usize) -> [f64; 2] {
        let h = self.spacing();
        match self.dim {
            1 => [(idx as f64 + 1.0) * h, 0.0],
            _ => {
                let ix = idx / self.n;
                let iy = idx % self.n;
                [(ix as f64 + 1.0) * h, (iy as f64 + 1.0) * h]
            }
        }
    }
}

/// Nodal values of a function on the interior nodes of a grid.
///
/// Values are finite by construction; boundary values are implicitly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> ScalarField {
        ScalarField { grid, values: vec![0.0; grid.node_count()] }
    }

    /// Wrap raw nodal values, checking length and finiteness.
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != grid.node_count() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value {} at node {i}", values[i])));
        }
        Ok(ScalarField { grid, values })
    }

    /// Sample `f` at the interior node coordinates.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: Grid, f: F) -> Result<ScalarField> {
        let mut values = Vec::with_capacity(grid.node_count());
        for idx in 0..grid.node_count() {
            let c = grid.node_coords(idx);
            let v = f(&c[..grid.dim()]);
            if !v.is_finite() {
                return Err(Error::InvalidField(format!(
                    "f evaluated to {v} at node {idx} ({:?})",
                    &c[..grid.dim()]
                )));
            }
            values.push(v);
        }
        Ok(ScalarField { grid, values })
    }

    /// Deterministic pseudo-random field.
    ///
    /// Node `i` receives the `i`-th output of the SplitMix64 stream started
    /// at `seed` (see [`splitmix64_at`]), mapped to a real by fixed division:
    /// `positive` draws lie in (0, 1], signed draws in [-1, 1). Same seed,
    /// same grid: bit-identical values on every platform.
    pub fn random(grid: Grid, seed: u64, positive: bool) -> ScalarField {
        let values = (0..grid.node_count())
            .map(|i| {
                let bits = splitmix64_at(seed, i as u64) >> 11; // 53 random bits
                if positive {
                    (bits as f64 + 1.0) * (1.0 / 9007199254740992.0) // (0, 1]
                } else {
                    bits as f64 * (2.0 / 9007199254740992.0) - 1.0 // [-1, 1)
                }
            })
            .collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Euclidean inner product of nodal values (fixed summation order).
    pub fn dot(&self, other: &ScalarField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let mut acc = 0.0;
        for (a, b) in self.values.iter().zip(&other.values) {
            acc += a * b;
        }
        acc
    }

    /// Euclidean norm of nodal values.
    pub fn norm2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn mean(&self) -> f64 {
        let mut acc = 0.0;
        for v in &self.values {
            acc += v;
        }
        acc / self.values.len() as f64
    }

    pub fn scaled(&self, s: f64) -> ScalarField {
        ScalarField { grid: self.grid, values: self.values.iter().map(|v| s * v).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// `k`-th output of the SplitMix64 stream with the given seed.
///
/// Counter-based: state_k = seed + (k+1) * 0x9E3779B97F4A7C15 (wrapping),
/// finalized by the standard SplitMix64 mixer. Pure integer arithmetic, so
/// the stream is reproducible at bit level everywhere.
pub fn splitmix64_at(seed: u64, k: u64) -> u64 {
    let mut z = seed.wrapping_add(k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent stream seed from a base seed and a tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64_at(seed ^ 0xA5A5_A5A5_5A5A_5A5A, tag)
}

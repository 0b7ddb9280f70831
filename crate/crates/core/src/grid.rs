//! Uniform decision grid on `[0, 1]^d`.

use alloc::vec::Vec;

use crate::error::bail;
use crate::Result;

/// `resolution` points per axis including both endpoints, enumerated
/// lexicographically (first coordinate most significant).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionGrid {
    d: usize,
    resolution: usize,
}

impl DecisionGrid {
    pub fn new(d: usize, resolution: usize) -> Result<Self> {
        if d == 0 {
            bail!(Parameter, "dimension must be at least 1");
        }
        if resolution < 2 {
            bail!(Parameter, "grid_resolution must be at least 2, got {resolution}");
        }
        if resolution.checked_pow(d as u32).is_none_or(|n| n > 1 << 26) {
            bail!(Parameter, "decision grid of {resolution}^{d} points is too large");
        }
        Ok(Self { d, resolution })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.resolution.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coordinate(&self, k: usize) -> f64 {
        k as f64 / (self.resolution - 1) as f64
    }

    /// Writes point `index` into `out`.
    pub fn point_into(&self, index: usize, out: &mut [f64]) {
        let mut rest = index;
        for axis in (0..self.d).rev() {
            out[axis] = self.coordinate(rest % self.resolution);
            rest /= self.resolution;
        }
    }

    pub fn point(&self, index: usize) -> Vec<f64> {
        let mut p = alloc::vec![0.0; self.d];
        self.point_into(index, &mut p);
        p
    }

    /// All points, flattened row-major (`len() * d` values).
    pub fn flat_points(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.len() * self.d];
        for (i, chunk) in out.chunks_mut(self.d).enumerate() {
            self.point_into(i, chunk);
        }
        out
    }

    /// The grid point nearest the cube centre; ties go to the lower index.
    pub fn midpoint_index(&self) -> usize {
        let k = (self.resolution - 1) / 2;
        (0..self.d).fold(0, |acc, _| acc * self.resolution + k)
    }
}

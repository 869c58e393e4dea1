//! Uniform spatial grids and grid-sampled functions.

use crate::error::{CoreError, Result};

/// A uniform grid over an axis-aligned box in one or two dimensions.
/// Axis 0 is the fastest-varying index in the flat layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    mins: Vec<f64>,
    spacing: f64,
    counts: Vec<usize>,
}

impl SpatialGrid {
    pub fn new(mins: Vec<f64>, spacing: f64, counts: Vec<usize>) -> Result<Self> {
        let dim = mins.len();
        if dim == 0 || dim > 2 || counts.len() != dim {
            return Err(CoreError::InvalidParameter(format!(
                "grids support 1 or 2 axes, got {dim}/{}",
                counts.len()
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(CoreError::InvalidParameter(format!(
                "grid spacing must be positive, got {spacing}"
            )));
        }
        if counts.iter().any(|&c| c < 3) {
            return Err(CoreError::InvalidParameter(
                "each axis needs at least 3 nodes".into(),
            ));
        }
        Ok(Self {
            mins,
            spacing,
            counts,
        })
    }

    /// `[-half_width, half_width]^dim` with approximately the requested
    /// spacing (node count rounded so the box is covered symmetrically).
    pub fn symmetric(dim: usize, half_width: f64, spacing: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(CoreError::InvalidParameter(
                "half_width must be positive".into(),
            ));
        }
        let per_side = (half_width / spacing).round() as usize;
        let count = 2 * per_side + 1;
        let mins = vec![-(per_side as f64) * spacing; dim];
        Self::new(mins, spacing, vec![count; dim])
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.mins[axis] + i as f64 * self.spacing
    }

    pub fn axis_min(&self, axis: usize) -> f64 {
        self.mins[axis]
    }

    pub fn axis_max(&self, axis: usize) -> f64 {
        self.coord(axis, self.counts[axis] - 1)
    }

    /// Decode a flat index into per-axis indices.
    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        match self.dim() {
            1 => [flat, 0],
            _ => [flat % self.counts[0], flat / self.counts[0]],
        }
    }

    pub fn flat_index(&self, multi: [usize; 2]) -> usize {
        match self.dim() {
            1 => multi[0],
            _ => multi[0] + self.counts[0] * multi[1],
        }
    }

    /// Coordinates of a node by flat index.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        let multi = self.multi_index(flat);
        (0..self.dim()).map(|a| self.coord(a, multi[a])).collect()
    }

    /// Flat indices of nodes at least `margin` away from every boundary.
    pub fn interior_nodes(&self, margin: f64) -> Vec<usize> {
        let ok = |axis: usize, i: usize| {
            let x = self.coord(axis, i);
            x >= self.axis_min(axis) + margin - 1e-12 && x <= self.axis_max(axis) - margin + 1e-12
        };
        (0..self.len())
            .filter(|&flat| {
                let multi = self.multi_index(flat);
                (0..self.dim()).all(|a| ok(a, multi[a]))
            })
            .collect()
    }

    /// Sample a scalar function at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> GridFunction {
        let values = (0..self.len()).map(|i| f(&self.node(i))).collect();
        GridFunction {
            grid: self.clone(),
            values,
        }
    }

    /// Zero grid function.
    pub fn zeros(&self) -> GridFunction {
        GridFunction {
            grid: self.clone(),
            values: vec![0.0; self.len()],
        }
    }
}

/// Values attached to every node of a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CoreError::InvalidParameter(format!(
                "value count {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Sup-norm difference restricted to nodes at least `margin` from the
    /// boundary.
    pub fn sup_diff_interior(&self, other: &GridFunction, margin: f64) -> Result<f64> {
        if self.grid != other.grid {
            return Err(CoreError::Grid("grid mismatch in sup_diff".into()));
        }
        let idx = self.grid.interior_nodes(margin);
        if idx.is_empty() {
            return Err(CoreError::Coverage(
                "interior window is empty at this margin".into(),
            ));
        }
        Ok(idx
            .into_iter()
            .map(|i| (self.values[i] - other.values[i]).abs())
            .fold(0.0, f64::max))
    }
}

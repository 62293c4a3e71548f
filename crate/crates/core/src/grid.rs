//! Cell-centred finite-volume discretization of the unit box `[0,1]^N`
//! with homogeneous Neumann (zero-flux) boundaries.
//!
//! Cells are stored row-major: the last axis varies fastest. Boundary faces
//! carry no flux, which makes the discrete Laplacian exactly conservative and
//! symmetric negative semidefinite in the volume-weighted inner product.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniform Cartesian grid on the unit box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dimension: usize,
    cells_per_axis: Vec<usize>,
    spacings: Vec<f64>,
    cell_volume: f64,
    strides: Vec<usize>,
}

/// Cell values of one scalar quantity on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self {
            values: vec![value; grid.cell_count()],
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
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

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl From<Vec<f64>> for ScalarField {
    fn from(values: Vec<f64>) -> Self {
        Self::new(values)
    }
}

/// Builds a normalized grid; see [`Grid::new`].
pub fn build_grid(dimension: usize, cells_per_axis: &[usize]) -> Result<Grid> {
    Grid::new(dimension, cells_per_axis)
}

impl Grid {
    pub fn new(dimension: usize, cells_per_axis: &[usize]) -> Result<Self> {
        if !(1..=3).contains(&dimension) {
            return Err(Error::InvalidConfiguration(format!(
                "grid dimension must be 1, 2 or 3, got {dimension}"
            )));
        }
        if cells_per_axis.len() != dimension {
            return Err(Error::InvalidConfiguration(format!(
                "grid of dimension {dimension} needs {dimension} axis counts, got {}",
                cells_per_axis.len()
            )));
        }
        if let Some(n) = cells_per_axis.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidConfiguration(format!(
                "every axis needs at least 2 cells, got {n}"
            )));
        }
        let spacings: Vec<f64> = cells_per_axis.iter().map(|&n| 1.0 / n as f64).collect();
        let cell_volume = spacings.iter().product();
        let mut strides = vec![1; dimension];
        for axis in (0..dimension.saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * cells_per_axis[axis + 1];
        }
        Ok(Self {
            dimension,
            cells_per_axis: cells_per_axis.to_vec(),
            spacings,
            cell_volume,
            strides,
        })
    }

    /// Uniform grid with `n` cells along every axis.
    pub fn uniform(dimension: usize, n: usize) -> Result<Self> {
        Self::new(dimension, &vec![n; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells_per_axis
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_axis.iter().product()
    }

    /// Multi-index of a flat cell index.
    pub fn multi_index(&self, cell: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.cells_per_axis)
            .map(|(&s, &n)| (cell / s) % n)
            .collect()
    }

    /// Centre coordinates of a cell in `[0,1]^N`.
    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        self.multi_index(cell)
            .iter()
            .zip(&self.spacings)
            .map(|(&i, &h)| (i as f64 + 0.5) * h)
            .collect()
    }

    /// Interior faces as `(lower cell, upper cell, 1/h^2)` triples.
    pub fn faces(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dimension).flat_map(move |axis| {
            let stride = self.strides[axis];
            let n = self.cells_per_axis[axis];
            let inv_h2 = 1.0 / (self.spacings[axis] * self.spacings[axis]);
            (0..self.cell_count())
                .filter(move |&cell| (cell / stride) % n + 1 < n)
                .map(move |cell| (cell, cell + stride, inv_h2))
        })
    }

    pub fn check_field(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.cell_count() {
            return Err(Error::DimensionMismatch {
                expected: self.cell_count(),
                found: field.len(),
            });
        }
        Ok(())
    }

    /// Writes `Δ_h u` into `out`; both slices must match the grid.
    pub fn laplacian_into(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.cell_count());
        debug_assert_eq!(out.len(), self.cell_count());
        out.iter_mut().for_each(|v| *v = 0.0);
        for axis in 0..self.dimension {
            let stride = self.strides[axis];
            let n = self.cells_per_axis[axis];
            let inv_h2 = 1.0 / (self.spacings[axis] * self.spacings[axis]);
            for cell in 0..u.len() {
                if (cell / stride) % n + 1 < n {
                    let upper = cell + stride;
                    let flux = (u[upper] - u[cell]) * inv_h2;
                    out[cell] += flux;
                    out[upper] -= flux;
                }
            }
        }
    }

    pub fn laplacian_apply(&self, field: &ScalarField) -> Result<ScalarField> {
        self.check_field(field.values())?;
        let mut out = vec![0.0; self.cell_count()];
        self.laplacian_into(field.values(), &mut out);
        Ok(ScalarField::new(out))
    }

    pub fn integrate(&self, field: &ScalarField) -> Result<f64> {
        self.check_field(field.values())?;
        Ok(self.integrate_slice(field.values()))
    }

    pub(crate) fn integrate_slice(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.cell_volume
    }

    /// Volume-weighted inner product.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * self.cell_volume
    }

    /// Spatial `L^p` norm; `p = f64::INFINITY` gives the max norm.
    pub fn lp_norm(&self, field: &ScalarField, p: f64) -> Result<f64> {
        self.check_field(field.values())?;
        lp_norm_slice(self.cell_volume, field.values(), p)
    }
}

pub(crate) fn lp_norm_slice(cell_volume: f64, values: &[f64], p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "L^p exponent must lie in [1, inf], got {p}"
        )));
    }
    if p.is_infinite() {
        return Ok(values.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    // Scale by the max to avoid overflow for large p.
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = values.iter().map(|v| (v.abs() / scale).powf(p)).sum();
    Ok(scale * (sum * cell_volume).powf(1.0 / p))
}

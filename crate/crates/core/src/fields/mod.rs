//! Grids, nodal fields, masks, and the quadrature behind every integral in the crate.

mod grid;
pub mod io;

pub use grid::{ball_mask, interior_mask, DomainSpec, Grid, Mask, PriorBounds};

use serde::Serialize;

use crate::error::{Error, Result};

/// Nodal values on a [`Grid`], row-major, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::contract(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!(
                "non-finite field value {} at node {pos}",
                values[pos]
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        ScalarField::new(*grid, grid.sample(f))
    }

    pub fn constant(grid: &Grid, c: f64) -> Result<Self> {
        ScalarField::new(*grid, vec![c; grid.len()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        ScalarField::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_grid(other)?;
        ScalarField::new(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Composite trapezoid over the masked nodes.
pub fn integrate(f: &ScalarField, mask: &Mask) -> Result<f64> {
    if f.grid() != mask.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = f.grid();
    Ok(mask
        .indices()
        .map(|i| grid.cell_weight(i) * f.values[i])
        .sum())
}

/// Integral of `g(value)` over the mask without materialising a new field.
pub(crate) fn integrate_with(f: &ScalarField, mask: &Mask, g: impl Fn(f64) -> f64) -> f64 {
    let grid = f.grid();
    mask.indices()
        .map(|i| grid.cell_weight(i) * g(f.values[i]))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    /// Set when the mask selected no node; all norms are then zero.
    pub empty: bool,
}

pub fn norms(f: &ScalarField, mask: &Mask) -> Result<Norms> {
    if f.grid() != mask.grid() {
        return Err(Error::GridMismatch);
    }
    if mask.is_empty() {
        return Ok(Norms {
            l1: 0.0,
            l2: 0.0,
            linf: 0.0,
            empty: true,
        });
    }
    let l1 = integrate_with(f, mask, f64::abs);
    let l2 = integrate_with(f, mask, |v| v * v).sqrt();
    let linf = mask
        .indices()
        .fold(0.0_f64, |m, i| m.max(f.values[i].abs()));
    Ok(Norms {
        l1,
        l2,
        linf,
        empty: false,
    })
}

/// Boundary nodes in counter-clockwise order starting at the origin.
pub fn boundary_nodes(grid: &Grid) -> Vec<usize> {
    let (nx, ny) = (grid.nx, grid.ny);
    if grid.is_1d() {
        return vec![0, nx - 1];
    }
    let mut nodes = Vec::with_capacity(2 * (nx + ny) - 4);
    nodes.extend((0..nx).map(|i| grid.index(i, 0)));
    nodes.extend((1..ny).map(|j| grid.index(nx - 1, j)));
    nodes.extend((0..nx - 1).rev().map(|i| grid.index(i, ny - 1)));
    nodes.extend((1..ny - 1).rev().map(|j| grid.index(0, j)));
    nodes
}

/// Dirichlet data: values on every boundary node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    grid: Grid,
    entries: Vec<(usize, f64)>,
}

impl BoundaryTrace {
    pub fn from_fn(grid: &Grid, g: impl Fn(f64, f64) -> f64) -> Self {
        let entries = boundary_nodes(grid)
            .into_iter()
            .map(|idx| {
                let (x, y) = grid.coords(idx);
                (idx, g(x, y))
            })
            .collect();
        BoundaryTrace {
            grid: *grid,
            entries,
        }
    }

    pub fn zero(grid: &Grid) -> Self {
        BoundaryTrace::from_fn(grid, |_, _| 0.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|&(_, v)| v)
    }

    pub fn linf(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        BoundaryTrace {
            grid: self.grid,
            entries: self.entries.iter().map(|&(i, v)| (i, f(i, v))).collect(),
        }
    }

    /// Scatter the boundary values into a full-length node vector.
    pub fn write_into(&self, out: &mut [f64]) {
        for &(idx, v) in &self.entries {
            out[idx] = v;
        }
    }
}

pub fn boundary_trace(f: &ScalarField) -> BoundaryTrace {
    BoundaryTrace {
        grid: f.grid,
        entries: boundary_nodes(&f.grid)
            .into_iter()
            .map(|idx| (idx, f.values[idx]))
            .collect(),
    }
}

/// First derivative along one axis: central inside, second-order one-sided at the ends.
fn axis_derivative(v: impl Fn(usize) -> f64, k: usize, n: usize, h: f64) -> f64 {
    if k == 0 {
        (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
    } else if k == n - 1 {
        (3.0 * v(n - 1) - 4.0 * v(n - 2) + v(n - 3)) / (2.0 * h)
    } else {
        (v(k + 1) - v(k - 1)) / (2.0 * h)
    }
}

/// Nodal gradient squared |∇u|².
pub fn gradient_sq(u: &ScalarField) -> ScalarField {
    let g = *u.grid();
    let vals = u.values();
    let out = (0..g.len())
        .map(|idx| {
            let (i, j) = g.ij(idx);
            let ux = axis_derivative(|k| vals[g.index(k, j)], i, g.nx, g.h);
            if g.is_1d() {
                ux * ux
            } else {
                let uy = axis_derivative(|k| vals[g.index(i, k)], j, g.ny, g.h);
                ux * ux + uy * uy
            }
        })
        .collect();
    ScalarField {
        grid: g,
        values: out,
    }
}

/// ∫(u² + |∇u|²) over the whole domain.
pub fn energy(u: &ScalarField) -> f64 {
    let g = *u.grid();
    let grad = gradient_sq(u);
    (0..g.len())
        .map(|i| g.cell_weight(i) * (u.values[i] * u.values[i] + grad.values[i]))
        .sum()
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform tensor grid on `[0, lx] × [0, ly]`; `ny == 1` is an interval `[0, lx]`.
///
/// Nodes are stored row-major: node `(i, j)` lives at `j * nx + i` and sits at `(i h, j h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub h: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 3 {
            return Err(Error::contract(format!("grid needs nx >= 3, got {nx}")));
        }
        if !(lx.is_finite() && lx > 0.0) {
            return Err(Error::contract(format!(
                "side length lx = {lx} must be positive"
            )));
        }
        let h = lx / (nx - 1) as f64;
        if ny == 1 {
            return Ok(Grid {
                nx,
                ny,
                lx,
                ly: 0.0,
                h,
            });
        }
        if ny < 3 {
            return Err(Error::contract(format!("2D grid needs ny >= 3, got {ny}")));
        }
        if !(ly.is_finite() && ly > 0.0) {
            return Err(Error::contract(format!(
                "side length ly = {ly} must be positive"
            )));
        }
        let hy = ly / (ny - 1) as f64;
        if (h - hy).abs() > 1e-12 * h {
            return Err(Error::contract(format!(
                "anisotropic spacing: hx = {h}, hy = {hy}"
            )));
        }
        Ok(Grid { nx, ny, lx, ly, h })
    }

    pub fn interval(nx: usize, lx: f64) -> Result<Self> {
        Grid::new(nx, 1, lx, 0.0)
    }

    /// `n × n` nodes on the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Grid::new(n, n, 1.0, 1.0)
    }

    pub fn is_1d(&self) -> bool {
        self.ny == 1
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.ij(idx);
        (i as f64 * self.h, j as f64 * self.h)
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let (i, j) = self.ij(idx);
        let on_x = i == 0 || i == self.nx - 1;
        if self.is_1d() {
            on_x
        } else {
            on_x || j == 0 || j == self.ny - 1
        }
    }

    /// Distance from a point to the boundary of the rectangle (or interval).
    pub fn distance_to_boundary(&self, x: f64, y: f64) -> f64 {
        let dx = x.min(self.lx - x);
        if self.is_1d() {
            dx
        } else {
            dx.min(y).min(self.ly - y)
        }
    }

    /// Inradius: half the shortest side.
    pub fn inradius(&self) -> f64 {
        if self.is_1d() {
            0.5 * self.lx
        } else {
            0.5 * self.lx.min(self.ly)
        }
    }

    /// Measure of the tensor cell a node owns, clipped to the domain.
    pub fn cell_weight(&self, idx: usize) -> f64 {
        let (i, j) = self.ij(idx);
        let wx = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 } * self.h;
        if self.is_1d() {
            return wx;
        }
        let wy = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 } * self.h;
        wx * wy
    }

    /// Node values of a closed-form function.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                let (x, y) = self.coords(idx);
                f(x, y)
            })
            .collect()
    }

    pub fn interior_count(&self) -> usize {
        if self.is_1d() {
            self.nx - 2
        } else {
            (self.nx - 2) * (self.ny - 2)
        }
    }
}

/// Lipschitz-class description of the rectangle, recorded analytically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub lx: f64,
    pub ly: f64,
    pub rho: f64,
    pub m_lip: f64,
    pub measure: f64,
}

impl DomainSpec {
    pub fn new(grid: &Grid, rho: f64, m_lip: f64) -> Result<Self> {
        if m_lip < 1.0 {
            return Err(Error::contract(format!(
                "Lipschitz constant M = {m_lip} < 1"
            )));
        }
        if !(rho > 0.0 && rho <= grid.inradius() * (1.0 + 1e-12)) {
            return Err(Error::contract(format!(
                "chart size rho = {rho} must lie in (0, {}]",
                grid.inradius()
            )));
        }
        let measure = if grid.is_1d() {
            grid.lx
        } else {
            grid.lx * grid.ly
        };
        Ok(DomainSpec {
            lx: grid.lx,
            ly: grid.ly,
            rho,
            m_lip,
            measure,
        })
    }

    /// Largest admissible chart size with M = 1.
    pub fn for_grid(grid: &Grid) -> Self {
        DomainSpec::new(grid, grid.inradius(), 1.0).expect("inradius chart is always valid")
    }
}

/// The a-priori constants K, E, H and the interior margin d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorBounds {
    pub k: f64,
    pub e: f64,
    pub h: f64,
    pub d: f64,
}

impl PriorBounds {
    pub fn new(k: f64, e: f64, h: f64, d: f64) -> Result<Self> {
        if !(k >= 1.0 && e > 0.0 && h > 0.0 && d > 0.0) {
            return Err(Error::contract(format!(
                "bounds need K >= 1, E > 0, H > 0, d > 0 (got K={k}, E={e}, H={h}, d={d})"
            )));
        }
        // ∫qu² ≤ K∫u² ≤ K E²
        if h > e * k.sqrt() * (1.0 + 1e-12) {
            return Err(Error::contract(format!(
                "H = {h} exceeds E·sqrt(K) = {}",
                e * k.sqrt()
            )));
        }
        Ok(PriorBounds { k, e, h, d })
    }

    pub fn q_range(&self) -> (f64, f64) {
        (1.0 / self.k, self.k)
    }
}

/// Node subset of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    grid: Grid,
    nodes: Vec<bool>,
}

impl Mask {
    pub fn full(grid: &Grid) -> Self {
        Mask {
            grid: *grid,
            nodes: vec![true; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(usize) -> bool) -> Self {
        Mask {
            grid: *grid,
            nodes: (0..grid.len()).map(f).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn contains(&self, idx: usize) -> bool {
        self.nodes[idx]
    }

    pub fn count(&self) -> usize {
        self.nodes.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.nodes.iter().any(|&b| b)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn intersect(&self, other: &Mask) -> Result<Mask> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Mask {
            grid: self.grid,
            nodes: self
                .nodes
                .iter()
                .zip(&other.nodes)
                .map(|(a, b)| *a && *b)
                .collect(),
        })
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.grid == other.grid && self.nodes.iter().zip(&other.nodes).all(|(a, b)| !a || *b)
    }

    /// Quadrature measure of the masked region.
    pub fn measure(&self) -> f64 {
        self.indices().map(|i| self.grid.cell_weight(i)).sum()
    }
}

/// Nodes of Ω_d = {x : dist(x, ∂Ω) > d}. Too large a margin yields an empty mask.
pub fn interior_mask(grid: &Grid, d: f64) -> Result<Mask> {
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::contract(format!("margin d = {d} must be >= 0")));
    }
    let slack = 1e-10 * grid.h;
    Ok(Mask::from_fn(grid, |idx| {
        let (x, y) = grid.coords(idx);
        grid.distance_to_boundary(x, y) - d > slack
    }))
}

/// Node-centred ball {y : |y − x| < r}; an interval in 1D.
pub fn ball_mask(grid: &Grid, center: (f64, f64), r: f64) -> Mask {
    let slack = 1e-10 * grid.h;
    let (cx, cy) = center;
    Mask::from_fn(grid, |idx| {
        let (x, y) = grid.coords(idx);
        let dist = if grid.is_1d() {
            (x - cx).abs()
        } else {
            (x - cx).hypot(y - cy)
        };
        dist < r - slack
    })
}

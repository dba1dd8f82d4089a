//! Five-point (three-point in 1D) discretisation of Δu + qu = s with Dirichlet data.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{BoundaryTrace, Grid, PriorBounds, ScalarField};
use crate::linalg::{self, CsrMatrix};

/// Unknowns at most this large get a dense LU fallback.
pub const DENSE_FALLBACK_LIMIT: usize = 2500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual target: ‖A u − b‖∞ ≤ tol·‖b‖∞.
    pub tol: f64,
    pub max_iter: usize,
    /// NearSingular fires when the eigen gap drops below `gap_threshold·(max|q| + 4/h²)`.
    pub gap_threshold: f64,
    /// Always attach an eigen-gap estimate to the report (costs a few extra solves).
    pub report_gap: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 10_000,
            gap_threshold: 1e-6,
            report_gap: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveMethod {
    Minres,
    Dense,
    Trivial,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub u: ScalarField,
    pub residual_linf: f64,
    pub iterations: usize,
    pub eigen_gap_estimate: Option<f64>,
    pub method: SolveMethod,
    /// Zero data: the solver returned u ≡ 0 without iterating.
    pub degenerate: bool,
}

/// Interior-unknown matrix of the discrete Δ + q.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: Grid,
    q: ScalarField,
    matrix: CsrMatrix,
    /// Node index of each unknown.
    unknown_nodes: Vec<usize>,
    /// Unknown index of each node, `None` on the boundary.
    node_unknown: Vec<Option<usize>>,
}

impl DiscreteOperator {
    pub fn new(q: &ScalarField) -> Self {
        let grid = *q.grid();
        let inv_h2 = 1.0 / (grid.h * grid.h);
        let unknown_nodes: Vec<usize> = (0..grid.len()).filter(|&i| !grid.is_boundary(i)).collect();
        let mut node_unknown = vec![None; grid.len()];
        for (k, &idx) in unknown_nodes.iter().enumerate() {
            node_unknown[idx] = Some(k);
        }
        let centre = if grid.is_1d() { 2.0 } else { 4.0 };
        let rows = unknown_nodes
            .iter()
            .map(|&idx| {
                let mut row = vec![(
                    node_unknown[idx].unwrap(),
                    q.values()[idx] - centre * inv_h2,
                )];
                for nb in neighbours(&grid, idx) {
                    if let Some(c) = node_unknown[nb] {
                        row.push((c, inv_h2));
                    }
                }
                row
            })
            .collect();
        DiscreteOperator {
            grid,
            q: q.clone(),
            matrix: CsrMatrix::from_rows(rows),
            unknown_nodes,
            node_unknown,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn q(&self) -> &ScalarField {
        &self.q
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn unknowns(&self) -> usize {
        self.unknown_nodes.len()
    }

    pub fn unknown_nodes(&self) -> &[usize] {
        &self.unknown_nodes
    }

    /// Right-hand side for `Δu + qu = source` with `u = g` on the boundary.
    pub fn load(&self, g: &BoundaryTrace, source: Option<&[f64]>) -> Result<Vec<f64>> {
        if g.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let mut full = vec![0.0; self.grid.len()];
        g.write_into(&mut full);
        let inv_h2 = 1.0 / (self.grid.h * self.grid.h);
        Ok(self
            .unknown_nodes
            .iter()
            .map(|&idx| {
                let s = source.map_or(0.0, |s| s[idx]);
                let bdry: f64 = neighbours(&self.grid, idx)
                    .filter(|&nb| self.node_unknown[nb].is_none())
                    .map(|nb| full[nb])
                    .sum();
                s - bdry * inv_h2
            })
            .collect())
    }

    /// Interior values of a full nodal vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.unknown_nodes.iter().map(|&i| full[i]).collect()
    }

    /// Glue interior unknowns and boundary data into a nodal field.
    pub fn lift(&self, x: &[f64], g: &BoundaryTrace) -> Result<ScalarField> {
        let mut full = vec![0.0; self.grid.len()];
        g.write_into(&mut full);
        for (k, &idx) in self.unknown_nodes.iter().enumerate() {
            full[idx] = x[k];
        }
        ScalarField::new(self.grid, full)
    }

    fn gap_threshold(&self, opts: &SolverOptions) -> f64 {
        opts.gap_threshold * (self.q.max_abs() + 4.0 / (self.grid.h * self.grid.h))
    }

    /// Solve `A x = b`, optionally warm-started.
    pub fn solve(
        &self,
        b: &[f64],
        guess: Option<&[f64]>,
        g: &BoundaryTrace,
        opts: &SolverOptions,
    ) -> Result<SolveReport> {
        if !(opts.tol > 0.0) {
            return Err(Error::contract(format!(
                "solver tol {} must be positive",
                opts.tol
            )));
        }
        let n = self.unknowns();
        let b_inf = linalg::norm_inf(b);
        if b_inf == 0.0 {
            return Ok(SolveReport {
                u: self.lift(&vec![0.0; n], g)?,
                residual_linf: 0.0,
                iterations: 0,
                eigen_gap_estimate: None,
                method: SolveMethod::Trivial,
                degenerate: true,
            });
        }
        let target = opts.tol * b_inf;
        let mut x = guess.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
        let mut iterations = 0;
        let mut res_inf = f64::INFINITY;
        // recurrence estimates can drift from the true residual; restart a few times
        for _ in 0..4 {
            if iterations >= opts.max_iter {
                break;
            }
            let out = linalg::minres(&self.matrix, b, &x, target, opts.max_iter - iterations);
            iterations += out.iterations;
            x = out.x;
            res_inf = linalg::norm_inf(&linalg::residual(&self.matrix, &x, b));
            if res_inf <= target || !out.converged {
                break;
            }
        }
        let mut method = SolveMethod::Minres;
        if res_inf > target && n <= DENSE_FALLBACK_LIMIT {
            if let Some(xd) = linalg::dense_solve(&self.matrix, b) {
                let rd = linalg::norm_inf(&linalg::residual(&self.matrix, &xd, b));
                if rd < res_inf {
                    x = xd;
                    res_inf = rd;
                    method = SolveMethod::Dense;
                }
            }
        }
        let mut report = SolveReport {
            u: self.lift(&x, g)?,
            residual_linf: res_inf,
            iterations,
            eigen_gap_estimate: None,
            method,
            degenerate: false,
        };
        if res_inf <= target {
            if opts.report_gap {
                report.eigen_gap_estimate = Some(self.eigen_gap(opts).gap);
            }
            return Ok(report);
        }
        let gap = self.eigen_gap(opts).gap;
        report.eigen_gap_estimate = Some(gap);
        let threshold = self.gap_threshold(opts);
        if gap < threshold {
            Err(Error::NearSingular {
                gap,
                threshold,
                report: Box::new(report),
            })
        } else {
            Err(Error::SolverStagnation {
                residual: res_inf,
                iterations,
                report: Box::new(report),
            })
        }
    }

    /// Eigenvalue of Δ_h + q closest to zero, by inverse iteration.
    pub fn eigen_gap(&self, opts: &SolverOptions) -> GapEstimate {
        let n = self.unknowns();
        let a = &self.matrix;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        normalise(&mut x);
        let scale = a.gershgorin_radius().max(f64::MIN_POSITIVE);

        let dense_lu = (n <= DENSE_FALLBACK_LIMIT).then(|| a.to_dense().lu());
        let solve = |rhs: &[f64]| -> Vec<f64> {
            if let Some(lu) = &dense_lu {
                if let Some(sol) = lu.solve(&DVector::from_column_slice(rhs)) {
                    if sol.iter().all(|v| v.is_finite()) {
                        return sol.as_slice().to_vec();
                    }
                }
                // exactly singular factor: rhs is already (close to) a null vector
                return rhs.to_vec();
            }
            linalg::minres(a, rhs, &vec![0.0; n], 1e-12, opts.max_iter.min(5000)).x
        };

        let mut lambda = rayleigh(a, &x);
        let mut converged = false;
        let mut iterations = 0;
        while iterations < 200 {
            iterations += 1;
            let mut y = solve(&x);
            if !normalise(&mut y) {
                break;
            }
            let next = rayleigh(a, &y);
            let ay = a.matvec(&y);
            let resid = ay
                .iter()
                .zip(&y)
                .map(|(p, v)| (p - next * v).powi(2))
                .sum::<f64>()
                .sqrt();
            let settled = (next - lambda).abs() <= 1e-12 * scale;
            lambda = next;
            x = y;
            if resid <= 1e-9 * scale || settled {
                converged = true;
                break;
            }
        }
        GapEstimate {
            gap: lambda.abs(),
            eigenvalue: lambda,
            iterations,
            converged,
        }
    }
}

fn normalise(x: &mut [f64]) -> bool {
    let n = linalg::norm2(x);
    if !(n > 0.0 && n.is_finite()) {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= n);
    true
}

fn rayleigh(a: &CsrMatrix, x: &[f64]) -> f64 {
    linalg::dot(x, &a.matvec(x)) / linalg::dot(x, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapEstimate {
    /// min |λ| over the spectrum of the discrete Δ + q.
    pub gap: f64,
    /// The signed eigenvalue attaining the gap.
    pub eigenvalue: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn neighbours(grid: &Grid, idx: usize) -> impl Iterator<Item = usize> {
    let (i, j) = grid.ij(idx);
    let (nx, ny, one_d) = (grid.nx, grid.ny, grid.is_1d());
    let g = *grid;
    [
        (i > 0).then(|| g.index(i - 1, j)),
        (i + 1 < nx).then(|| g.index(i + 1, j)),
        (!one_d && j > 0).then(|| g.index(i, j - 1)),
        (!one_d && j + 1 < ny).then(|| g.index(i, j + 1)),
    ]
    .into_iter()
    .flatten()
}

/// Assembled system for Δu + qu = 0, u = g on ∂Ω.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub op: DiscreteOperator,
    pub load: Vec<f64>,
    /// Nodes where q leaves [1/K, K]; reported, not rejected.
    pub out_of_bounds: usize,
}

pub fn assemble(
    q: &ScalarField,
    g: &BoundaryTrace,
    bounds: Option<&PriorBounds>,
) -> Result<Assembly> {
    if g.grid() != q.grid() {
        return Err(Error::GridMismatch);
    }
    let op = DiscreteOperator::new(q);
    let load = op.load(g, None)?;
    let out_of_bounds = bounds.map_or(0, |b| count_out_of_bounds(q, b));
    Ok(Assembly {
        op,
        load,
        out_of_bounds,
    })
}

pub fn count_out_of_bounds(q: &ScalarField, bounds: &PriorBounds) -> usize {
    let (lo, hi) = bounds.q_range();
    let slack = 1e-12 * hi;
    q.values()
        .iter()
        .filter(|&&v| v < lo - slack || v > hi + slack)
        .count()
}

pub fn solve_dirichlet(
    q: &ScalarField,
    g: &BoundaryTrace,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    let asm = assemble(q, g, None)?;
    asm.op.solve(&asm.load, None, g, opts)
}

pub fn eigen_gap(q: &ScalarField, opts: &SolverOptions) -> GapEstimate {
    DiscreteOperator::new(q).eigen_gap(opts)
}

//! Recovery of q from F = qu² and u|∂Ω.
//!
//! The field u solves the semilinear problem Δu = −F/u, u = g on ∂Ω. Starting from the
//! harmonic extension of g, each step solves a Poisson problem with the previous iterate in
//! the denominator (clamped away from zero), then q̂ = F/û².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{self, interior_mask, BoundaryTrace, Mask, PriorBounds, ScalarField};
use crate::forward::{DiscreteOperator, SolverOptions};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Division floor; `None` means 1e−6·max(‖g‖∞, 1).
    pub tau: Option<f64>,
    pub solver: SolverOptions,
}

impl Default for ReconOptions {
    fn default() -> Self {
        ReconOptions {
            tol: 1e-10,
            max_iter: 200,
            tau: None,
            solver: SolverOptions::default(),
        }
    }
}

impl ReconOptions {
    pub fn tau_for(&self, g: &BoundaryTrace) -> f64 {
        self.tau.unwrap_or_else(|| 1e-6 * g.linf().max(1.0))
    }
}

/// sign(s)·max(|s|, τ), odd in s (including signed zeros).
#[inline]
pub fn clamp_signed(s: f64, tau: f64) -> f64 {
    s.signum() * s.abs().max(tau)
}

#[derive(Debug, Clone)]
pub struct FieldReconstruction {
    pub u_hat: ScalarField,
    pub iterations: usize,
    pub final_update_linf: f64,
    /// Nodes where the division floor was active in the last step.
    pub floor_hits: usize,
    pub converged: bool,
    /// Some iterate flipped sign on {F > 0}.
    pub sign_change: bool,
    /// ‖u^{k+1} − u^k‖∞ per step.
    pub updates: Vec<f64>,
}

pub fn reconstruct_u(
    f: &ScalarField,
    g: &BoundaryTrace,
    opts: &ReconOptions,
) -> Result<FieldReconstruction> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    if !(opts.tol > 0.0) {
        return Err(Error::contract(format!(
            "recon tol {} must be positive",
            opts.tol
        )));
    }
    let grid = *f.grid();
    let tau = opts.tau_for(g);
    // small negative data is measurement noise
    let data: Vec<f64> = f.values().iter().map(|v| v.max(0.0)).collect();

    let laplacian = DiscreteOperator::new(&ScalarField::constant(&grid, 0.0)?);
    let a = laplacian.matrix();
    let zero = vec![0.0; grid.len()];
    let b0 = laplacian.load(g, Some(&zero))?;
    let mut u = laplacian.solve(&b0, None, g, &opts.solver)?.u;

    let mut updates = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut sign_change = false;
    let mut floor_hits = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        floor_hits = 0;
        let source: Vec<f64> = data
            .iter()
            .zip(u.values())
            .map(|(&fv, &uv)| {
                if uv.abs() < tau {
                    floor_hits += 1;
                }
                -fv / clamp_signed(uv, tau)
            })
            .collect();
        // solve for the correction so the inner tolerance scales with the update
        let b = laplacian.load(g, Some(&source))?;
        let x = laplacian.restrict(u.values());
        let r = linalg::residual(a, &x, &b);
        let delta = laplacian
            .solve(&r, None, &BoundaryTrace::zero(&grid), &opts.solver)?
            .u;
        let next = u.zip_with(&delta, |a, b| a + b)?;

        let update = delta.max_abs();
        sign_change |= data
            .iter()
            .zip(u.values().iter().zip(next.values()))
            .any(|(&fv, (&old, &new))| fv > 0.0 && old.signum() != new.signum());
        updates.push(update);
        u = next;
        if update < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(FieldReconstruction {
        u_hat: u,
        iterations,
        final_update_linf: updates.last().copied().unwrap_or(0.0),
        floor_hits,
        converged,
        sign_change,
        updates,
    })
}

#[derive(Debug, Clone)]
pub struct CoefficientRecovery {
    pub q_hat: ScalarField,
    /// Nodes where the τ floor or the [1/K, K] projection fired.
    pub flagged: Mask,
    pub clamp_hits: usize,
    pub projection_hits: usize,
}

/// q̂ = F / max(û², τ²), projected onto [1/K, K].
pub fn recover_q(
    f: &ScalarField,
    u_hat: &ScalarField,
    bounds: &PriorBounds,
    tau: f64,
) -> Result<CoefficientRecovery> {
    f.same_grid(u_hat)?;
    let (lo, hi) = bounds.q_range();
    let tau2 = tau * tau;
    let n = f.grid().len();
    let mut flags = vec![false; n];
    let (mut clamp_hits, mut projection_hits) = (0, 0);
    let values = (0..n)
        .map(|i| {
            let u2 = u_hat.values()[i].powi(2);
            let clamped = u2 < tau2;
            let raw = f.values()[i] / u2.max(tau2);
            let projected = raw.clamp(lo, hi);
            let projection = projected != raw;
            clamp_hits += clamped as usize;
            projection_hits += projection as usize;
            flags[i] = clamped || projection;
            projected
        })
        .collect();
    Ok(CoefficientRecovery {
        q_hat: ScalarField::new(*f.grid(), values)?,
        flagged: Mask::from_fn(f.grid(), |i| flags[i]),
        clamp_hits,
        projection_hits,
    })
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub u_hat: ScalarField,
    pub q_hat: ScalarField,
    pub iterations: usize,
    pub final_update_linf: f64,
    pub floor_hits: usize,
    pub converged: bool,
    pub sign_change: bool,
    pub flagged: Mask,
}

/// Result summary written next to the reconstructed fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconManifest {
    pub iterations: usize,
    pub final_update_linf: f64,
    pub floor_hits: usize,
    pub converged: bool,
    pub sign_change: bool,
    pub flagged_nodes: usize,
}

impl ReconstructionResult {
    pub fn manifest(&self) -> ReconManifest {
        ReconManifest {
            iterations: self.iterations,
            final_update_linf: self.final_update_linf,
            floor_hits: self.floor_hits,
            converged: self.converged,
            sign_change: self.sign_change,
            flagged_nodes: self.flagged.count(),
        }
    }
}

pub fn reconstruct(
    f: &ScalarField,
    g: &BoundaryTrace,
    bounds: &PriorBounds,
    opts: &ReconOptions,
) -> Result<ReconstructionResult> {
    let field = reconstruct_u(f, g, opts)?;
    let coef = recover_q(f, &field.u_hat, bounds, opts.tau_for(g))?;
    Ok(ReconstructionResult {
        u_hat: field.u_hat,
        q_hat: coef.q_hat,
        iterations: field.iterations,
        final_update_linf: field.final_update_linf,
        floor_hits: field.floor_hits,
        converged: field.converged,
        sign_change: field.sign_change,
        flagged: coef.flagged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReconstructionError {
    pub l1_interior: f64,
    pub linf_interior: f64,
    /// Ω_d contained no node.
    pub empty: bool,
}

/// Norms of q̂ − q over Ω_d.
pub fn reconstruction_error(
    q_hat: &ScalarField,
    q_true: &ScalarField,
    d: f64,
) -> Result<ReconstructionError> {
    let diff = q_hat.zip_with(q_true, |a, b| a - b)?;
    let n = fields::norms(&diff, &interior_mask(q_hat.grid(), d)?)?;
    Ok(ReconstructionError {
        l1_interior: n.l1,
        linf_interior: n.linf,
        empty: n.empty,
    })
}

//! Amplitude × seed sweeps of synthetic pairs, Hölder fits and report files.

pub mod fit;
pub mod report;

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Config, FieldSpec};
use crate::diagnostics::{
    self, field_diagnostics, DiagnosticsConfig, DiagnosticsReport, DiagnosticsSummary,
    WeightedChecks,
};
use crate::error::{Error, Result};
use crate::fields::{self, interior_mask, BoundaryTrace, Grid, PriorBounds, ScalarField};
use crate::forward::{self, SolverOptions};
use crate::recon::{self, ReconOptions};
use crate::synth::{self, PairOptions, PerturbMode, PerturbShape, Provenance};

pub use fit::{abscissa, fit_holder, fit_two_point, HolderFit};
pub use report::{emit_report, render_svg, ReportFiles};

/// Every key a sweep config may contain.
pub const KNOWN_KEYS: &[&str] = &[
    "grid.n",
    "grid.nx",
    "grid.ny",
    "grid.lx",
    "grid.ly",
    "base.q",
    "bdry.g",
    "bdry.jitter",
    "bounds.k",
    "bounds.e",
    "bounds.h",
    "sweep.mode",
    "sweep.amplitudes",
    "sweep.seeds",
    "sweep.seed_base",
    "sweep.d",
    "sweep.bump_width",
    "sweep.bump_center",
    "sweep.trig_order",
    "sweep.reconstruct",
    "sweep.out",
    "solver.tol",
    "solver.max_iter",
    "solver.gap_threshold",
    "recon.tol",
    "recon.max_iter",
    "recon.tau",
    "diag.radii",
    "diag.centers",
    "diag.p",
    "diag.delta",
    "diag.t",
    "diag.floor",
    "diag.levels",
    "synth.amplitude",
    "synth.seed",
];

pub fn grid_from(cfg: &Config) -> Result<Grid> {
    let n = cfg.parse_or("grid.n", 65usize)?;
    let nx = cfg.parse_or("grid.nx", n)?;
    let ny = cfg.parse_or("grid.ny", n)?;
    let lx = cfg.parse_or("grid.lx", 1.0)?;
    if ny == 1 {
        Grid::interval(nx, lx)
    } else {
        let ly = cfg.parse_or("grid.ly", lx * (ny - 1) as f64 / (nx - 1) as f64)?;
        Grid::new(nx, ny, lx, ly)
    }
}

pub fn solver_from(cfg: &Config) -> Result<SolverOptions> {
    let d = SolverOptions::default();
    Ok(SolverOptions {
        tol: cfg.parse_or("solver.tol", d.tol)?,
        max_iter: cfg.parse_or("solver.max_iter", d.max_iter)?,
        gap_threshold: cfg.parse_or("solver.gap_threshold", d.gap_threshold)?,
        report_gap: false,
    })
}

pub fn recon_from(cfg: &Config) -> Result<ReconOptions> {
    let d = ReconOptions::default();
    Ok(ReconOptions {
        tol: cfg.parse_or("recon.tol", d.tol)?,
        max_iter: cfg.parse_or("recon.max_iter", d.max_iter)?,
        tau: cfg.parse_opt("recon.tau")?,
        solver: solver_from(cfg)?,
    })
}

/// Prior bounds; `d` is the interior margin recorded in the bounds.
pub fn bounds_from(cfg: &Config, d: f64) -> Result<PriorBounds> {
    PriorBounds::new(
        cfg.parse_or("bounds.k", 4.0)?,
        cfg.parse_or("bounds.e", 2.0)?,
        cfg.parse_or("bounds.h", 0.1)?,
        d,
    )
}

pub fn diagnostics_from(cfg: &Config) -> Result<DiagnosticsConfig> {
    let d = DiagnosticsConfig::default();
    Ok(DiagnosticsConfig {
        radii: cfg.list_or("diag.radii", &d.radii)?,
        centers_per_axis: cfg.parse_or("diag.centers", d.centers_per_axis)?,
        p_list: cfg.list_or("diag.p", &d.p_list)?,
        delta_list: cfg.list_or("diag.delta", &d.delta_list)?,
        d_list: cfg.list_or("sweep.d", &d.d_list)?,
        t_list: cfg.list_or("diag.t", &d.t_list)?,
        floor: cfg.parse_or("diag.floor", d.floor)?,
        levels: cfg.parse_or("diag.levels", d.levels)?,
    })
}

pub fn shape_from(cfg: &Config) -> Result<PerturbShape> {
    let center = match cfg.get("sweep.bump_center") {
        None => None,
        Some(_) => match cfg.list_or("sweep.bump_center", &[])?.as_slice() {
            [x, y] => Some((*x, *y)),
            [x] => Some((*x, 0.0)),
            _ => return Err(Error::Parse("sweep.bump_center: expected x, y".into())),
        },
    };
    Ok(PerturbShape {
        bump_center: center,
        bump_width: cfg.parse_opt("sweep.bump_width")?,
        trig_order: cfg.parse_or("sweep.trig_order", PerturbShape::default().trig_order)?,
    })
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub grid: Grid,
    pub base_q: FieldSpec,
    pub g: FieldSpec,
    pub mode: PerturbMode,
    pub shape: PerturbShape,
    pub amplitudes: Vec<f64>,
    /// Seeds per amplitude; seed values are `seed_base..seed_base + seeds`.
    pub seeds: usize,
    pub seed_base: u64,
    pub bounds: PriorBounds,
    pub d_list: Vec<f64>,
    pub jitter: f64,
    pub solver: SolverOptions,
    pub recon: ReconOptions,
    /// Also reconstruct q₂ from (F₂, g₂) for every pair.
    pub reconstruct: bool,
    pub diagnostics: DiagnosticsConfig,
    pub out: Option<PathBuf>,
    /// Canonical key/value echo written into the fit JSON.
    pub echo: BTreeMap<String, String>,
}

impl SweepConfig {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        cfg.check_known(KNOWN_KEYS)?;
        let d_list = cfg.list_or("sweep.d", &[0.1])?;
        let first_d = *d_list
            .first()
            .ok_or_else(|| Error::contract("sweep.d must list at least one margin"))?;
        let sc = SweepConfig {
            grid: grid_from(cfg)?,
            base_q: cfg.get("base.q").unwrap_or("const:2").parse()?,
            g: cfg.get("bdry.g").unwrap_or("cos-product").parse()?,
            mode: cfg.get("sweep.mode").unwrap_or("bump").parse()?,
            shape: shape_from(cfg)?,
            amplitudes: cfg.list_or("sweep.amplitudes", &[1e-3, 1e-2, 1e-1])?,
            seeds: cfg.parse_or("sweep.seeds", 1)?,
            seed_base: cfg.parse_or("sweep.seed_base", 0)?,
            bounds: bounds_from(cfg, first_d)?,
            d_list,
            jitter: cfg.parse_or("bdry.jitter", 0.0)?,
            solver: solver_from(cfg)?,
            recon: recon_from(cfg)?,
            reconstruct: cfg.parse_or("sweep.reconstruct", true)?,
            diagnostics: diagnostics_from(cfg)?,
            out: cfg.get("sweep.out").map(PathBuf::from),
            echo: cfg.entries().clone(),
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.amplitudes.is_empty() {
            return Err(Error::contract("sweep.amplitudes is empty"));
        }
        if let Some(a) = self
            .amplitudes
            .iter()
            .find(|a| !(**a >= 0.0 && a.is_finite()))
        {
            return Err(Error::contract(format!(
                "amplitude {a} must be finite and >= 0"
            )));
        }
        if self.seeds == 0 {
            return Err(Error::contract("sweep.seeds must be >= 1"));
        }
        if let Some(d) = self.d_list.iter().find(|d| !(**d > 0.0)) {
            return Err(Error::contract(format!(
                "interior margin d = {d} must be > 0"
            )));
        }
        if !(self.jitter >= 0.0) {
            return Err(Error::contract("bdry.jitter must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SampleFlags {
    /// The pair could not be built; the message of the failure.
    pub failed: Option<String>,
    pub hypothesis_ok: bool,
    pub k_violation: bool,
    pub e_violation: bool,
    pub h_violation: bool,
    pub saturated: bool,
    pub recon_failed: bool,
    pub recon_not_converged: bool,
    pub sign_change: bool,
}

impl SampleFlags {
    /// Eligible for the fit: built successfully and within the boundary hypothesis.
    pub fn fit_eligible(&self) -> bool {
        self.failed.is_none() && self.hypothesis_ok
    }

    /// Short `;`-separated summary for the CSV.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.failed.is_some() {
            parts.push("failed");
        }
        if !self.hypothesis_ok {
            parts.push("bdry");
        }
        for (on, name) in [
            (self.k_violation, "K"),
            (self.e_violation, "E"),
            (self.h_violation, "H"),
            (self.saturated, "saturated"),
            (self.recon_failed, "recon_failed"),
            (self.recon_not_converged, "recon_not_converged"),
            (self.sign_change, "sign_change"),
        ] {
            if on {
                parts.push(name);
            }
        }
        parts.join(";")
    }
}

/// One (amplitude, seed, d) record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub amplitude: f64,
    pub seed: u64,
    pub d: f64,
    pub epsilon: f64,
    pub bdry_gap: f64,
    /// ‖q₁ − q₂‖_{L¹(Ω_d)}.
    pub err_true: f64,
    /// ‖q̂₂ − q₂‖_{L¹(Ω_d)}.
    pub err_recon: Option<f64>,
    pub recon_iterations: Option<usize>,
    pub weighted: Option<WeightedChecks>,
    pub flags: SampleFlags,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FitEntry {
    pub fit: Option<HolderFit>,
    /// Why no fit was produced.
    pub error: Option<String>,
    /// Exact line through exactly two usable points.
    pub two_point: bool,
    /// Fit-eligible samples above C·x^η·exp(3·residual).
    pub outside_envelope: usize,
}

impl FitEntry {
    pub fn envelope_ok(&self) -> bool {
        self.fit.is_some() && self.outside_envelope == 0
    }
}

/// Fit over (ε, err) points, falling back to the exact line when exactly two are usable.
pub fn fit_entry(points: &[(f64, f64)]) -> FitEntry {
    let fitted = match fit_holder(points) {
        Err(Error::UnderdeterminedFit { usable: 2, .. }) => {
            fit_two_point(points).map(|f| (f, true))
        }
        other => other.map(|f| (f, false)),
    };
    match fitted {
        Ok((fit, two_point)) => FitEntry {
            outside_envelope: points
                .iter()
                .filter(|(e, r)| *e > 0.0 && *r > 0.0 && !fit.under_envelope(*e, *r))
                .count(),
            fit: Some(fit),
            error: None,
            two_point,
        },
        Err(e) => FitEntry {
            error: Some(e.to_string()),
            ..FitEntry::default()
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DFit {
    pub d: f64,
    pub true_pair: FitEntry,
    pub reconstruction: FitEntry,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StabilityReport {
    pub samples: Vec<Sample>,
    pub fits: Vec<DFit>,
    /// Ball and integrability functionals of the base solution u₁.
    pub diagnostics: DiagnosticsReport,
    pub summary: DiagnosticsSummary,
    /// Smallest 1 − lhs/proof_bound over the pairs.
    pub min_proof_bound_margin: Option<f64>,
    pub config: BTreeMap<String, String>,
}

impl StabilityReport {
    pub fn fit_for(&self, d: f64) -> Option<&DFit> {
        self.fits.iter().find(|f| f.d == d)
    }
}

struct Base {
    q1: ScalarField,
    g: BoundaryTrace,
}

fn run_pair(cfg: &SweepConfig, base: &Base, amplitude: f64, seed: u64) -> Vec<Sample> {
    let blank = |flags: SampleFlags| {
        cfg.d_list
            .iter()
            .map(|&d| Sample {
                amplitude,
                seed,
                d,
                epsilon: 0.0,
                bdry_gap: 0.0,
                err_true: 0.0,
                err_recon: None,
                recon_iterations: None,
                weighted: None,
                flags: flags.clone(),
            })
            .collect()
    };
    let failed = |e: Error| {
        blank(SampleFlags {
            failed: Some(e.to_string()),
            ..SampleFlags::default()
        })
    };

    let pert = match synth::perturb_coefficient(
        &base.q1,
        cfg.mode,
        amplitude,
        seed,
        &cfg.bounds,
        &cfg.shape,
    ) {
        Ok(p) => p,
        Err(e) => return failed(e),
    };
    let opts = PairOptions {
        solver: cfg.solver,
        bdry_jitter: cfg.jitter,
        provenance: Provenance {
            seed,
            mode: Some(cfg.mode),
            amplitude: Some(amplitude),
        },
    };
    let pair = match synth::make_pair(&base.q1, &pert.q, &base.g, &cfg.bounds, &opts) {
        Ok(p) => p,
        Err(e) => return failed(e),
    };

    let mut flags = SampleFlags {
        failed: None,
        hypothesis_ok: pair.flags.hypothesis_ok,
        k_violation: pair.flags.k_violations.iter().any(|&k| k > 0),
        e_violation: pair.flags.e_violation.iter().any(|&b| b),
        h_violation: pair.flags.h_violation.iter().any(|&b| b),
        saturated: pert.saturated,
        ..SampleFlags::default()
    };
    let weighted = diagnostics::weighted_checks(&pair).ok();

    let recon = if cfg.reconstruct {
        let g2 = fields::boundary_trace(&pair.u2);
        match recon::reconstruct(&pair.f2, &g2, &cfg.bounds, &cfg.recon) {
            Ok(r) => {
                flags.recon_not_converged = !r.converged;
                flags.sign_change = r.sign_change;
                Some(r)
            }
            Err(_) => {
                flags.recon_failed = true;
                None
            }
        }
    } else {
        None
    };

    let diff = match pair.q1.zip_with(&pair.q2, |a, b| a - b) {
        Ok(d) => d,
        Err(e) => return failed(e),
    };
    cfg.d_list
        .iter()
        .map(|&d| {
            let err_true = interior_mask(diff.grid(), d)
                .and_then(|m| fields::norms(&diff, &m))
                .map(|n| n.l1);
            let err_recon = recon.as_ref().and_then(|r| {
                recon::reconstruction_error(&r.q_hat, &pair.q2, d)
                    .ok()
                    .map(|e| e.l1_interior)
            });
            let mut flags = flags.clone();
            let err_true = err_true.unwrap_or_else(|e| {
                flags.failed = Some(e.to_string());
                0.0
            });
            Sample {
                amplitude,
                seed,
                d,
                epsilon: pair.epsilon,
                bdry_gap: pair.bdry_gap,
                err_true,
                err_recon,
                recon_iterations: recon.as_ref().map(|r| r.iterations),
                weighted,
                flags,
            }
        })
        .collect()
}

/// Run every (amplitude, seed) pair in parallel and fit each interior margin.
///
/// Samples are ordered by amplitude (config order), then seed, then d, whatever the thread
/// schedule. Pair failures become flagged samples; only base-problem failures abort.
pub fn run_sweep(cfg: &SweepConfig) -> Result<StabilityReport> {
    cfg.validate()?;
    let q1 = cfg.base_q.field(&cfg.grid)?;
    let g = cfg.g.trace(&cfg.grid)?;
    let u1 = forward::solve_dirichlet(&q1, &g, &cfg.solver)?.u;
    let base = Base { q1, g };

    let jobs: Vec<(f64, u64)> = cfg
        .amplitudes
        .iter()
        .flat_map(|&a| (0..cfg.seeds as u64).map(move |s| (a, s)))
        .map(|(a, s)| (a, cfg.seed_base + s))
        .collect();
    let samples: Vec<Sample> = jobs
        .par_iter()
        .map(|&(a, s)| run_pair(cfg, &base, a, s))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let fits = cfg
        .d_list
        .iter()
        .map(|&d| {
            let eligible = || {
                samples
                    .iter()
                    .filter(move |s| s.d == d && s.flags.fit_eligible())
            };
            let true_pts: Vec<(f64, f64)> = eligible().map(|s| (s.epsilon, s.err_true)).collect();
            let recon_pts: Vec<(f64, f64)> = eligible()
                .filter(|s| !s.flags.recon_not_converged)
                .filter_map(|s| s.err_recon.map(|e| (s.epsilon, e)))
                .collect();
            DFit {
                d,
                true_pair: fit_entry(&true_pts),
                reconstruction: if cfg.reconstruct {
                    fit_entry(&recon_pts)
                } else {
                    FitEntry {
                        error: Some("reconstruction disabled".into()),
                        ..FitEntry::default()
                    }
                },
            }
        })
        .collect();

    let diagnostics = field_diagnostics(&u1, &cfg.diagnostics)?;
    let summary = diagnostics.summary();
    let min_proof_bound_margin = samples
        .iter()
        .filter_map(|s| s.weighted)
        .filter(|w| w.proof_bound > 0.0)
        .map(|w| 1.0 - w.lhs / w.proof_bound)
        .reduce(f64::min);

    Ok(StabilityReport {
        samples,
        fits,
        diagnostics,
        summary,
        min_proof_bound_margin,
        config: cfg.echo.clone(),
    })
}

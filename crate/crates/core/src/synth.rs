//! Synthetic experiment pairs: perturb q, solve both forward problems, measure ε.
//!
//! ε is never prescribed. It is read off the solved fields as ‖q₁u₁² − q₂u₂²‖∞, so the
//! interior-error hypothesis holds by construction and, with shared Dirichlet data, so does
//! the boundary hypothesis.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{self, io, BoundaryTrace, Mask, PriorBounds, ScalarField};
use crate::forward::{self, SolverOptions};

/// The internal measurement F = q·u².
pub fn internal_data(q: &ScalarField, u: &ScalarField) -> Result<ScalarField> {
    q.zip_with(u, |q, u| q * u * u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbMode {
    Bump,
    SmoothRandom,
    Piecewise,
}

impl FromStr for PerturbMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bump" => Ok(PerturbMode::Bump),
            "smooth-random" => Ok(PerturbMode::SmoothRandom),
            "piecewise" => Ok(PerturbMode::Piecewise),
            other => Err(Error::Parse(format!("unknown perturbation mode '{other}'"))),
        }
    }
}

impl fmt::Display for PerturbMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PerturbMode::Bump => "bump",
            PerturbMode::SmoothRandom => "smooth-random",
            PerturbMode::Piecewise => "piecewise",
        })
    }
}

/// Free parameters of the perturbation shapes. Unset ones are drawn from the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbShape {
    pub bump_center: Option<(f64, f64)>,
    pub bump_width: Option<f64>,
    /// Highest cosine mode per axis in `smooth-random`.
    pub trig_order: usize,
}

impl Default for PerturbShape {
    fn default() -> Self {
        PerturbShape {
            bump_center: None,
            bump_width: None,
            trig_order: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Perturbation {
    pub q: ScalarField,
    /// Nodes moved by the projection onto [1/K, K].
    pub clipped: usize,
    /// More than half the nodes were clipped.
    pub saturated: bool,
}

pub fn perturb_coefficient(
    q: &ScalarField,
    mode: PerturbMode,
    amplitude: f64,
    seed: u64,
    bounds: &PriorBounds,
    shape: &PerturbShape,
) -> Result<Perturbation> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::contract(format!(
            "amplitude {amplitude} must be >= 0"
        )));
    }
    let grid = *q.grid();
    let one_d = grid.is_1d();
    let ly = if one_d { 1.0 } else { grid.ly };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let delta: Vec<f64> = match mode {
        PerturbMode::Bump => {
            let drawn = (
                grid.lx * rng.gen_range(0.25..0.75),
                if one_d {
                    0.0
                } else {
                    ly * rng.gen_range(0.25..0.75)
                },
            );
            let (cx, cy) = shape.bump_center.unwrap_or(drawn);
            let w = shape
                .bump_width
                .unwrap_or(0.15 * if one_d { grid.lx } else { grid.lx.min(ly) });
            grid.sample(|x, y| {
                let r2 = (x - cx).powi(2) + if one_d { 0.0 } else { (y - cy).powi(2) };
                amplitude * (-r2 / (w * w)).exp()
            })
        }
        PerturbMode::SmoothRandom => {
            let order = shape.trig_order;
            let ny_modes = if one_d { 0 } else { order };
            let coeffs: Vec<(usize, usize, f64)> = (0..=order)
                .flat_map(|a| (0..=ny_modes).map(move |b| (a, b)))
                .map(|(a, b)| (a, b, rng.gen_range(-1.0..1.0)))
                .collect();
            let raw = grid.sample(|x, y| {
                coeffs
                    .iter()
                    .map(|&(a, b, c)| {
                        let cy = if one_d {
                            1.0
                        } else {
                            (b as f64 * std::f64::consts::PI * y / ly).cos()
                        };
                        c * (a as f64 * std::f64::consts::PI * x / grid.lx).cos() * cy
                    })
                    .sum()
            });
            let peak = raw.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let scale = if peak > 0.0 { amplitude / peak } else { 0.0 };
            raw.into_iter().map(|v| v * scale).collect()
        }
        PerturbMode::Piecewise => {
            let x0 = grid.lx * rng.gen_range(0.0..0.7);
            let wx = grid.lx * rng.gen_range(0.1..0.3);
            let y0 = ly * rng.gen_range(0.0..0.7);
            let wy = ly * rng.gen_range(0.1..0.3);
            grid.sample(|x, y| {
                let inside_x = x >= x0 && x <= x0 + wx;
                let inside_y = one_d || (y >= y0 && y <= y0 + wy);
                if inside_x && inside_y {
                    amplitude
                } else {
                    0.0
                }
            })
        }
    };

    let (lo, hi) = bounds.q_range();
    let mut clipped = 0;
    let values = q
        .values()
        .iter()
        .zip(&delta)
        .map(|(&base, &d)| {
            let v = base + d;
            let c = v.clamp(lo, hi);
            if c != v {
                clipped += 1;
            }
            c
        })
        .collect();
    Ok(Perturbation {
        q: ScalarField::new(grid, values)?,
        clipped,
        saturated: 2 * clipped > grid.len(),
    })
}

/// How a pair was produced; echoed into manifests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub mode: Option<PerturbMode>,
    pub amplitude: Option<f64>,
}

/// Hypothesis bookkeeping for one pair; violations are recorded, never fatal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PairFlags {
    /// Nodes of q₁, q₂ outside [1/K, K].
    pub k_violations: [usize; 2],
    pub energy: [f64; 2],
    pub e_violation: [bool; 2],
    /// ∫ q_i u_i².
    pub h_integral: [f64; 2],
    pub h_violation: [bool; 2],
    pub hypothesis_ok: bool,
}

impl PairFlags {
    pub fn any_violation(&self) -> bool {
        self.k_violations.iter().any(|&k| k > 0)
            || self.e_violation.iter().any(|&b| b)
            || self.h_violation.iter().any(|&b| b)
            || !self.hypothesis_ok
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentPair {
    pub q1: ScalarField,
    pub q2: ScalarField,
    pub u1: ScalarField,
    pub u2: ScalarField,
    pub f1: ScalarField,
    pub f2: ScalarField,
    /// ‖f₁ − f₂‖∞ over the grid.
    pub epsilon: f64,
    /// ‖|u₁| − |u₂|‖∞ over the boundary nodes.
    pub bdry_gap: f64,
    pub bounds: PriorBounds,
    pub provenance: Provenance,
    pub flags: PairFlags,
}

impl ExperimentPair {
    /// Rebuild derived quantities from the four primary fields.
    pub fn from_fields(
        q1: ScalarField,
        q2: ScalarField,
        u1: ScalarField,
        u2: ScalarField,
        bounds: PriorBounds,
        provenance: Provenance,
    ) -> Result<Self> {
        q1.same_grid(&q2)?;
        q1.same_grid(&u1)?;
        q1.same_grid(&u2)?;
        let f1 = internal_data(&q1, &u1)?;
        let f2 = internal_data(&q2, &u2)?;
        let epsilon = f1
            .values()
            .iter()
            .zip(f2.values())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let t1 = fields::boundary_trace(&u1);
        let t2 = fields::boundary_trace(&u2);
        let bdry_gap = t1
            .values()
            .zip(t2.values())
            .fold(0.0_f64, |m, (a, b)| m.max((a.abs() - b.abs()).abs()));

        let full = Mask::full(q1.grid());
        let mut flags = PairFlags::default();
        for (k, (q, u, f)) in [(&q1, &u1, &f1), (&q2, &u2, &f2)].into_iter().enumerate() {
            flags.k_violations[k] = forward::count_out_of_bounds(q, &bounds);
            flags.energy[k] = fields::energy(u);
            flags.e_violation[k] = flags.energy[k] > bounds.e * bounds.e;
            flags.h_integral[k] = fields::integrate(f, &full)?;
            flags.h_violation[k] = flags.h_integral[k] < bounds.h * bounds.h;
        }
        flags.hypothesis_ok = bdry_gap <= (bounds.k * epsilon).sqrt() * (1.0 + 1e-12) + 1e-300;

        Ok(ExperimentPair {
            q1,
            q2,
            u1,
            u2,
            f1,
            f2,
            epsilon,
            bdry_gap,
            bounds,
            provenance,
            flags,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PairOptions {
    pub solver: SolverOptions,
    /// Relative size of the perturbation added to g₂, in units of √(Kε).
    pub bdry_jitter: f64,
    pub provenance: Provenance,
}

/// Solve Δu_i + q_i u_i = 0 with shared data g and package the pair.
pub fn make_pair(
    q1: &ScalarField,
    q2: &ScalarField,
    g: &BoundaryTrace,
    bounds: &PriorBounds,
    opts: &PairOptions,
) -> Result<ExperimentPair> {
    q1.same_grid(q2)?;
    let u1 = forward::solve_dirichlet(q1, g, &opts.solver)?.u;
    let u2 = forward::solve_dirichlet(q2, g, &opts.solver)?.u;
    let pair =
        ExperimentPair::from_fields(q1.clone(), q2.clone(), u1, u2, *bounds, opts.provenance)?;
    if opts.bdry_jitter <= 0.0 || pair.epsilon == 0.0 {
        return Ok(pair);
    }

    let size = opts.bdry_jitter * (bounds.k * pair.epsilon).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.provenance.seed ^ 0xb0d7);
    let (freq, phase): (f64, f64) = (
        rng.gen_range(1.0..4.0),
        rng.gen_range(0.0..std::f64::consts::TAU),
    );
    let grid = *g.grid();
    let g2 = g.map(|idx, v| {
        let (x, y) = grid.coords(idx);
        v + size * (freq * std::f64::consts::PI * (x + y) + phase).sin()
    });
    let u2 = forward::solve_dirichlet(q2, &g2, &opts.solver)?.u;
    ExperimentPair::from_fields(pair.q1, pair.q2, pair.u1, u2, *bounds, opts.provenance)
}

/// On-disk manifest accompanying the four field files of a pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairManifest {
    pub seed: u64,
    pub mode: Option<PerturbMode>,
    pub amplitude: Option<f64>,
    pub epsilon: f64,
    pub bdry_gap: f64,
    pub k: f64,
    pub e: f64,
    pub h: f64,
    pub d: f64,
    pub flags: PairFlags,
    pub fields: PairFiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFiles {
    pub q1: String,
    pub q2: String,
    pub u1: String,
    pub u2: String,
}

impl Default for PairFiles {
    fn default() -> Self {
        PairFiles {
            q1: "q1.field".into(),
            q2: "q2.field".into(),
            u1: "u1.field".into(),
            u2: "u2.field".into(),
        }
    }
}

pub fn manifest(pair: &ExperimentPair) -> PairManifest {
    PairManifest {
        seed: pair.provenance.seed,
        mode: pair.provenance.mode,
        amplitude: pair.provenance.amplitude,
        epsilon: pair.epsilon,
        bdry_gap: pair.bdry_gap,
        k: pair.bounds.k,
        e: pair.bounds.e,
        h: pair.bounds.h,
        d: pair.bounds.d,
        flags: pair.flags,
        fields: PairFiles::default(),
    }
}

/// Write `pair.json` plus the field files into `dir`; returns the manifest path.
pub fn write_pair(pair: &ExperimentPair, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let m = manifest(pair);
    for (name, f) in [
        (&m.fields.q1, &pair.q1),
        (&m.fields.q2, &pair.q2),
        (&m.fields.u1, &pair.u1),
        (&m.fields.u2, &pair.u2),
    ] {
        io::write_field(&dir.join(name), f)?;
    }
    let path = dir.join("pair.json");
    let text = serde_json::to_string_pretty(&m).expect("manifest serialises");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_pair(manifest_path: &Path) -> Result<ExperimentPair> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let m: PairManifest =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("pair manifest: {e}")))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let load = |name: &str| io::read_field(&base.join(name));
    let bounds = PriorBounds::new(m.k, m.e, m.h, m.d)?;
    ExperimentPair::from_fields(
        load(&m.fields.q1)?,
        load(&m.fields.q2)?,
        load(&m.fields.u1)?,
        load(&m.fields.u2)?,
        bounds,
        Provenance {
            seed: m.seed,
            mode: m.mode,
            amplitude: m.amplitude,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;

    fn bounds() -> PriorBounds {
        PriorBounds::new(4.0, 2.0, 0.1, 0.1).unwrap()
    }

    #[test]
    fn internal_data_examples() {
        let g = Grid::unit_square(9).unwrap();
        let one = ScalarField::constant(&g, 1.0).unwrap();
        let zero = ScalarField::constant(&g, 0.0).unwrap();
        assert_eq!(internal_data(&one, &zero).unwrap().max_abs(), 0.0);

        let two = ScalarField::constant(&g, 2.0).unwrap();
        let u = ScalarField::from_fn(&g, |x, y| x.cos() * y.cos()).unwrap();
        let f = internal_data(&two, &u).unwrap();
        assert_eq!(f.values()[0], 2.0);
        let neg = u.map(|v| -v).unwrap();
        assert_eq!(internal_data(&two, &neg).unwrap(), f);
    }

    #[test]
    fn zero_amplitude_is_identity() {
        let g = Grid::unit_square(9).unwrap();
        let q = ScalarField::from_fn(&g, |x, _| 1.0 + x).unwrap();
        for mode in [
            PerturbMode::Bump,
            PerturbMode::SmoothRandom,
            PerturbMode::Piecewise,
        ] {
            let p =
                perturb_coefficient(&q, mode, 0.0, 7, &bounds(), &PerturbShape::default()).unwrap();
            assert_eq!(p.q, q);
            assert_eq!(p.clipped, 0);
        }
    }

    #[test]
    fn bump_matches_formula() {
        let g = Grid::unit_square(17).unwrap();
        let q = ScalarField::constant(&g, 2.0).unwrap();
        let shape = PerturbShape {
            bump_center: Some((0.3, 0.6)),
            bump_width: Some(0.2),
            ..PerturbShape::default()
        };
        let p = perturb_coefficient(&q, PerturbMode::Bump, 0.5, 1, &bounds(), &shape).unwrap();
        for idx in 0..g.len() {
            let (x, y) = g.coords(idx);
            let expect = 2.0 + 0.5 * (-((x - 0.3).powi(2) + (y - 0.6).powi(2)) / 0.04).exp();
            assert!((p.q.values()[idx] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn seeds_are_deterministic() {
        let g = Grid::unit_square(17).unwrap();
        let q = ScalarField::constant(&g, 2.0).unwrap();
        let s = PerturbShape::default();
        for mode in [
            PerturbMode::Bump,
            PerturbMode::SmoothRandom,
            PerturbMode::Piecewise,
        ] {
            let a = perturb_coefficient(&q, mode, 0.3, 11, &bounds(), &s).unwrap();
            let b = perturb_coefficient(&q, mode, 0.3, 11, &bounds(), &s).unwrap();
            let c = perturb_coefficient(&q, mode, 0.3, 12, &bounds(), &s).unwrap();
            assert_eq!(a.q, b.q);
            assert_ne!(a.q, c.q, "{mode}");
        }
    }

    #[test]
    fn clipping_and_saturation() {
        let g = Grid::unit_square(17).unwrap();
        let q = ScalarField::constant(&g, 3.9).unwrap();
        let p = perturb_coefficient(
            &q,
            PerturbMode::Piecewise,
            10.0,
            3,
            &bounds(),
            &Default::default(),
        )
        .unwrap();
        assert!(p.q.max() <= 4.0);
        assert!(p.clipped > 0);
        assert!(!p.saturated);
        let s = perturb_coefficient(
            &q,
            PerturbMode::SmoothRandom,
            50.0,
            3,
            &bounds(),
            &Default::default(),
        )
        .unwrap();
        assert!(s.q.min() >= 0.25 && s.q.max() <= 4.0);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [
            PerturbMode::Bump,
            PerturbMode::SmoothRandom,
            PerturbMode::Piecewise,
        ] {
            assert_eq!(m.to_string().parse::<PerturbMode>().unwrap(), m);
        }
        assert!("gauss".parse::<PerturbMode>().is_err());
    }

    #[test]
    fn identical_coefficients_give_zero_gaps() {
        let g = Grid::unit_square(9).unwrap();
        let q = ScalarField::constant(&g, 2.0).unwrap();
        let trace = BoundaryTrace::from_fn(&g, |x, y| x.cos() * y.cos());
        let pair = make_pair(&q, &q, &trace, &bounds(), &PairOptions::default()).unwrap();
        assert_eq!(pair.epsilon, 0.0);
        assert_eq!(pair.bdry_gap, 0.0);
        assert!(pair.flags.hypothesis_ok);
    }

    #[test]
    fn jitter_stays_within_boundary_hypothesis_budget() {
        let g = Grid::unit_square(17).unwrap();
        let q1 = ScalarField::constant(&g, 2.0).unwrap();
        let q2 = perturb_coefficient(
            &q1,
            PerturbMode::Bump,
            0.1,
            5,
            &bounds(),
            &Default::default(),
        )
        .unwrap()
        .q;
        let trace = BoundaryTrace::from_fn(&g, |x, y| x.cos() * y.cos());
        let opts = PairOptions {
            bdry_jitter: 0.5,
            ..PairOptions::default()
        };
        let pair = make_pair(&q1, &q2, &trace, &bounds(), &opts).unwrap();
        assert!(pair.bdry_gap > 0.0);
        // jitter of half the budget on the first solve's ε; the re-solve shifts ε slightly
        assert!(pair.bdry_gap <= (bounds().k * pair.epsilon).sqrt());
    }
}

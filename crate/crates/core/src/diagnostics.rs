//! Empirical constants of the unique-continuation estimates.
//!
//! Every functional here is a plain ratio or integral over node sets; nothing is certified.
//! Negative powers are floored at `floor` and the activations counted, so divergence shows
//! up as a refinement trend rather than as an infinity.

use std::cmp::Ordering;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{self, ball_mask, interior_mask, Grid, Mask, ScalarField};
use crate::synth::ExperimentPair;

/// Default floor on |u| inside negative powers.
pub const DEFAULT_FLOOR: f64 = 1e-12;

fn check_inside(grid: &Grid, x: (f64, f64), radius: f64) -> Result<()> {
    let dist = grid.distance_to_boundary(x.0, x.1);
    if dist < radius - 1e-10 * grid.h {
        return Err(Error::contract(format!(
            "ball of radius {radius} around ({}, {}) leaves the domain (distance {dist})",
            x.0, x.1
        )));
    }
    Ok(())
}

fn ball_mass(u: &ScalarField, x: (f64, f64), r: f64) -> f64 {
    fields::integrate_with(u, &ball_mask(u.grid(), x, r), |v| v * v)
}

/// ∫_{B_2r(x)} u² / ∫_{B_r(x)} u².
pub fn doubling_ratio(u: &ScalarField, x: (f64, f64), r: f64) -> Result<f64> {
    check_inside(u.grid(), x, 2.0 * r)?;
    let inner = ball_mass(u, x, r);
    if inner < 1e-300 {
        return Err(Error::DegenerateBall(inner));
    }
    Ok(ball_mass(u, x, 2.0 * r) / inner)
}

/// ∫_{B_r(x)} u² / ∫_Ω u², always in [0, 1].
pub fn propagation_ratio(u: &ScalarField, x: (f64, f64), r: f64) -> Result<f64> {
    check_inside(u.grid(), x, r)?;
    let total = fields::integrate_with(u, &Mask::full(u.grid()), |v| v * v);
    if total <= 0.0 {
        return Err(Error::TrivialSolution);
    }
    Ok(ball_mass(u, x, r) / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlooredValue {
    pub value: f64,
    pub floor_hits: usize,
}

/// (avg_B u²)·(avg_B |u|^{−2/(p−1)})^{p−1} over B = B_r(x).
pub fn muckenhoupt_value(
    u: &ScalarField,
    x: (f64, f64),
    r: f64,
    p: f64,
    floor: f64,
) -> Result<FlooredValue> {
    if !(p > 1.0) {
        return Err(Error::contract(format!(
            "A_p exponent p = {p} must exceed 1"
        )));
    }
    check_inside(u.grid(), x, r)?;
    let grid = u.grid();
    let ball = ball_mask(grid, x, r);
    let measure = ball.measure();
    if measure <= 0.0 {
        return Err(Error::DegenerateBall(measure));
    }
    let power = -2.0 / (p - 1.0);
    let mut floor_hits = 0;
    let (mut mass, mut neg) = (0.0, 0.0);
    for i in ball.indices() {
        let w = grid.cell_weight(i);
        let v = u.values()[i];
        mass += w * v * v;
        let a = v.abs();
        if a < floor {
            floor_hits += 1;
        }
        neg += w * a.max(floor).powf(power);
    }
    Ok(FlooredValue {
        value: (mass / measure) * (neg / measure).powf(p - 1.0),
        floor_hits,
    })
}

/// ∫_{Ω_d} max(|u|, floor)^{−δ}.
pub fn negative_power_integral(
    u: &ScalarField,
    d: f64,
    delta: f64,
    floor: f64,
) -> Result<FlooredValue> {
    if !(delta > 0.0) {
        return Err(Error::contract(format!(
            "exponent delta = {delta} must be positive"
        )));
    }
    let mask = interior_mask(u.grid(), d)?;
    if mask.is_empty() {
        return Err(Error::contract(format!("Ω_d is empty for d = {d}")));
    }
    let floor_hits = mask
        .indices()
        .filter(|&i| u.values()[i].abs() < floor)
        .count();
    let value = fields::integrate_with(u, &mask, |v| v.abs().max(floor).powf(-delta));
    Ok(FlooredValue { value, floor_hits })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedChecks {
    /// ∫(|u₁|+|u₂|)(|u₁|−|u₂|)².
    pub lhs: f64,
    /// 16·K·ε·∫(|u₁|+|u₂|).
    pub proof_bound: f64,
    /// ∫||u₁|−|u₂||³.
    pub l3_lhs: f64,
    /// ∫|q₁−q₂|u₁².
    pub weightq_lhs: f64,
    /// ε + ε^{1/2}.
    pub weightq_bound_input: f64,
}

pub fn weighted_checks(pair: &ExperimentPair) -> Result<WeightedChecks> {
    if !pair.flags.hypothesis_ok {
        return Err(Error::contract(format!(
            "boundary gap {} exceeds sqrt(K eps) = {}",
            pair.bdry_gap,
            (pair.bounds.k * pair.epsilon).sqrt()
        )));
    }
    let grid = *pair.u1.grid();
    let (u1, u2) = (pair.u1.values(), pair.u2.values());
    let (q1, q2) = (pair.q1.values(), pair.q2.values());
    let (mut lhs, mut mass, mut l3, mut wq) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..grid.len() {
        let w = grid.cell_weight(i);
        let (a, b) = (u1[i].abs(), u2[i].abs());
        let diff = a - b;
        lhs += w * (a + b) * diff * diff;
        mass += w * (a + b);
        l3 += w * diff.abs().powi(3);
        wq += w * (q1[i] - q2[i]).abs() * u1[i] * u1[i];
    }
    let eps = pair.epsilon;
    Ok(WeightedChecks {
        lhs,
        proof_bound: 16.0 * pair.bounds.k * eps * mass,
        l3_lhs: l3,
        weightq_lhs: wq,
        weightq_bound_input: eps + eps.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelSetError {
    /// ‖q₁ − q₂‖_{L¹(D_t)}.
    pub value: f64,
    /// Node count of D_t.
    pub nodes: usize,
    pub empty: bool,
}

/// L¹ norm of q₁ − q₂ over D_t = {q₁u₁² ≥ t}, intersected with Ω_d when `d` is given.
pub fn level_set_error(
    q1: &ScalarField,
    q2: &ScalarField,
    u1: &ScalarField,
    t: f64,
    d: Option<f64>,
) -> Result<LevelSetError> {
    if !(t > 0.0) {
        return Err(Error::contract(format!("level t = {t} must be positive")));
    }
    q1.same_grid(q2)?;
    q1.same_grid(u1)?;
    let grid = q1.grid();
    let level = Mask::from_fn(grid, |i| q1.values()[i] * u1.values()[i].powi(2) >= t);
    let mask = match d {
        Some(d) => level.intersect(&interior_mask(grid, d)?)?,
        None => level,
    };
    let diff = q1.zip_with(q2, |a, b| a - b)?;
    let n = fields::norms(&diff, &mask)?;
    Ok(LevelSetError {
        value: n.l1,
        nodes: mask.count(),
        empty: n.empty,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrability {
    Convergent,
    Divergent,
    Borderline,
}

/// Classify a coarse-to-fine sequence of discrete integrals by the ratio of successive
/// increments: shrinking increments converge, growing ones diverge.
pub fn classify_refinement(values: &[f64]) -> Integrability {
    if values.len() < 3 {
        return Integrability::Borderline;
    }
    let n = values.len();
    let last = values[n - 1];
    let d_prev = values[n - 2] - values[n - 3];
    let d_last = values[n - 1] - values[n - 2];
    if d_last.abs() <= 1e-3 * last.abs() {
        return Integrability::Convergent;
    }
    if d_prev == 0.0 {
        return Integrability::Divergent;
    }
    let ratio = d_last.abs() / d_prev.abs();
    if ratio < 0.95 {
        Integrability::Convergent
    } else if ratio > 1.05 {
        Integrability::Divergent
    } else {
        Integrability::Borderline
    }
}

/// Keep every other node; `None` unless both node counts are odd.
pub fn coarsen(f: &ScalarField) -> Option<ScalarField> {
    let g = f.grid();
    let even = |n: usize| (n - 1).is_multiple_of(2) && (n - 1) / 2 + 1 >= 3;
    if !even(g.nx) || (!g.is_1d() && !even(g.ny)) {
        return None;
    }
    let nx = (g.nx - 1) / 2 + 1;
    let ny = if g.is_1d() { 1 } else { (g.ny - 1) / 2 + 1 };
    let grid = Grid::new(nx, ny, g.lx, g.ly).ok()?;
    let values = (0..grid.len())
        .map(|idx| {
            let (i, j) = grid.ij(idx);
            f.values()[g.index(2 * i, 2 * j)]
        })
        .collect();
    ScalarField::new(grid, values).ok()
}

/// Nested sequence coarsest-first, at most `levels` long.
pub fn nested_levels(f: &ScalarField, levels: usize) -> Vec<ScalarField> {
    let mut out = vec![f.clone()];
    while out.len() < levels {
        match coarsen(out.last().unwrap()) {
            Some(c) => out.push(c),
            None => break,
        }
    }
    out.reverse();
    out
}

/// Centres of a `per_axis`-point lattice inside Ω_{2r̄}.
pub fn default_centers(grid: &Grid, rbar: f64, per_axis: usize) -> Vec<(f64, f64)> {
    let margin = 2.0 * rbar;
    let span = |len: f64| -> Vec<f64> {
        let lo = margin;
        let hi = len - margin;
        if hi < lo {
            return Vec::new();
        }
        if per_axis <= 1 || hi == lo {
            return vec![0.5 * (lo + hi)];
        }
        (0..per_axis)
            .map(|k| lo + (hi - lo) * k as f64 / (per_axis - 1) as f64)
            .collect()
    };
    let xs = span(grid.lx);
    if grid.is_1d() {
        return xs.into_iter().map(|x| (x, 0.0)).collect();
    }
    let ys = span(grid.ly);
    ys.iter()
        .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsConfig {
    /// Ball radii r̄ for the doubling/propagation/A_p sweeps.
    pub radii: Vec<f64>,
    pub centers_per_axis: usize,
    pub p_list: Vec<f64>,
    pub delta_list: Vec<f64>,
    pub d_list: Vec<f64>,
    pub t_list: Vec<f64>,
    pub floor: f64,
    /// Nested coarsenings used for the δ refinement study.
    pub levels: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            radii: vec![0.05, 0.1],
            centers_per_axis: 3,
            p_list: vec![2.0, 3.0, 5.0],
            delta_list: vec![0.25, 0.5, 1.0, 1.5, 2.0],
            d_list: vec![0.1],
            t_list: vec![0.01, 0.1, 1.0],
            floor: DEFAULT_FLOOR,
            levels: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallValue {
    pub center: (f64, f64),
    pub r: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApValue {
    pub center: (f64, f64),
    pub r: f64,
    pub p: f64,
    pub value: f64,
    pub floor_hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegIntegralValue {
    pub d: f64,
    pub delta: f64,
    pub value: f64,
    pub floor_hits: usize,
    pub trend: Integrability,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelSetValue {
    pub t: f64,
    pub l1_dt: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub doubling: Vec<BallValue>,
    pub propagation: Vec<BallValue>,
    pub ap: Vec<ApValue>,
    pub neg_integral: Vec<NegIntegralValue>,
    pub weighted: Option<WeightedChecks>,
    pub level_sets: Vec<LevelSetValue>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DiagnosticsSummary {
    pub max_doubling: Option<f64>,
    pub min_propagation: Option<f64>,
    /// Largest δ whose integral is refinement-stable.
    pub best_delta: Option<f64>,
    /// δ/(δ+2) for `best_delta`, to compare against a fitted η.
    pub implied_eta: Option<f64>,
    /// 1 − lhs/proof_bound; positive when the weighted estimate holds.
    pub proof_bound_margin: Option<f64>,
}

fn by_center_then_r(a: &(f64, f64), ar: f64, b: &(f64, f64), br: f64) -> Ordering {
    a.0.total_cmp(&b.0)
        .then(a.1.total_cmp(&b.1))
        .then(ar.total_cmp(&br))
}

/// Ball functionals of a single field.
pub fn field_diagnostics(u: &ScalarField, cfg: &DiagnosticsConfig) -> Result<DiagnosticsReport> {
    let grid = u.grid();
    let mut doubling = Vec::new();
    let mut propagation = Vec::new();
    let mut ap = Vec::new();
    for &rbar in &cfg.radii {
        for center in default_centers(grid, rbar, cfg.centers_per_axis) {
            match doubling_ratio(u, center, rbar) {
                Ok(value) => doubling.push(BallValue {
                    center,
                    r: rbar,
                    value,
                }),
                Err(Error::DegenerateBall(_)) => {}
                Err(e) => return Err(e),
            }
            propagation.push(BallValue {
                center,
                r: rbar,
                value: propagation_ratio(u, center, rbar)?,
            });
            for &p in &cfg.p_list {
                let v = muckenhoupt_value(u, center, rbar, p, cfg.floor)?;
                ap.push(ApValue {
                    center,
                    r: rbar,
                    p,
                    value: v.value,
                    floor_hits: v.floor_hits,
                });
            }
        }
    }
    doubling.sort_by(|a, b| by_center_then_r(&a.center, a.r, &b.center, b.r));
    propagation.sort_by(|a, b| by_center_then_r(&a.center, a.r, &b.center, b.r));
    ap.sort_by(|a, b| by_center_then_r(&a.center, a.r, &b.center, b.r).then(a.p.total_cmp(&b.p)));

    let levels = nested_levels(u, cfg.levels);
    let mut neg_integral = Vec::new();
    for &d in &cfg.d_list {
        for &delta in &cfg.delta_list {
            let mut seq = Vec::with_capacity(levels.len());
            let mut hits = 0;
            for lvl in &levels {
                let v = negative_power_integral(lvl, d, delta, cfg.floor)?;
                seq.push(v.value);
                hits = v.floor_hits;
            }
            let trend = if hits > 0 {
                Integrability::Divergent
            } else {
                classify_refinement(&seq)
            };
            neg_integral.push(NegIntegralValue {
                d,
                delta,
                value: *seq.last().unwrap(),
                floor_hits: hits,
                trend,
            });
        }
    }
    Ok(DiagnosticsReport {
        doubling,
        propagation,
        ap,
        neg_integral,
        weighted: None,
        level_sets: Vec::new(),
    })
}

/// Full report for a pair: ball functionals of u₁ plus the pair inequalities.
pub fn diagnose_pair(pair: &ExperimentPair, cfg: &DiagnosticsConfig) -> Result<DiagnosticsReport> {
    let mut report = field_diagnostics(&pair.u1, cfg)?;
    report.weighted = if pair.flags.hypothesis_ok {
        Some(weighted_checks(pair)?)
    } else {
        None
    };
    for &t in &cfg.t_list {
        let l = level_set_error(&pair.q1, &pair.q2, &pair.u1, t, None)?;
        report.level_sets.push(LevelSetValue {
            t,
            l1_dt: l.value,
            nodes: l.nodes,
        });
    }
    Ok(report)
}

impl DiagnosticsReport {
    pub fn summary(&self) -> DiagnosticsSummary {
        let max_doubling = self.doubling.iter().map(|b| b.value).reduce(f64::max);
        let min_propagation = self.propagation.iter().map(|b| b.value).reduce(f64::min);
        let best_delta = self
            .neg_integral
            .iter()
            .filter(|n| n.trend == Integrability::Convergent)
            .map(|n| n.delta)
            .reduce(f64::max);
        let proof_bound_margin = self
            .weighted
            .filter(|w| w.proof_bound > 0.0)
            .map(|w| 1.0 - w.lhs / w.proof_bound);
        DiagnosticsSummary {
            max_doubling,
            min_propagation,
            best_delta,
            implied_eta: best_delta.map(|d| d / (d + 2.0)),
            proof_bound_margin,
        }
    }

    pub fn rows(&self) -> Vec<DiagnosticsRow> {
        let mut rows = Vec::new();
        let ball = |name: &'static str, b: &BallValue| DiagnosticsRow {
            functional: name,
            center_x: Some(b.center.0),
            center_y: Some(b.center.1),
            r: Some(b.r),
            param: None,
            value: b.value,
            floor_hits: 0,
        };
        rows.extend(self.doubling.iter().map(|b| ball("doubling", b)));
        rows.extend(self.propagation.iter().map(|b| ball("propagation", b)));
        rows.extend(self.ap.iter().map(|a| DiagnosticsRow {
            functional: "muckenhoupt",
            center_x: Some(a.center.0),
            center_y: Some(a.center.1),
            r: Some(a.r),
            param: Some(a.p),
            value: a.value,
            floor_hits: a.floor_hits,
        }));
        rows.extend(self.neg_integral.iter().map(|n| DiagnosticsRow {
            functional: "negative_power",
            center_x: None,
            center_y: None,
            r: Some(n.d),
            param: Some(n.delta),
            value: n.value,
            floor_hits: n.floor_hits,
        }));
        if let Some(w) = &self.weighted {
            for (name, v) in [
                ("weighted_lhs", w.lhs),
                ("weighted_proof_bound", w.proof_bound),
                ("l3_lhs", w.l3_lhs),
                ("weightq_lhs", w.weightq_lhs),
                ("weightq_bound_input", w.weightq_bound_input),
            ] {
                rows.push(DiagnosticsRow {
                    functional: name,
                    center_x: None,
                    center_y: None,
                    r: None,
                    param: None,
                    value: v,
                    floor_hits: 0,
                });
            }
        }
        rows.extend(self.level_sets.iter().map(|l| DiagnosticsRow {
            functional: "level_set_l1",
            center_x: None,
            center_y: None,
            r: None,
            param: Some(l.t),
            value: l.l1_dt,
            floor_hits: 0,
        }));
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub functional: &'static str,
    pub center_x: Option<f64>,
    pub center_y: Option<f64>,
    pub r: Option<f64>,
    pub param: Option<f64>,
    pub value: f64,
    pub floor_hits: usize,
}

pub fn write_rows_csv(rows: &[DiagnosticsRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    if rows.is_empty() {
        w.write_record([
            "functional",
            "center_x",
            "center_y",
            "r",
            "param",
            "value",
            "floor_hits",
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_doubling_is_discrete_area_ratio() {
        let g = Grid::unit_square(101).unwrap();
        let u = ScalarField::constant(&g, 3.0).unwrap();
        let (c, r) = ((0.5, 0.5), 0.1);
        let ratio = doubling_ratio(&u, c, r).unwrap();
        let exact = ball_mask(&g, c, 2.0 * r).measure() / ball_mask(&g, c, r).measure();
        assert!((ratio - exact).abs() < 1e-12 * exact);
        assert!((ratio - 4.0).abs() < 0.15 * 4.0);
    }

    #[test]
    fn doubling_requires_room() {
        let g = Grid::unit_square(21).unwrap();
        let u = ScalarField::constant(&g, 1.0).unwrap();
        assert!(doubling_ratio(&u, (0.5, 0.5), 0.3).is_err());
        let z = ScalarField::constant(&g, 0.0).unwrap();
        assert!(matches!(
            doubling_ratio(&z, (0.5, 0.5), 0.1),
            Err(Error::DegenerateBall(_))
        ));
    }

    #[test]
    fn propagation_area_fraction() {
        let g = Grid::unit_square(81).unwrap();
        let u = ScalarField::constant(&g, 1.0).unwrap();
        let r = propagation_ratio(&u, (0.5, 0.5), 0.25).unwrap();
        let expect = std::f64::consts::PI * 0.0625;
        assert!((r - expect).abs() < 0.1 * expect);
        let z = ScalarField::constant(&g, 0.0).unwrap();
        assert!(matches!(
            propagation_ratio(&z, (0.5, 0.5), 0.1),
            Err(Error::TrivialSolution)
        ));
    }

    #[test]
    fn ap_of_constant_is_one() {
        let g = Grid::unit_square(41).unwrap();
        let u = ScalarField::constant(&g, -2.5).unwrap();
        for p in [1.5, 2.0, 3.0, 7.0] {
            let v = muckenhoupt_value(&u, (0.5, 0.5), 0.2, p, DEFAULT_FLOOR).unwrap();
            assert!((v.value - 1.0).abs() < 1e-13, "p={p}: {}", v.value);
            assert_eq!(v.floor_hits, 0);
        }
        assert!(muckenhoupt_value(&u, (0.5, 0.5), 0.2, 1.0, DEFAULT_FLOOR).is_err());
    }

    #[test]
    fn ap_with_zero_node_is_floor_dominated() {
        // u = x − 1/2 on [0, 1] has a node exactly on its zero at p = 2
        let g = Grid::interval(101, 1.0).unwrap();
        let u = ScalarField::from_fn(&g, |x, _| x - 0.5).unwrap();
        let v = muckenhoupt_value(&u, (0.5, 0.0), 0.2, 2.0, DEFAULT_FLOOR).unwrap();
        assert_eq!(v.floor_hits, 1);
        assert!(v.value > 1e20);
    }

    #[test]
    fn negative_power_of_one_is_mask_measure() {
        let g = Grid::unit_square(33).unwrap();
        let u = ScalarField::constant(&g, 1.0).unwrap();
        let v = negative_power_integral(&u, 0.2, 0.7, DEFAULT_FLOOR).unwrap();
        let m = interior_mask(&g, 0.2).unwrap().measure();
        assert!((v.value - m).abs() < 1e-14);
    }

    #[test]
    fn negative_power_positive_lower_bound() {
        let g = Grid::unit_square(33).unwrap();
        let u = ScalarField::from_fn(&g, |x, y| x.cos() * y.cos()).unwrap();
        let mask = interior_mask(&g, 0.1).unwrap();
        let umin = mask
            .indices()
            .map(|i| u.values()[i].abs())
            .fold(f64::INFINITY, f64::min);
        for delta in [0.5, 1.0, 2.0, 4.0] {
            let v = negative_power_integral(&u, 0.1, delta, DEFAULT_FLOOR).unwrap();
            assert!(v.value <= mask.measure() * umin.powf(-delta) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn level_set_empty_above_max() {
        let g = Grid::unit_square(9).unwrap();
        let q1 = ScalarField::constant(&g, 2.0).unwrap();
        let q2 = ScalarField::constant(&g, 2.5).unwrap();
        let u = ScalarField::constant(&g, 1.0).unwrap();
        let e = level_set_error(&q1, &q2, &u, 2.5, None).unwrap();
        assert!(e.empty);
        assert_eq!(e.value, 0.0);
        let all = level_set_error(&q1, &q2, &u, 1e-9, None).unwrap();
        assert!((all.value - 0.5).abs() < 1e-12);
        assert_eq!(all.nodes, g.len());
    }

    #[test]
    fn refinement_classifier() {
        assert_eq!(
            classify_refinement(&[1.0, 1.5, 1.75]),
            Integrability::Convergent
        );
        assert_eq!(
            classify_refinement(&[1.0, 2.0, 3.5]),
            Integrability::Divergent
        );
        assert_eq!(
            classify_refinement(&[1.0, 2.0, 3.0]),
            Integrability::Borderline
        );
        assert_eq!(classify_refinement(&[1.0, 2.0]), Integrability::Borderline);
        assert_eq!(
            classify_refinement(&[3.0, 3.0, 3.0]),
            Integrability::Convergent
        );
    }

    #[test]
    fn coarsening_keeps_even_nodes() {
        let g = Grid::unit_square(9).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| x + 10.0 * y).unwrap();
        let c = coarsen(&f).unwrap();
        assert_eq!(c.grid().nx, 5);
        assert_eq!(
            c,
            ScalarField::from_fn(c.grid(), |x, y| x + 10.0 * y).unwrap()
        );
        assert_eq!(nested_levels(&f, 3).len(), 3);
        assert!(
            coarsen(&ScalarField::constant(&Grid::unit_square(4).unwrap(), 0.0).unwrap()).is_none()
        );
    }

    #[test]
    fn centers_respect_margin() {
        let g = Grid::unit_square(33).unwrap();
        let cs = default_centers(&g, 0.1, 3);
        assert_eq!(cs.len(), 9);
        assert!(cs
            .iter()
            .all(|&(x, y)| g.distance_to_boundary(x, y) >= 0.2 - 1e-12));
        assert!(default_centers(&g, 0.3, 3).is_empty());
    }

    #[test]
    fn summary_picks_largest_convergent_delta() {
        let n = |delta, trend| NegIntegralValue {
            d: 0.1,
            delta,
            value: 1.0,
            floor_hits: 0,
            trend,
        };
        let report = DiagnosticsReport {
            neg_integral: vec![
                n(0.5, Integrability::Convergent),
                n(1.0, Integrability::Convergent),
                n(1.5, Integrability::Divergent),
            ],
            ..Default::default()
        };
        let s = report.summary();
        assert_eq!(s.best_delta, Some(1.0));
        assert!((s.implied_eta.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(DiagnosticsReport::default().summary().implied_eta, None);
    }
}

//! The one-dimensional oscillatory family on (−R, R):
//!
//! ```text
//! q_m = A_m on |x| < r,  1 on r ≤ |x| ≤ R,        A_m = (π/2 + 2mπ)² / r²
//! u_m = cos(√A_m x)/√A_m on |x| < r,  −sin(|x| − r) on r ≤ |x| ≤ R
//! ```
//!
//! q_m u_m² stays within 2 of q_2m u_2m² in sup norm while ‖q_2m − q_m‖_p blows up like m²,
//! because the uniform bound K on q is violated (K ≥ A_m).

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::csv_err;
use crate::error::{Error, Result};

pub fn a_m(r: f64, m: u32) -> f64 {
    let phase = FRAC_PI_2 + 2.0 * m as f64 * PI;
    phase * phase / (r * r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillatoryFamily {
    pub r: f64,
    pub rr: f64,
    pub m: u32,
    pub a_m: f64,
}

impl OscillatoryFamily {
    pub fn new(r: f64, rr: f64, m: u32) -> Result<Self> {
        if !(r > 0.0 && rr > r && rr.is_finite()) {
            return Err(Error::contract(format!(
                "need 0 < r < R, got r = {r}, R = {rr}"
            )));
        }
        if m == 0 {
            return Err(Error::contract("family index m starts at 1"));
        }
        Ok(OscillatoryFamily {
            r,
            rr,
            m,
            a_m: a_m(r, m),
        })
    }

    fn check(&self, x: f64) -> Result<()> {
        if x.abs() > self.rr {
            Err(Error::Domain(x))
        } else {
            Ok(())
        }
    }

    pub fn eval_q(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(if x.abs() < self.r { self.a_m } else { 1.0 })
    }

    pub fn eval_u(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        Ok(if x.abs() < self.r {
            self.inner_u(x)
        } else {
            self.outer_u(x)
        })
    }

    /// Inner branch formula, valid for |x| ≤ r.
    pub fn inner_u(&self, x: f64) -> f64 {
        let k = self.a_m.sqrt();
        (k * x).cos() / k
    }

    pub fn inner_du(&self, x: f64) -> f64 {
        -(self.a_m.sqrt() * x).sin()
    }

    /// Outer branch formula, valid for r ≤ |x| ≤ R.
    pub fn outer_u(&self, x: f64) -> f64 {
        -(x.abs() - self.r).sin()
    }

    pub fn outer_du(&self, x: f64) -> f64 {
        -(x.abs() - self.r).cos() * x.signum()
    }

    /// q_m u_m², equal to cos²(√A_m x) inside and sin²(|x| − r) outside.
    pub fn internal_data(&self, x: f64) -> Result<f64> {
        Ok(self.eval_q(x)? * self.eval_u(x)?.powi(2))
    }

    /// Max over the stencil nodes of |D²_h u + q u|, skipping nodes whose 3-point stencil
    /// touches a branch point ±r or leaves [−R, R].
    pub fn residual_check(&self, h: f64) -> Result<f64> {
        if !(h > 0.0 && h < self.rr) {
            return Err(Error::contract(format!("step h = {h} must lie in (0, R)")));
        }
        let n = (2.0 * self.rr / h).floor() as usize;
        let slack = 1e-12 * h;
        let mut worst = 0.0_f64;
        for i in 1..n {
            let x = -self.rr + i as f64 * h;
            if x + h > self.rr + slack {
                break;
            }
            if (x.abs() - self.r).abs() <= h + slack {
                continue;
            }
            let d2 = (self.eval_u(x - h)? - 2.0 * self.eval_u(x)? + self.eval_u(x + h)?) / (h * h);
            worst = worst.max((d2 + self.eval_q(x)? * self.eval_u(x)?).abs());
        }
        Ok(worst)
    }
}

/// ‖q_2m − q_m‖_p on (−R, R): the coefficients differ only on |x| < r.
pub fn coef_gap(r: f64, m: u32, p: f64) -> f64 {
    let jump = a_m(r, 2 * m) - a_m(r, m);
    if p.is_infinite() {
        jump
    } else {
        jump * (2.0 * r).powf(1.0 / p)
    }
}

/// Nodes on [−R, R] that include ±r, with spacing at most `step`.
fn sample_nodes(r: f64, rr: f64, step: f64) -> Vec<f64> {
    let seg = |a: f64, b: f64| -> Vec<f64> {
        let n = ((b - a) / step).ceil().max(1.0) as usize;
        (0..n).map(|k| a + (b - a) * k as f64 / n as f64).collect()
    };
    let mut xs = seg(-rr, -r);
    xs.extend(seg(-r, r));
    xs.extend(seg(r, rr));
    xs.push(rr);
    xs
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathologyRow {
    pub m: u32,
    pub a_m: f64,
    /// Sampled sup of |q_2m u_2m² − q_m u_m²|.
    pub data_gap: f64,
    /// (p, ‖q_2m − q_m‖_p); p = ∞ encoded as `f64::INFINITY`.
    pub coef_gaps: Vec<(f64, f64)>,
    /// ∫_{−R}^{R} q_m u_m².
    pub h_integral: f64,
    /// Smallest K with K⁻¹ ≤ q_m ≤ K.
    pub k_required: f64,
}

impl PathologyRow {
    pub fn coef_gap(&self, p: f64) -> Option<f64> {
        self.coef_gaps
            .iter()
            .find(|(pp, _)| *pp == p)
            .map(|&(_, v)| v)
    }
}

/// Sampling points per interior oscillation period.
pub const POINTS_PER_PERIOD: f64 = 40.0;

pub fn pathology_table(r: f64, rr: f64, m_max: u32, p_list: &[f64]) -> Result<Vec<PathologyRow>> {
    if m_max < 1 {
        return Err(Error::contract("m_max must be >= 1"));
    }
    if let Some(p) = p_list.iter().find(|&&p| !(p >= 1.0)) {
        return Err(Error::contract(format!(
            "norm exponent p = {p} must be >= 1"
        )));
    }
    (1..=m_max)
        .map(|m| {
            let fam = OscillatoryFamily::new(r, rr, m)?;
            let fam2 = OscillatoryFamily::new(r, rr, 2 * m)?;
            let period = 2.0 * PI / fam2.a_m.sqrt();
            let xs = sample_nodes(r, rr, period / POINTS_PER_PERIOD);
            let mut data_gap = 0.0_f64;
            let mut h_integral = 0.0;
            let mut prev: Option<(f64, f64)> = None;
            for &x in &xs {
                let f1 = fam.internal_data(x)?;
                data_gap = data_gap.max((fam2.internal_data(x)? - f1).abs());
                if let Some((px, pf)) = prev {
                    h_integral += 0.5 * (x - px) * (f1 + pf);
                }
                prev = Some((x, f1));
            }
            Ok(PathologyRow {
                m,
                a_m: fam.a_m,
                data_gap,
                coef_gaps: p_list.iter().map(|&p| (p, coef_gap(r, m, p))).collect(),
                h_integral,
                k_required: fam.a_m.max(1.0),
            })
        })
        .collect()
}

#[derive(Serialize)]
struct CsvRow {
    m: u32,
    #[serde(rename = "A_m")]
    a_m: f64,
    data_gap: f64,
    coef_gap_p1: f64,
    coef_gap_pinf: f64,
    #[serde(rename = "H_integral")]
    h_integral: f64,
    #[serde(rename = "K_required")]
    k_required: f64,
}

/// CSV with columns m, A_m, data_gap, coef_gap_p1, coef_gap_pinf, H_integral, K_required.
pub fn write_table_csv(rows: &[PathologyRow], r: f64, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.serialize(CsvRow {
            m: row.m,
            a_m: row.a_m,
            data_gap: row.data_gap,
            coef_gap_p1: row.coef_gap(1.0).unwrap_or_else(|| coef_gap(r, row.m, 1.0)),
            coef_gap_pinf: row
                .coef_gap(f64::INFINITY)
                .unwrap_or_else(|| coef_gap(r, row.m, f64::INFINITY)),
            h_integral: row.h_integral,
            k_required: row.k_required,
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branches_match_to_first_order() {
        for m in 1..=6 {
            let fam = OscillatoryFamily::new(1.3, 2.0, m).unwrap();
            for x in [fam.r, -fam.r] {
                assert!(fam.inner_u(x).abs() < 1e-12);
                assert_eq!(fam.outer_u(x), 0.0);
                assert_eq!(fam.eval_u(x).unwrap(), 0.0);
            }
            assert!((fam.inner_du(fam.r) + 1.0).abs() < 1e-12);
            assert!((fam.outer_du(fam.r) + 1.0).abs() < 1e-12);
            assert!((fam.inner_du(-fam.r) - 1.0).abs() < 1e-12);
            assert!((fam.outer_du(-fam.r) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn a_m_value() {
        let a = a_m(1.0, 1);
        assert!((a - (2.5 * PI).powi(2)).abs() <= 1e-14 * a);
        assert!((a - 61.685).abs() < 1e-3);
    }

    #[test]
    fn domain_and_parameter_errors() {
        let fam = OscillatoryFamily::new(1.0, 2.0, 1).unwrap();
        assert!(matches!(fam.eval_u(2.5), Err(Error::Domain(_))));
        assert!(OscillatoryFamily::new(2.0, 1.0, 1).is_err());
        assert!(OscillatoryFamily::new(1.0, 2.0, 0).is_err());
    }

    #[test]
    fn internal_data_at_origin_is_one() {
        let fam = OscillatoryFamily::new(1.0, 2.0, 1).unwrap();
        assert!((fam.internal_data(0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn h_integral_matches_closed_form() {
        let (r, rr) = (1.0, 2.5);
        let rows = pathology_table(r, rr, 4, &[1.0]).unwrap();
        let exact = r + (rr - r) - (2.0 * (rr - r)).sin() / 2.0;
        for row in rows {
            assert!((row.h_integral - exact).abs() < 1e-3, "{}", row.h_integral);
        }
    }

    #[test]
    fn outer_residual_is_sine_baseline() {
        let fam = OscillatoryFamily::new(0.5, 3.0, 1).unwrap();
        let h: f64 = 0.01;
        // outside the inner region the residual is |sin|·|1 − 4 sin²(h/2)/h²|
        let baseline = (1.0 - 4.0 * (h / 2.0).sin().powi(2) / (h * h)).abs();
        let x = 2.0;
        let d2 = (fam.eval_u(x - h).unwrap() - 2.0 * fam.eval_u(x).unwrap()
            + fam.eval_u(x + h).unwrap())
            / (h * h);
        let res = (d2 + fam.eval_u(x).unwrap()).abs();
        let expect = baseline * fam.eval_u(x).unwrap().abs();
        assert!((res - expect).abs() < 1e-9);
    }
}

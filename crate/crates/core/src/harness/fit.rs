//! Least-squares power-law fit err ≈ C·(ε^{1/2} + ε)^η in log-log coordinates.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Points needed for a fit with a residual estimate.
pub const MIN_FIT_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderFit {
    pub c_hat: f64,
    pub eta_hat: f64,
    /// RMS of the log residuals.
    pub residual: f64,
    /// 95% interval for η; absent for an exact two-point line.
    pub eta_ci: Option<(f64, f64)>,
    pub used: usize,
    /// Samples dropped because ε or err was zero or not finite.
    pub excluded: usize,
}

impl HolderFit {
    pub fn predict(&self, epsilon: f64) -> f64 {
        self.c_hat * abscissa(epsilon).powf(self.eta_hat)
    }

    /// err ≤ C·x^η·exp(3·residual), with a relative 1e-12 allowance for rounding.
    pub fn under_envelope(&self, epsilon: f64, err: f64) -> bool {
        err <= self.predict(epsilon) * (3.0 * self.residual).exp() * (1.0 + 1e-12)
    }
}

/// ε^{1/2} + ε.
pub fn abscissa(epsilon: f64) -> f64 {
    epsilon.sqrt() + epsilon
}

fn usable(samples: &[(f64, f64)]) -> (Vec<(f64, f64)>, usize) {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(e, r)| *e > 0.0 && *r > 0.0 && e.is_finite() && r.is_finite())
        .map(|&(e, r)| (abscissa(e).ln(), r.ln()))
        .collect();
    let excluded = samples.len() - pts.len();
    (pts, excluded)
}

fn distinct_x(pts: &[(f64, f64)]) -> usize {
    let mut xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.len()
}

/// Fit over samples of (ε, err). Needs three usable points at two or more distinct ε.
pub fn fit_holder(samples: &[(f64, f64)]) -> Result<HolderFit> {
    let (pts, excluded) = usable(samples);
    if pts.len() < MIN_FIT_POINTS || distinct_x(&pts) < 2 {
        return Err(Error::UnderdeterminedFit {
            usable: pts.len(),
            needed: MIN_FIT_POINTS,
        });
    }
    Ok(least_squares(&pts, excluded))
}

/// The line through two usable points, for sweeps with exactly two of them.
pub fn fit_two_point(samples: &[(f64, f64)]) -> Result<HolderFit> {
    let (pts, excluded) = usable(samples);
    if pts.len() != 2 || distinct_x(&pts) != 2 {
        return Err(Error::UnderdeterminedFit {
            usable: pts.len(),
            needed: 2,
        });
    }
    Ok(least_squares(&pts, excluded))
}

fn least_squares(pts: &[(f64, f64)], excluded: usize) -> HolderFit {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let eta = sxy / sxx;
    let log_c = my - eta * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - log_c - eta * p.0).powi(2)).sum();
    let eta_ci = (pts.len() > 2).then(|| {
        let dof = n - 2.0;
        let se = (ssr / dof / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, dof)
            .expect("dof > 0")
            .inverse_cdf(0.975);
        (eta - t * se, eta + t * se)
    });
    HolderFit {
        c_hat: log_c.exp(),
        eta_hat: eta,
        residual: (ssr / n).sqrt(),
        eta_ci,
        used: pts.len(),
        excluded,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted(c: f64, eta: f64) -> Vec<(f64, f64)> {
        [1e-4, 3e-4, 1e-3, 1e-2, 1e-1]
            .iter()
            .map(|&e| (e, c * abscissa(e).powf(eta)))
            .collect()
    }

    #[test]
    fn recovers_planted_model() {
        for (c, eta) in [(2.0, 0.5), (1.0, 1.0)] {
            let fit = fit_holder(&planted(c, eta)).unwrap();
            assert!((fit.c_hat - c).abs() < 1e-10);
            assert!((fit.eta_hat - eta).abs() < 1e-10);
            assert!(fit.residual < 1e-10);
        }
    }

    #[test]
    fn zeros_are_excluded_and_counted() {
        let mut s = planted(1.0, 0.7);
        s.push((0.0, 0.0));
        s.push((1e-3, 0.0));
        let fit = fit_holder(&s).unwrap();
        assert_eq!((fit.used, fit.excluded), (5, 2));
    }

    #[test]
    fn too_few_points() {
        let s = planted(1.0, 0.5);
        assert!(matches!(
            fit_holder(&s[..2]),
            Err(Error::UnderdeterminedFit { usable: 2, .. })
        ));
        let fit = fit_two_point(&s[..2]).unwrap();
        assert!((fit.eta_hat - 0.5).abs() < 1e-12);
        assert!(fit.eta_ci.is_none());
        assert!(fit_holder(&[(1e-3, 1.0), (1e-3, 2.0), (1e-3, 3.0)]).is_err());
    }
}

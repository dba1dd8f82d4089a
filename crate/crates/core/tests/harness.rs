use std::fs;
use std::path::Path;

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hybrid_stability::config::Config;
use hybrid_stability::harness::{
    abscissa, emit_report, fit_holder, render_svg, run_sweep, StabilityReport, SweepConfig,
};
use hybrid_stability::Error;

const GOLDEN_CONFIG: &str = include_str!("golden/sweep.cfg");

fn sweep(text: &str) -> StabilityReport {
    let cfg: Config = text.parse().unwrap();
    run_sweep(&SweepConfig::from_config(&cfg).unwrap()).unwrap()
}

/// Solve the 2×2 normal equations of y = a + b x directly.
fn normal_equations(pts: &[(f64, f64)]) -> (f64, f64) {
    let mut m = Matrix2::zeros();
    let mut rhs = Vector2::zeros();
    for &(e, r) in pts {
        let x = abscissa(e).ln();
        let y = r.ln();
        m += Matrix2::new(1.0, x, x, x * x);
        rhs += Vector2::new(y, x * y);
    }
    let sol = m.lu().solve(&rhs).unwrap();
    (sol[0].exp(), sol[1])
}

#[test]
fn planted_fits_are_exact() {
    let eps = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 0.5];
    for (c, eta) in [(2.0, 0.5), (1.0, 1.0), (0.3, 0.2)] {
        let pts: Vec<(f64, f64)> = eps
            .iter()
            .map(|&e| (e, c * abscissa(e).powf(eta)))
            .collect();
        let fit = fit_holder(&pts).unwrap();
        assert!((fit.c_hat - c).abs() < 1e-10 && (fit.eta_hat - eta).abs() < 1e-10);
    }
}

#[test]
fn noisy_fit_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pts: Vec<(f64, f64)> = (0..40)
        .map(|k| {
            let e = 10f64.powf(-5.0 + 4.0 * k as f64 / 39.0);
            let noise = 1.0 + 0.05 * rng.gen_range(-1.0..1.0);
            (e, 1.5 * abscissa(e).powf(0.6) * noise)
        })
        .collect();
    let fit = fit_holder(&pts).unwrap();
    let (c, eta) = normal_equations(&pts);
    assert!((fit.eta_hat - eta).abs() < 1e-10 && (fit.c_hat - c).abs() < 1e-10 * c);
    assert!((fit.eta_hat - 0.6).abs() < 0.1);
    let (lo, hi) = fit.eta_ci.unwrap();
    assert!(lo < fit.eta_hat && fit.eta_hat < hi);
    for &(e, r) in &pts {
        assert!(fit.under_envelope(e, r));
    }
}

#[test]
fn underdetermined_fits_are_errors() {
    assert!(matches!(
        fit_holder(&[(1e-3, 1.0), (1e-2, 2.0), (0.0, 0.0)]),
        Err(Error::UnderdeterminedFit {
            usable: 2,
            needed: 3
        })
    ));
    assert!(fit_holder(&[]).is_err());
}

#[test]
fn empty_report_gives_header_only_files() {
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&StabilityReport::default(), dir.path()).unwrap();
    let samples = fs::read_to_string(&files.samples).unwrap();
    assert_eq!(samples.lines().count(), 1);
    assert!(samples.starts_with("amplitude,seed,d,epsilon"));
    assert_eq!(
        fs::read_to_string(&files.diagnostics)
            .unwrap()
            .lines()
            .count(),
        1
    );
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&files.fit).unwrap()).unwrap();
    assert_eq!(json["samples"], 0);
    let svg = fs::read_to_string(&files.plot).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<circle").count(), 0);
}

#[test]
fn svg_has_one_polyline_per_fit_and_one_circle_per_sample() {
    let report = sweep(GOLDEN_CONFIG);
    let svg = render_svg(&report);
    let fits = report
        .fits
        .iter()
        .filter(|f| f.true_pair.fit.is_some())
        .count();
    let plotted = report
        .samples
        .iter()
        .filter(|s| s.epsilon > 0.0 && s.err_true > 0.0)
        .count();
    assert_eq!(fits, 2);
    assert_eq!(plotted, report.samples.len());
    assert_eq!(svg.matches("<polyline").count(), fits);
    assert_eq!(svg.matches("<circle").count(), plotted);
}

#[test]
fn sweep_matches_pinned_golden_files() {
    let report = sweep(GOLDEN_CONFIG);
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report, dir.path()).unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for name in ["samples.csv", "fit.json", "diagnostics.csv", "plot.svg"] {
        let got = fs::read(dir.path().join(name)).unwrap();
        let want = fs::read(golden.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(got == want, "{name} differs from the pinned golden file");
    }
}

#[test]
fn repeated_sweeps_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    emit_report(&sweep(GOLDEN_CONFIG), a.path()).unwrap();
    emit_report(&sweep(GOLDEN_CONFIG), b.path()).unwrap();
    for name in ["samples.csv", "fit.json", "diagnostics.csv", "plot.svg"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap()
        );
    }
}

#[test]
fn samples_are_ordered_by_amplitude_seed_and_margin() {
    let report = sweep(GOLDEN_CONFIG);
    let keys: Vec<(f64, u64, f64)> = report
        .samples
        .iter()
        .map(|s| (s.amplitude, s.seed, s.d))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    assert_eq!(keys, sorted);
    assert_eq!(keys.len(), 3 * 2 * 2);
    for pair in report.samples.chunks(2) {
        assert!(pair[1].err_true <= pair[0].err_true);
        assert!(pair[0].flags.hypothesis_ok);
    }
}

#[test]
fn hypothesis_violations_are_flagged_not_dropped() {
    // near-trivial boundary data violates the nondegeneracy bound H
    let weak = sweep("grid.n = 17\nbdry.g = const:1e-3\nsweep.amplitudes = 1e-2, 1e-1\ndiag.levels = 2\ndiag.radii = 0.1");
    assert!(weak.samples.iter().all(|s| s.flags.h_violation));
    // q ≡ 2 lies outside [1/K, K] for K = 1.5
    let stiff = sweep("grid.n = 17\nbounds.k = 1.5\nbounds.h = 0.05\nsweep.amplitudes = 1e-2, 1e-1\ndiag.levels = 2\ndiag.radii = 0.1");
    assert!(stiff.samples.iter().all(|s| s.flags.k_violation));
    assert_eq!(stiff.samples.len(), 2);
}

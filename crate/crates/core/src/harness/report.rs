//! Report files: samples.csv, fit.json, diagnostics.csv and plot.svg.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{abscissa, DFit, StabilityReport};
use crate::diagnostics::{csv_err, write_rows_csv, DiagnosticsSummary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub samples: PathBuf,
    pub fit: PathBuf,
    pub diagnostics: PathBuf,
    pub plot: PathBuf,
}

const SAMPLE_HEADER: [&str; 15] = [
    "amplitude",
    "seed",
    "d",
    "epsilon",
    "bdry_gap",
    "err_true",
    "err_recon",
    "recon_iterations",
    "hypothesis_ok",
    "weighted_lhs",
    "weighted_proof_bound",
    "l3_lhs",
    "weightq_lhs",
    "flags",
    "error",
];

#[derive(Serialize)]
struct SampleRow<'a> {
    amplitude: f64,
    seed: u64,
    d: f64,
    epsilon: f64,
    bdry_gap: f64,
    err_true: f64,
    err_recon: Option<f64>,
    recon_iterations: Option<usize>,
    hypothesis_ok: bool,
    weighted_lhs: Option<f64>,
    weighted_proof_bound: Option<f64>,
    l3_lhs: Option<f64>,
    weightq_lhs: Option<f64>,
    flags: String,
    error: Option<&'a str>,
}

#[derive(Serialize)]
struct FitJson<'a> {
    fits: &'a [DFit],
    summary: &'a DiagnosticsSummary,
    min_proof_bound_margin: Option<f64>,
    samples: usize,
    config: &'a std::collections::BTreeMap<String, String>,
}

fn write_samples(report: &StabilityReport, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    w.write_record(SAMPLE_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for s in &report.samples {
        w.serialize(SampleRow {
            amplitude: s.amplitude,
            seed: s.seed,
            d: s.d,
            epsilon: s.epsilon,
            bdry_gap: s.bdry_gap,
            err_true: s.err_true,
            err_recon: s.err_recon,
            recon_iterations: s.recon_iterations,
            hypothesis_ok: s.flags.hypothesis_ok,
            weighted_lhs: s.weighted.map(|w| w.lhs),
            weighted_proof_bound: s.weighted.map(|w| w.proof_bound),
            l3_lhs: s.weighted.map(|w| w.l3_lhs),
            weightq_lhs: s.weighted.map(|w| w.weightq_lhs),
            flags: s.flags.label(),
            error: s.flags.failed.as_deref(),
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

/// Log-log scatter of (ε^{1/2} + ε, err_true): one circle per sample with positive
/// coordinates and one polyline per successful true-pair fit.
pub fn render_svg(report: &StabilityReport) -> String {
    let d_index = |d: f64| report.fits.iter().position(|f| f.d == d).unwrap_or(0);
    let points: Vec<(f64, f64, usize)> = report
        .samples
        .iter()
        .filter(|s| s.epsilon > 0.0 && s.err_true > 0.0)
        .map(|s| {
            (
                abscissa(s.epsilon).log10(),
                s.err_true.log10(),
                d_index(s.d),
            )
        })
        .collect();

    let bounds = |vals: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        if lo.is_finite() {
            let pad = ((hi - lo) * 0.05).max(0.1);
            ((lo - pad).floor(), (hi + pad).ceil())
        } else {
            (-4.0, 0.0)
        }
    };
    let (x0, x1) = bounds(&mut points.iter().map(|p| p.0));
    let (y0, y1) = bounds(&mut points.iter().map(|p| p.1));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for k in (x0 as i64)..=(x1 as i64) {
        let x = px(k as f64);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">1e{k}</text>"#,
            HEIGHT - MARGIN + 16.0
        );
    }
    for k in (y0 as i64)..=(y1 as i64) {
        let y = py(k as f64);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{y:.2}" font-size="11" text-anchor="end">1e{k}</text>"#,
            MARGIN - 6.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">eps^(1/2) + eps</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.2})">L1 error on interior</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    for (k, f) in report.fits.iter().enumerate() {
        let Some(fit) = f.true_pair.fit else { continue };
        let color = PALETTE[k % PALETTE.len()];
        let steps = 16;
        let coords: Vec<String> = (0..=steps)
            .map(|i| {
                let x = x0 + (x1 - x0) * i as f64 / steps as f64;
                let y = (fit.c_hat.log10() + fit.eta_hat * x).clamp(y0, y1);
                format!("{:.2},{:.2}", px(x), py(y))
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>d={} C={:.4e} eta={:.4}</title></polyline>"#,
            coords.join(" "),
            f.d,
            fit.c_hat,
            fit.eta_hat
        );
    }
    for &(x, y, k) in &points {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
            px(x),
            py(y),
            PALETTE[k % PALETTE.len()]
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Write the four report files into `dir`, creating it if needed.
pub fn emit_report(report: &StabilityReport, dir: &Path) -> Result<ReportFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ReportFiles {
        samples: dir.join("samples.csv"),
        fit: dir.join("fit.json"),
        diagnostics: dir.join("diagnostics.csv"),
        plot: dir.join("plot.svg"),
    };
    write_samples(report, &files.samples)?;

    let json = serde_json::to_string_pretty(&FitJson {
        fits: &report.fits,
        summary: &report.summary,
        min_proof_bound_margin: report.min_proof_bound_margin,
        samples: report.samples.len(),
        config: &report.config,
    })
    .map_err(|e| Error::Parse(format!("fit report: {e}")))?;
    fs::write(&files.fit, json + "\n").map_err(|e| Error::io(&files.fit, e))?;

    write_rows_csv(&report.diagnostics.rows(), &files.diagnostics)?;
    fs::write(&files.plot, render_svg(report)).map_err(|e| Error::io(&files.plot, e))?;
    Ok(files)
}

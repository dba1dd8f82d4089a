use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use hybrid_stability::config::{Config, FieldSpec};
use hybrid_stability::diagnostics::{diagnose_pair, write_rows_csv};
use hybrid_stability::fields::{io, Grid, ScalarField};
use hybrid_stability::harness::{self, emit_report, SweepConfig};
use hybrid_stability::synth::{self, PairOptions, Provenance};
use hybrid_stability::{counterexample, forward, recon, Error, Result};

#[derive(Parser)]
#[command(
    name = "hstab",
    version,
    about = "Stability experiments for q from qu² data"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve Δu + qu = 0 with Dirichlet data g.
    Forward {
        /// Coefficient: a field file or a closed-form spec such as `const:2`.
        #[arg(long)]
        q: String,
        /// Boundary data spec (`cos-product`, `const:1`, `file:<path>`, ...).
        #[arg(long)]
        g: String,
        #[arg(long)]
        out: PathBuf,
        /// Grid nodes per axis when q is closed-form.
        #[arg(long, default_value_t = 65)]
        n: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Build one perturbed pair from a config and write it as a pair directory.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "pair")]
        out: PathBuf,
    },
    /// Recover u and q from internal data F and boundary data g.
    Reconstruct {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Unique-continuation diagnostics of a stored pair.
    Diagnose {
        /// Path to pair.json.
        #[arg(long)]
        pair: PathBuf,
        /// Output directory; defaults to the pair directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Tabulate the oscillatory one-dimensional family.
    Counterexample {
        #[arg(long)]
        r: f64,
        #[arg(long = "R")]
        big_r: f64,
        #[arg(long)]
        mmax: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an amplitude × seed sweep and write the report files.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    path.map(Config::load)
        .unwrap_or_else(|| Ok(Config::default()))
}

/// A field given as a file path, `file:<path>`, or a closed-form spec on `grid`.
fn load_field(arg: &str, grid: &Grid) -> Result<ScalarField> {
    if Path::new(arg).is_file() {
        return io::read_field(Path::new(arg));
    }
    match arg.parse::<FieldSpec>()? {
        FieldSpec::File(p) => io::read_field(&p),
        spec => spec.field(grid),
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Serialize)]
struct ForwardManifest {
    residual_linf: f64,
    iterations: usize,
    method: forward::SolveMethod,
    eigen_gap_estimate: Option<f64>,
    degenerate: bool,
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Forward {
            q,
            g,
            out,
            n,
            config,
        } => {
            let cfg = load_config(config.as_deref())?;
            let q = load_field(&q, &Grid::unit_square(n)?)?;
            let g = g.parse::<FieldSpec>()?.trace(q.grid())?;
            let mut opts = harness::solver_from(&cfg)?;
            opts.report_gap = true;
            let rep = forward::solve_dirichlet(&q, &g, &opts)?;
            io::write_field(&out, &rep.u)?;
            let summary = ForwardManifest {
                residual_linf: rep.residual_linf,
                iterations: rep.iterations,
                method: rep.method,
                eigen_gap_estimate: rep.eigen_gap_estimate,
                degenerate: rep.degenerate,
            };
            write_json(&summary, &out.with_extension("json"))?;
            println!(
                "residual {:.3e} after {} iterations ({:?})",
                rep.residual_linf, rep.iterations, rep.method
            );
        }
        Cmd::Synth { config, out } => {
            let cfg = Config::load(&config)?;
            let sc = SweepConfig::from_config(&cfg)?;
            let amplitude = cfg.parse_or("synth.amplitude", sc.amplitudes[0])?;
            let seed = cfg.parse_or("synth.seed", sc.seed_base)?;
            let q1 = sc.base_q.field(&sc.grid)?;
            let g = sc.g.trace(&sc.grid)?;
            let pert =
                synth::perturb_coefficient(&q1, sc.mode, amplitude, seed, &sc.bounds, &sc.shape)?;
            let opts = PairOptions {
                solver: sc.solver,
                bdry_jitter: sc.jitter,
                provenance: Provenance {
                    seed,
                    mode: Some(sc.mode),
                    amplitude: Some(amplitude),
                },
            };
            let pair = synth::make_pair(&q1, &pert.q, &g, &sc.bounds, &opts)?;
            let path = synth::write_pair(&pair, &out)?;
            println!(
                "eps {:.6e}, boundary gap {:.3e}, hypothesis_ok {} -> {}",
                pair.epsilon,
                pair.bdry_gap,
                pair.flags.hypothesis_ok,
                path.display()
            );
        }
        Cmd::Reconstruct { f, g, out, config } => {
            let cfg = load_config(config.as_deref())?;
            let f = io::read_field(&f)?;
            let g = g.parse::<FieldSpec>()?.trace(f.grid())?;
            let d = cfg
                .list_or("sweep.d", &[0.1])?
                .first()
                .copied()
                .unwrap_or(0.1);
            let bounds = harness::bounds_from(&cfg, d)?;
            let res = recon::reconstruct(&f, &g, &bounds, &harness::recon_from(&cfg)?)?;
            mkdir(&out)?;
            io::write_field(&out.join("q_hat.field"), &res.q_hat)?;
            io::write_field(&out.join("u_hat.field"), &res.u_hat)?;
            write_json(&res.manifest(), &out.join("recon.json"))?;
            println!(
                "{} iterations, final update {:.3e}, converged {}",
                res.iterations, res.final_update_linf, res.converged
            );
        }
        Cmd::Diagnose { pair, out, config } => {
            let cfg = load_config(config.as_deref())?;
            let p = synth::read_pair(&pair)?;
            let report = diagnose_pair(&p, &harness::diagnostics_from(&cfg)?)?;
            let dir = out.unwrap_or_else(|| pair.parent().unwrap_or(Path::new(".")).to_path_buf());
            mkdir(&dir)?;
            write_rows_csv(&report.rows(), &dir.join("diagnostics.csv"))?;
            write_json(&report, &dir.join("diagnostics.json"))?;
            let s = report.summary();
            println!(
                "max doubling {:?}, min propagation {:?}, best delta {:?}, proof-bound margin {:?}",
                s.max_doubling, s.min_propagation, s.best_delta, s.proof_bound_margin
            );
        }
        Cmd::Counterexample {
            r,
            big_r,
            mmax,
            out,
        } => {
            let rows = counterexample::pathology_table(r, big_r, mmax, &[1.0, f64::INFINITY])?;
            counterexample::write_table_csv(&rows, r, &out)?;
            let worst = rows.iter().map(|x| x.data_gap).fold(0.0, f64::max);
            println!("{} rows, max data gap {worst:.6}", rows.len());
        }
        Cmd::Sweep { config, out } => {
            let sc = SweepConfig::from_config(&Config::load(&config)?)?;
            let dir = out
                .or_else(|| sc.out.clone())
                .ok_or_else(|| Error::Parse("sweep needs --out or sweep.out".into()))?;
            let report = harness::run_sweep(&sc)?;
            let files = emit_report(&report, &dir)?;
            for f in &report.fits {
                match f.true_pair.fit {
                    Some(fit) => println!(
                        "d = {}: C = {:.4e}, eta = {:.4}, residual {:.3e}, outside envelope {}",
                        f.d, fit.c_hat, fit.eta_hat, fit.residual, f.true_pair.outside_envelope
                    ),
                    None => println!(
                        "d = {}: no fit ({})",
                        f.d,
                        f.true_pair.error.as_deref().unwrap_or("unknown")
                    ),
                }
            }
            println!("report in {}", files.fit.parent().unwrap_or(&dir).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Command-line front door. Exit codes: 0 success, 1 I/O failure,
//! 2 configuration error, 3 precondition violation, 4 numerical
//! non-convergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use gausslt::config::load_field_spec;
use gausslt::covariance::probe_p2;
use gausslt::csvio::{fmt17, write_csv};
use gausslt::lemma_kernels::{oracle_quad2d, sample_problem};
use gausslt::moments::{mean_l, second_moment_at_zero, second_moment_general, QuadPlan};
use gausslt::pathsim::{grid_bias_suspected, mc_moments, PathGrid};
use gausslt::ratelab::{
    fit_slope, sweep, x_shape_probe, McParams, SweepOptions, SweepRecord, SweepSource,
};
use gausslt::Error;

const DEFAULT_SEED: u64 = 0x5EED;

#[derive(Parser)]
#[command(
    name = "gausslt",
    about = "Regularized local-time derivatives of (2,d)-Gaussian fields",
    after_help = "Exit codes: 0 success, 1 I/O, 2 configuration error, \
                  3 precondition violation, 4 numerical non-convergence."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutArg {
    /// Output CSV path.
    #[arg(long, short, default_value = "out.csv")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Check the closed-form Gaussian integrals against brute-force quadrature.
    LemmaVerify {
        /// Random parameter draws per form.
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Empirical increment-past covariance decay of model1 in a spec.
    P2Probe {
        spec: PathBuf,
        /// Comma-separated relative-increment factors.
        #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32,64")]
        gammas: Vec<f64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Second moment of L^(k)_eps by quadrature for one spec.
    Moment {
        spec: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Monte Carlo moments from exact Gaussian path samples.
    Simulate {
        spec: PathBuf,
        /// Time-grid points per process.
        #[arg(long, default_value_t = 256)]
        grid_n: usize,
        #[arg(long, default_value_t = 2000)]
        replicates: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Second-moment sweep over a decreasing eps grid with rate ratios.
    Sweep {
        spec: PathBuf,
        /// Comma-separated strictly decreasing eps values.
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        /// quad or mc.
        #[arg(long, default_value = "quad")]
        source: String,
        #[arg(long, default_value_t = 256)]
        grid_n: usize,
        #[arg(long, default_value_t = 2000)]
        replicates: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Worker threads for sweep points (env GAUSSLT_JOBS as fallback).
        #[arg(long)]
        jobs: Option<usize>,
        /// Permit quadrature eps below the default 1e-4 floor.
        #[arg(long)]
        allow_small_eps: bool,
        #[command(flatten)]
        out: OutArg,
    },
    /// Log-log slope of moment against eps from a sweep CSV.
    Fit {
        /// CSV produced by `sweep`.
        records: PathBuf,
    },
    /// Moments along the first coordinate axis at fixed eps.
    Xshape {
        spec: PathBuf,
        /// Comma-separated |x| magnitudes.
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5")]
        xs: Vec<f64>,
        #[command(flatten)]
        out: OutArg,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::InvalidParameter(_) | Error::Json(_) => 2,
                Error::Precondition(_) => 3,
                Error::NonConvergence { .. }
                | Error::Factorization { .. }
                | Error::InternalConsistency(_) => 4,
                Error::Io(_) => 1,
            })
        }
    }
}

fn run(cmd: Command) -> gausslt::Result<()> {
    match cmd {
        Command::LemmaVerify { count, seed, out } => {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut rows = Vec::with_capacity(3 * count);
            let mut max_relerr = 0.0_f64;
            for kind in 1u8..=3 {
                for draw in 0..count {
                    let problem = sample_problem(kind, &mut rng)?;
                    let closed = problem.closed();
                    let oracle = oracle_quad2d(&problem)?;
                    let relerr = (closed - oracle).abs() / oracle.abs().max(1e-12);
                    max_relerr = max_relerr.max(relerr);
                    rows.push(vec![
                        problem.label().to_string(),
                        draw.to_string(),
                        fmt17(closed),
                        fmt17(oracle),
                        fmt17(relerr),
                    ]);
                }
            }
            write_csv(&out.out, "form,draw,closed,oracle,relerr", &rows)?;
            println!(
                "lemma-verify: {} draws per form, max relative error {max_relerr:.3e} -> {}",
                count,
                out.out.display()
            );
            Ok(())
        }
        Command::P2Probe { spec, gammas, out } => {
            let spec = load_field_spec(&spec)?;
            let report = probe_p2(&spec.model1, spec.horizon, &gammas, 64)?;
            let rows: Vec<Vec<String>> = report
                .gammas
                .iter()
                .zip(&report.betas)
                .map(|(&g, &b)| vec![fmt17(g), fmt17(b)])
                .collect();
            write_csv(&out.out, "gamma,beta", &rows)?;
            println!(
                "p2-probe: beta({}) = {:.3e}, beta({}) = {:.3e} -> {}",
                report.gammas[0],
                report.betas[0],
                report.gammas[report.gammas.len() - 1],
                report.betas[report.betas.len() - 1],
                out.out.display()
            );
            Ok(())
        }
        Command::Moment { spec, out } => {
            let spec = load_field_spec(&spec)?;
            let plan = QuadPlan::default();
            let est = if spec.is_origin() {
                second_moment_at_zero(&spec, &plan)?
            } else {
                second_moment_general(&spec, &plan)?
            };
            let mean = mean_l(&spec, &plan)?;
            write_csv(
                &out.out,
                "eps,moment,mean,refinements",
                &[vec![
                    fmt17(spec.eps),
                    fmt17(est.value),
                    fmt17(mean),
                    est.refinements.to_string(),
                ]],
            )?;
            println!(
                "moment: eps = {}, E[L^2] = {:.6e}, E[L] = {:.6e} -> {}",
                spec.eps,
                est.value,
                mean,
                out.out.display()
            );
            Ok(())
        }
        Command::Simulate {
            spec,
            grid_n,
            replicates,
            seed,
            out,
        } => {
            let spec = load_field_spec(&spec)?;
            let grid = PathGrid::new(grid_n, spec.horizon)?;
            if grid_bias_suspected(&spec, &grid) {
                eprintln!(
                    "warning: eps = {} is below the squared increment scale of a \
                     {}-point grid; the estimate may be biased (increase --grid-n)",
                    spec.eps, grid_n
                );
            }
            let est = mc_moments(&spec, &grid, replicates, seed)?;
            write_csv(
                &out.out,
                "eps,mean,second_moment,stderr_second_moment,replicates,seed",
                &[vec![
                    fmt17(spec.eps),
                    fmt17(est.mean),
                    fmt17(est.second_moment),
                    fmt17(est.stderr_second_moment),
                    est.replicates.to_string(),
                    est.seed.to_string(),
                ]],
            )?;
            println!(
                "simulate: {} replicates, E[L^2] = {:.6e} +/- {:.2e} -> {}",
                est.replicates,
                est.second_moment,
                est.stderr_second_moment,
                out.out.display()
            );
            Ok(())
        }
        Command::Sweep {
            spec,
            eps,
            source,
            grid_n,
            replicates,
            seed,
            jobs,
            allow_small_eps,
            out,
        } => {
            let spec = load_field_spec(&spec)?;
            let source = match source.as_str() {
                "quad" => SweepSource::Quad,
                "mc" => SweepSource::Mc,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "source must be quad or mc, got {other}"
                    )))
                }
            };
            let jobs = jobs
                .or_else(|| {
                    std::env::var("GAUSSLT_JOBS")
                        .ok()
                        .and_then(|v| v.parse().ok())
                })
                .unwrap_or(1);
            let opts = SweepOptions {
                source,
                mc: (source == SweepSource::Mc).then_some(McParams {
                    grid_n,
                    replicates,
                    seed,
                }),
                jobs,
                allow_small_eps,
            };
            let records = sweep(&spec, &eps, &opts, &QuadPlan::default())?;
            write_sweep_csv(&out.out, &records)?;
            let ratios: Vec<f64> = records.iter().map(|r| r.ratio).collect();
            println!(
                "sweep: {} points, ratio range [{:.4e}, {:.4e}] -> {}",
                records.len(),
                ratios.iter().copied().fold(f64::INFINITY, f64::min),
                ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                out.out.display()
            );
            Ok(())
        }
        Command::Fit { records } => {
            let recs = read_sweep_csv(&records)?;
            let slope = fit_slope(&recs)?;
            println!("fit: slope of log(moment) vs log(eps) = {slope:.6}");
            Ok(())
        }
        Command::Xshape { spec, xs, out } => {
            let spec = load_field_spec(&spec)?;
            let report = x_shape_probe(&spec, &xs, &QuadPlan::default())?;
            let rows: Vec<Vec<String>> = report
                .points
                .iter()
                .map(|&(x, m)| vec![fmt17(x), fmt17(m)])
                .collect();
            write_csv(&out.out, "x,moment", &rows)?;
            println!(
                "xshape: {} points, fitted log c1 = {:.4}, c2 = {:.4} -> {}",
                report.points.len(),
                report.log_c1,
                report.c2,
                out.out.display()
            );
            Ok(())
        }
    }
}

fn write_sweep_csv(path: &std::path::Path, records: &[SweepRecord]) -> gausslt::Result<()> {
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                fmt17(r.eps),
                fmt17(r.moment),
                fmt17(r.h),
                fmt17(r.ratio),
                r.source.to_string(),
            ]
        })
        .collect();
    write_csv(path, "eps,moment,h,ratio,source", &rows)
}

fn read_sweep_csv(path: &std::path::Path) -> gausslt::Result<Vec<SweepRecord>> {
    let body = std::fs::read_to_string(path)?;
    let mut lines = body.lines();
    match lines.next() {
        Some("eps,moment,h,ratio,source") => {}
        other => {
            return Err(Error::InvalidParameter(format!(
                "expected sweep CSV header, got {other:?}"
            )))
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::InvalidParameter(format!(
                "row {}: expected 5 fields, got {}",
                i + 2,
                fields.len()
            )));
        }
        let num = |s: &str, name: &str| {
            s.parse::<f64>().map_err(|_| {
                Error::InvalidParameter(format!("row {}: bad {name} value {s:?}", i + 2))
            })
        };
        records.push(SweepRecord {
            eps: num(fields[0], "eps")?,
            moment: num(fields[1], "moment")?,
            h: num(fields[2], "h")?,
            ratio: num(fields[3], "ratio")?,
            source: match fields[4] {
                "QUAD" => SweepSource::Quad,
                "MC" => SweepSource::Mc,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "row {}: unknown source {other:?}",
                        i + 2
                    )))
                }
            },
        });
    }
    Ok(records)
}

//! `ks`: energies, metric differentials and Dirichlet solves on sampled spaces.
//!
//! Exit codes: 0 success, 1 I/O, 2 validation or failed audit, 3 solver
//! did not converge. Reports go to stdout, warnings to stderr, and files to
//! `--out` when given.

mod commands;
mod io;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use ks_core::dirichlet::RelaxMode;
use ks_core::seminorm::{Family, Quadrature};
use ks_core::synth::FixtureSpec;

use crate::io::{CliResult, Failure, Output};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "ks", version, about = "Korevaar-Schoen energies on sampled metric measure spaces")]
struct Cli {
    /// Worker threads for per-point evaluations (0 picks the core count).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Format of the report printed on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Directory receiving the output files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Triangle audit, doubling constant and density ratios of a space.
    SpaceCheck {
        #[arg(long)]
        space: PathBuf,
        /// Largest radius of the doubling scan (default 40 median spacings).
        #[arg(long)]
        radius: Option<f64>,
        /// Center of the density ratio scan.
        #[arg(long, default_value_t = 0)]
        point: usize,
        /// Dimension for the density ratios (default: ambient dimension).
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Energy sweep over scales with extrapolation to zero scale.
    Energy {
        #[arg(long)]
        space: Option<PathBuf>,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Comma-separated scales (default: half-integer multiples of the spacing).
        #[arg(long, value_delimiter = ',')]
        scales: Option<Vec<f64>>,
        /// JSON list of indices restricting the balls.
        #[arg(long)]
        omega: Option<PathBuf>,
    },
    /// Local metric-differential fits and their p-sizes.
    Mdiff {
        #[arg(long)]
        space: Option<PathBuf>,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        atlas: PathBuf,
        /// Comma-separated point indices (default: all).
        #[arg(long, value_delimiter = ',')]
        points: Option<Vec<usize>>,
        #[arg(long, default_value = "quadratic", value_parser = Family::from_str)]
        family: Family,
        /// Comma-separated fit radii; one fit per radius and point.
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Seed of the quadrature shift.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve a discrete Dirichlet problem.
    Dirichlet {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, value_parser = RelaxMode::from_str)]
        mode: Option<RelaxMode>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_sweeps: Option<usize>,
        /// Seed of the uniqueness audit's second start.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Numerical audits.
    Verify {
        #[command(subcommand)]
        check: Check,
    },
    /// Generate a synthetic fixture into --out.
    Synth {
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long)]
        resolution: usize,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Subcommand)]
enum Check {
    /// Seeded CAT(0) comparison and two-geodesic inequalities.
    Cat0 {
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Hilbert-Schmidt and operator-norm identities for the 2-size.
    SeminormIdentities {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        forms: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> CliResult<Option<Failure>> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Failure::Invalid(format!("thread pool: {e}")))?;
    let out = Output::new(cli.out.as_ref())?;
    let (report, status) = match cli.command {
        Command::SpaceCheck {
            space,
            radius,
            point,
            dim,
        } => commands::space_check(&space, radius, point, dim, &out)?,
        Command::Energy {
            space,
            map,
            target,
            p,
            scales,
            omega,
        } => commands::energy(
            commands::EnergyArgs {
                space: space.as_ref(),
                map: &map,
                target: target.as_ref(),
                p,
                scales,
                omega: omega.as_ref(),
            },
            &out,
        )?,
        Command::Mdiff {
            space,
            map,
            target,
            atlas,
            points,
            family,
            radii,
            p,
            seed,
        } => {
            let mut quadrature = Quadrature::default();
            if let Some(s) = seed {
                quadrature.seed = s;
            }
            commands::mdiff(
                commands::MdiffArgs {
                    space: space.as_ref(),
                    map: &map,
                    target: target.as_ref(),
                    atlas: &atlas,
                    points,
                    family,
                    radii,
                    p,
                    quadrature,
                },
                &out,
            )?
        }
        Command::Dirichlet {
            problem,
            mode,
            tol,
            max_sweeps,
            seed,
        } => commands::dirichlet(
            commands::DirichletArgs {
                problem: &problem,
                mode,
                tol,
                max_sweeps,
                seed,
            },
            &out,
        )?,
        Command::Verify { check } => match check {
            Check::Cat0 { target, samples, seed } => commands::verify_cat0(&target, samples, seed, &out)?,
            Check::SeminormIdentities { dims, forms, seed } => {
                commands::verify_identities(&dims, forms, seed, &out)?
            }
        },
        Command::Synth {
            family,
            dim,
            resolution,
            epsilon,
            seed,
        } => {
            let spec = FixtureSpec {
                family: commands::parse_family(&family)?,
                dim,
                resolution,
                epsilon,
                seed,
            };
            commands::synth(spec, &out)?
        }
    };
    let text = report.render(cli.format)?;
    std::io::stdout()
        .write_all(text.as_bytes())
        .map_err(|e| Failure::Io(format!("stdout: {e}")))?;
    Ok(status)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(f)) | Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code() as u8)
        }
    }
}

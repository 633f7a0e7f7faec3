//! Command-line front end for the axisym pipeline.
//!
//! Every subcommand reads and writes the library's text formats. Exit status
//! is 0 on success, 1 on a usage error and 2 on a data or numeric error.
//! Diagnostics go to standard error; results go to the named output files or,
//! when no file is given, to standard output.

mod commands;
mod verify;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use axisym::Execution;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "axisym", version, about = "Axially symmetric covariance models for satellite swath data")]
struct Cli {
    /// Maximum number of worker threads.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate an observation file and rewrite it in canonical form.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Unit of the value column written.
        #[arg(long, value_enum, default_value_t = Unit::LogOzone)]
        unit: Unit,
    },
    /// Fit the harmonic mean regression to bin averages.
    MeanFit {
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use only the zonal regressors.
        #[arg(long)]
        zonal: bool,
    },
    /// Subtract a fitted mean surface from observations.
    Residuals {
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        mean: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Binned within-orbit (or lagged cross-orbit) empirical variogram.
    Variogram {
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Pair each orbit with the one this many positions later.
        #[arg(long, allow_hyphen_values = true)]
        lag: Option<i64>,
        #[command(flatten)]
        pairs: PairArgs,
    },
    /// Weighted least-squares fit of a harmonic model to a variogram.
    WlsFit {
        /// Truncation degree.
        #[arg(long = "n", value_parser = clap::value_parser!(u16).range(0..=30))]
        n: u16,
        #[arg(long)]
        variogram: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Starting model; defaults to the projected linear solution.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the variogram table with the fitted model's semivariance.
        #[arg(long)]
        emit_gamma_grid: Option<PathBuf>,
        #[command(flatten)]
        optim: OptimArgs,
    },
    /// Print the Gaussian log-likelihood of observations under a model.
    Loglik {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        obs: PathBuf,
        /// Set the first column of A_0 to zero before evaluating.
        #[arg(long)]
        zero_a0_first_column: bool,
    },
    /// Maximum-likelihood fit.
    Mle {
        #[arg(long)]
        obs: PathBuf,
        #[arg(long, value_enum)]
        kind: MleKind,
        /// Truncation degree of a harmonic fit.
        #[arg(long = "n", required_if_eq("kind", "harmonic"), value_parser = clap::value_parser!(u16).range(0..=30))]
        n: Option<u16>,
        /// Starting harmonic model.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Hold the first column of A_0 at zero.
        #[arg(long)]
        freeze_a0_first_column: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        optim: OptimArgs,
    },
    /// Simple kriging of residuals at target points.
    Krige {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        obs: PathBuf,
        /// File of `lat_deg lon_deg` rows.
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-orbit gridded median product.
    Level25 {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        mean: PathBuf,
        /// Residual observations.
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = -62.5, allow_hyphen_values = true)]
        lat_min: f64,
        #[arg(long, default_value_t = -57.5, allow_hyphen_values = true)]
        lat_max: f64,
        #[arg(long, default_value_t = 1.0, value_parser = positive)]
        lat_step: f64,
        #[arg(long, default_value_t = 5.0, value_parser = positive)]
        lon_step: f64,
        /// Lower edge of the latitude window of observations used.
        #[arg(long, default_value_t = -65.0, allow_hyphen_values = true)]
        window_lo: f64,
        #[arg(long, default_value_t = -55.0, allow_hyphen_values = true)]
        window_hi: f64,
        /// Comma-separated orbit ids to process; all when absent.
        #[arg(long, value_delimiter = ',')]
        include: Option<Vec<u32>>,
    },
    /// Simulate a harmonic model on synthetic swaths.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        orbits: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use one field draw for every orbit.
        #[arg(long)]
        shared: bool,
        /// Add this mean surface and write log values.
        #[arg(long)]
        mean: Option<PathBuf>,
        #[command(flatten)]
        swath: SwathArgs,
    },
    /// Run the numerical cross-checks and print a pass/fail table.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Unit {
    LogOzone,
    OzoneDu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MleKind {
    White,
    Exp,
    Harmonic,
}

#[derive(Args, Debug)]
struct OptimArgs {
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Gradient tolerance.
    #[arg(long, default_value_t = 1e-6, value_parser = positive)]
    gtol: f64,
    /// Relative objective-change tolerance.
    #[arg(long, default_value_t = 1e-10, value_parser = positive)]
    rel_tol: f64,
}

#[derive(Args, Debug)]
struct PairArgs {
    /// Largest latitude offset between paired points, degrees.
    #[arg(long, value_parser = positive)]
    max_lat_offset: Option<f64>,
    /// Largest longitude offset between paired points, degrees.
    #[arg(long, value_parser = positive)]
    max_lon_offset: Option<f64>,
}

#[derive(Args, Debug)]
struct SwathArgs {
    #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u32).range(2..))]
    scans: u32,
    #[arg(long, default_value_t = 35, value_parser = clap::value_parser!(u32).range(1..))]
    cross_track: u32,
    #[arg(long, default_value_t = 99.0)]
    inclination: f64,
    #[arg(long, default_value_t = 25.0)]
    half_width: f64,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(_) => Err("must be a positive number".into()),
        Err(e) => Err(e.to_string()),
    }
}

/// A failed command: bad usage or bad data.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
}

type CmdResult = Result<(), Failure>;

/// Output buffer and notices of one run.
struct Ctx {
    exec: Execution,
    out: Vec<u8>,
    notes: Vec<String>,
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// As [`run`] with explicit output and diagnostic streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    1
                }
            };
        }
    };
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let (result, ctx) = match in_pool(cli.threads, move || {
        let mut ctx = Ctx { exec, out: Vec::new(), notes: Vec::new() };
        let r = commands::dispatch(cli.command, &mut ctx);
        (r, ctx)
    }) {
        Ok(v) => v,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            return 2;
        }
    };
    let _ = out.write_all(&ctx.out);
    let _ = out.flush();
    for n in &ctx.notes {
        let _ = writeln!(err, "{n}");
    }
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
        Err(Failure::Data(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
    }
}

#[cfg(feature = "parallel")]
fn in_pool<R: Send>(threads: Option<u16>, f: impl FnOnce() -> R + Send) -> Result<R, String> {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| format!("cannot start {n} worker threads: {e}")),
        None => Ok(f()),
    }
}

#[cfg(not(feature = "parallel"))]
fn in_pool<R: Send>(_threads: Option<u16>, f: impl FnOnce() -> R + Send) -> Result<R, String> {
    Ok(f())
}

//! Argument handling for the `rmx` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rmx_core::suite::{run_suites, summary_table, write_report, RunConfig};
use rmx_core::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rmx", about = "Numerical verification of R-matrix identities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the identity suites and report residuals.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Comma-separated: scalar, rmatrix-basic, nth-order, applications, all.
    #[arg(long)]
    suite: Option<String>,
    /// rational (Yang) or elliptic (Belavin).
    #[arg(long)]
    kind: Option<String>,
    /// Site dimension.
    #[arg(long = "N")]
    site_dim: Option<String>,
    #[arg(long = "n-max")]
    n_max: Option<String>,
    /// Modular parameter as `a+bi`.
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<String>,
    /// Planck constant as `a+bi`, or `random`.
    #[arg(long, allow_hyphen_values = true)]
    hbar: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    /// Tolerance override `name=value`; also accepted as `--tol.<name> value`.
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    tol: Vec<String>,
    #[arg(long = "size-cap")]
    size_cap: Option<String>,
    #[arg(long = "work-budget")]
    work_budget: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    deterministic: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    parallel: Option<String>,
    /// Where to write the JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Rewrites `--tol.<name> v` and `--tol.<name>=v` into `--tol <name>=v`.
fn expand_tol_flags(args: Vec<OsString>) -> Vec<OsString> {
    let mut out = Vec::with_capacity(args.len());
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let Some(rest) = arg.to_str().and_then(|s| s.strip_prefix("--tol.")) else {
            out.push(arg);
            continue;
        };
        let pair = if rest.contains('=') {
            rest.to_string()
        } else {
            let value = iter
                .next()
                .map(|v| v.to_string_lossy().into_owned())
                .unwrap_or_default();
            format!("{rest}={value}")
        };
        out.push("--tol".into());
        out.push(pair.into());
    }
    out
}

/// Builds the run configuration from `argv` (including the program name).
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig, Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args = expand_tol_flags(argv.into_iter().map(Into::into).collect());
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Usage(e.to_string()))?;
    let Command::Verify(v) = cli.command;
    let mut config = RunConfig::default();
    if let Some(path) = &v.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        config.apply_file_text(&text)?;
    }
    let flags = [
        ("suite", &v.suite),
        ("kind", &v.kind),
        ("N", &v.site_dim),
        ("n-max", &v.n_max),
        ("tau", &v.tau),
        ("hbar", &v.hbar),
        ("seed", &v.seed),
        ("samples", &v.samples),
        ("size-cap", &v.size_cap),
        ("work-budget", &v.work_budget),
        ("deterministic", &v.deterministic),
        ("parallel", &v.parallel),
    ];
    for (key, value) in flags {
        if let Some(value) = value {
            config.set(key, value)?;
        }
    }
    for pair in &v.tol {
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("--tol expects name=value, got '{pair}'")))?;
        config.set(&format!("tol.{name}"), value)?;
    }
    if let Some(path) = v.report {
        config.report_path = Some(path);
    }
    config.validate()?;
    Ok(config)
}

/// Exit code for an error that stopped the run.
pub fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

/// Parses, runs, prints the table to `out`, writes the report, and returns
/// the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let config = match parse_config(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return error_exit_code(&e);
        }
    };
    let report = match run_suites(&config) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return error_exit_code(&e);
        }
    };
    let _ = write!(out, "{}", summary_table(&report));
    if let Some(path) = &config.report_path {
        if let Err(e) = write_report(&report, path) {
            let _ = writeln!(err, "cannot write report {}: {e}", path.display());
            return EXIT_IO;
        }
    }
    report.exit_code()
}

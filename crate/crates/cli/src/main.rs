//! `hcma`: batch driver for the Hessian-quotient Dirichlet solver.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 solver failure,
//! 3 verification failure, 4 lemma violation. Every run writes
//! `report.json` into the output directory.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use hcma_core::io::{write_report, ReportDoc};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;
pub const EXIT_LEMMA: i32 = 4;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(name = "hcma", version, about = "Solve and verify complex Hessian quotient Dirichlet problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (default: `output_dir` from the config, else `hcma-out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Single-threaded, bit-reproducible execution.
    #[arg(long, global = true)]
    pub serial: bool,

    /// Seed for Monte-Carlo commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Dotted config override, e.g. `problem.m=13` (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve the configured problem and write `u.field`.
    Solve,
    /// Manufactured-solution refinement study; writes `mms.csv`.
    Mms,
    /// Check a solution against the comparison principle and the lemma inequality.
    Verify {
        #[arg(long)]
        solution: PathBuf,
    },
    /// Monte-Carlo calibration and scan of the pointwise concavity lemma.
    LemmaCheck {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        #[arg(long, default_value_t = 1.0)]
        sup_psi: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Use this theta instead of the calibrated one.
        #[arg(long)]
        theta: Option<f64>,
        /// Use this W threshold instead of the calibrated one.
        #[arg(long = "N")]
        n_threshold: Option<f64>,
        /// Draw the seed from the OS instead of the fixed default.
        #[arg(long)]
        randomize: bool,
    },
    /// Torsion, curvature and commutation identities of a built-in metric.
    GeomCheck {
        #[arg(long)]
        metric: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        params: Vec<f64>,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Mms => "mms",
            Command::Verify { .. } => "verify",
            Command::LemmaCheck { .. } => "lemma-check",
            Command::GeomCheck { .. } => "geom-check",
        }
    }
}

/// `--out` scraped from raw arguments when clap itself rejects them.
fn raw_out_dir(args: &[String]) -> Option<PathBuf> {
    args.iter().enumerate().find_map(|(i, a)| match a.strip_prefix("--out") {
        Some("") => args.get(i + 1).map(PathBuf::from),
        Some(rest) => rest.strip_prefix('=').map(PathBuf::from),
        None => None,
    })
}

fn finish(report: &ReportDoc, out: &std::path::Path) -> ExitCode {
    let path = out.join("report.json");
    if let Err(e) = std::fs::create_dir_all(out).map_err(hcma_core::Error::from).and_then(|_| write_report(report, &path)) {
        eprintln!("error: could not write {}: {e}", path.display());
    }
    ExitCode::from(report.exit_code as u8)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            let mut report = ReportDoc::new("usage");
            report.fail(EXIT_CONFIG, e.to_string());
            return finish(&report, &raw_out_dir(&args).unwrap_or_else(|| PathBuf::from(commands::DEFAULT_OUT)));
        }
    };

    if cli.serial {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
    }

    let start = Instant::now();
    let mut report = ReportDoc::new(cli.command.name());
    let out = commands::run(&cli, &mut report);
    report.timing.total_seconds = start.elapsed().as_secs_f64();
    if let Some(msg) = &report.error {
        eprintln!("error: {msg}");
    }
    finish(&report, &out)
}

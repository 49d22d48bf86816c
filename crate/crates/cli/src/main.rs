//! `lrfim`: exact and approximate ground states of long-range random-field
//! Ising models, and the MIS reduction pipeline.
//!
//! Results go to stdout as one JSON document (CSV for sweeps and
//! benchmarks); logs and summaries go to stderr. Exit codes: 0 ok, 1 a
//! checked bound failed, 2 bad input, 3 spin-count guard exceeded.

mod commands;
mod error;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lrfim::exact::SolverOptions;
use lrfim::verify::{DEFAULT_SAMPLES, DEFAULT_SEED};

use commands::{Globals, Output};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "lrfim", version, about = "Long-range random-field Ising model toolkit")]
struct Cli {
    /// Energy tolerance for ground-state ties, overriding the model file.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Seed for sampled verification and generated instances.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads; defaults to every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Largest spin count solved by exhaustive enumeration.
    #[arg(long = "limit-n", global = true, default_value_t = 30)]
    limit_n: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact ground states by exhaustive enumeration.
    Solve {
        #[arg(long)]
        model: PathBuf,
        /// Report the k lowest states and their gap instead.
        #[arg(long)]
        k: Option<u64>,
        /// Report the lowest `top` energy levels with multiplicities.
        #[arg(long, conflicts_with = "k")]
        spectrum: Option<usize>,
    },
    /// Certified approximate ground state by tree-decomposition DP.
    Approx {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        epsilon: f64,
        /// Tree decomposition `{"bags":[[..]],"tree":[[a,b]]}`.
        #[arg(long)]
        decomp: Option<PathBuf>,
        /// Decay exponent bounding |J| for explicit models with positions.
        #[arg(long = "decay-alpha")]
        decay_alpha: Option<f64>,
    },
    /// Compile an MIS instance into a grid model bundle.
    Compile {
        #[arg(long)]
        mis: PathBuf,
        #[arg(long)]
        alpha: f64,
        /// Number of logical layers; chosen from the threshold if omitted.
        #[arg(long)]
        t: Option<usize>,
        #[arg(long = "max-depth", default_value_t = 2)]
        max_depth: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a grid state back to an independent set.
    Decode {
        #[arg(long)]
        bundle: PathBuf,
        /// File or literal: `+-+…`, or the JSON output of `solve`/`approx`.
        #[arg(long, allow_hyphen_values = true)]
        state: String,
    },
    /// Effective coupling between two blocks as CSV.
    Gadget {
        #[arg(long)]
        alpha: f64,
        /// Explicit separations, comma-separated.
        #[arg(long, value_delimiter = ',')]
        r: Vec<f64>,
        #[arg(long = "r-min", default_value_t = 8.0)]
        r_min: f64,
        #[arg(long = "r-max", default_value_t = 100.0)]
        r_max: f64,
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
    /// Brute-force checks of the quantitative bounds.
    Verify {
        #[command(subcommand)]
        check: Check,
    },
    /// Time the 1D scheme on seeded chains, as CSV.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = vec![10, 20, 40, 80, 160])]
        n: Vec<usize>,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
        c: f64,
    },
}

#[derive(Subcommand, Debug)]
enum Check {
    /// Every map of a compiled bundle.
    Bundle {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
    },
    /// Power law of the block-block coupling.
    Law {
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', default_values_t = vec![10.0, 20.0, 40.0, 80.0])]
        r: Vec<f64>,
    },
    /// Nearest-neighbour energy thresholds and ground-state decoding.
    Nn {
        #[arg(long)]
        mis: PathBuf,
    },
    /// Degeneracy and gap of an isolated block.
    Gadget {
        #[arg(long)]
        alpha: f64,
    },
    /// σ± stay lowest inside one block for every frozen environment.
    Validity {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        block: usize,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
    },
}

fn run(cli: Cli) -> Result<Output, CliError> {
    let mut solver = SolverOptions { limit_n: cli.limit_n, ..SolverOptions::default() };
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::bad("--workers must be at least 1"));
        }
        solver.workers = w;
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::bad(e.to_string()))?;
    }
    let g = Globals { tolerance: cli.tolerance, seed: cli.seed, solver };
    match cli.command {
        Command::Solve { model, k, spectrum } => commands::solve(&model, k, spectrum, &g),
        Command::Approx { model, epsilon, decomp, decay_alpha } => {
            commands::approx(&model, epsilon, decomp.as_deref(), decay_alpha, &g)
        }
        Command::Compile { mis, alpha, t, max_depth, out } => commands::compile(&mis, alpha, t, max_depth, &out),
        Command::Decode { bundle, state } => commands::decode(&bundle, &state),
        Command::Gadget { alpha, r, r_min, r_max, samples } => {
            commands::gadget_csv(alpha, &commands::separations(&r, r_min, r_max, samples))
        }
        Command::Verify { check } => match check {
            Check::Bundle { bundle, samples } => commands::verify_bundle(&bundle, samples, &g),
            Check::Law { alpha, r } => commands::verify_law(alpha, &r),
            Check::Nn { mis } => commands::verify_nn(&mis, &g),
            Check::Gadget { alpha } => commands::verify_gadget(alpha, &g),
            Check::Validity { model, block, samples } => commands::verify_validity(&model, block, samples, &g),
        },
        Command::Bench { n, epsilon, alpha, c } => commands::bench(&n, epsilon, alpha, c, &g),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.body.as_bytes());
            if !out.body.ends_with('\n') {
                let _ = stdout.write_all(b"\n");
            }
            if out.passed { ExitCode::SUCCESS } else { ExitCode::from(1) }
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use varband_cli::{run, write_report, Command, ExperimentConfig};

#[derive(Parser)]
#[command(name = "varband", version, about = "Variable-bandwidth Paley-Wiener experiments")]
struct Cli {
    /// JSON experiment config; defaults apply to omitted fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV tables and report.json.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Multiplies every tolerance.
    #[arg(long, global = true)]
    tolerance_scale: Option<f64>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Kernel heatmap and diagonal.
    Kernel,
    /// Scattering coefficients over an omega grid.
    Scatter,
    /// Iterative reconstruction from samples with error certificates.
    Reconstruct,
    /// Orthonormal sampling expansion for the two-level profile.
    Shannon,
    /// Beurling density report of a jittered sample set.
    Density,
    /// Frame-bound sweep over sampling densities.
    Landau,
    /// Invariant suite and acceptance cases.
    Selftest {
        /// Case ids (invariants, c1, ..., c10); repeat to select several.
        #[arg(long = "case")]
        cases: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("config error: {e}");
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(s) = cli.tolerance_scale {
        cfg.tolerance_scale = s;
    }
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot set up {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let (command, cases) = match cli.command {
        Sub::Kernel => (Command::Kernel, Vec::new()),
        Sub::Scatter => (Command::Scatter, Vec::new()),
        Sub::Reconstruct => (Command::Reconstruct, Vec::new()),
        Sub::Shannon => (Command::Shannon, Vec::new()),
        Sub::Density => (Command::Density, Vec::new()),
        Sub::Landau => (Command::Landau, Vec::new()),
        Sub::Selftest { cases } => (Command::Selftest, cases),
    };
    let start = Instant::now();
    let outcome = match run(command, &cfg, &cli.out, &cases) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    match write_report(&cli.out, command, &cfg, &outcome, start.elapsed().as_secs_f64()) {
        Ok(path) => println!("{}", path.display()),
        Err(e) => {
            eprintln!("cannot write report: {e}");
            return ExitCode::from(2);
        }
    }
    if outcome.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

mod commands;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use parse::Usage;

/// Exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILED: u8 = 1;
    pub const VALIDATION: u8 = 2;
    pub const WINDOW: u8 = 3;
    pub const USAGE: u8 = 64;
    pub const INAPPLICABLE: u8 = 65;
}

#[derive(Parser, Debug)]
#[command(
    name = "mg1",
    version,
    about = "Solvers and truncation studies for M/G/1-type Markov chains",
    after_help = "Exit status: 0 success, 1 failed check or solver error, 2 invalid model, \
                  3 window or truncation too small, 64 usage error, 65 method not applicable.\n\
                  File formats are described in FORMATS.md."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a chain config and print the validation report as JSON.
    Validate { config: PathBuf },
    /// Stationary distribution of the infinite chain or a last-column truncation.
    ///
    /// Writes pi.csv (level,phase,value) and summary.json to --out.
    Solve {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Infinite)]
        mode: Mode,
        /// Truncation level, required with --mode finite.
        #[arg(long = "N", alias = "n")]
        n: Option<usize>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Fundamental deviation matrix blocks on levels 0..=K by 0..=L.
    ///
    /// Writes deviation.csv (k,l,i,j,H,E) and summary.json to --out.
    Deviation {
        config: PathBuf,
        #[arg(long = "K", alias = "k")]
        k: usize,
        #[arg(long = "L", alias = "l")]
        l: usize,
        /// Residual of the Poisson equation on the window.
        #[arg(long)]
        check_poisson: bool,
        /// Compare pi_N - pi with the difference formula; needs --N.
        #[arg(long)]
        check_diff: bool,
        #[arg(long = "N", alias = "n")]
        n: Option<usize>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Convergence of truncated stationary vectors for a subexponential tail.
    ///
    /// Writes study.csv (N,k,phase,r_N,pibar_N,Fbar_N) and study.json to --out.
    Study {
        config: PathBuf,
        /// Comma-separated truncation levels, e.g. 25,50,100,200,400.
        #[arg(long)]
        grid: String,
        /// Comma-separated levels k.
        #[arg(long, default_value = "0")]
        k_list: String,
        /// chain, power:EXPONENT or geometric:RATIO.
        #[arg(long, default_value = "chain")]
        tail_model: String,
        #[command(flatten)]
        out: OutDir,
    },
    /// Loss probability of the MAP/G/1/N+1 queue.
    ///
    /// Writes loss.csv (N,loss_exact,loss_asymptotic,ratio[,mc_loss,mc_se,mc_lost])
    /// and summary.json to --out.
    Loss {
        /// MAP config (lambda0, lambda1).
        map: PathBuf,
        /// Service distribution: a JSON file or an inline JSON object.
        #[arg(long)]
        svc: String,
        /// Capacities as a list (1,2,5) or a range (1..20).
        #[arg(long = "N-grid", alias = "n-grid")]
        n_grid: String,
        /// Add the heavy-tail approximation and the exact/approximate ratio.
        #[arg(long)]
        asymptotic: bool,
        /// Simulate the queue with this seed.
        #[arg(long)]
        simulate: Option<u64>,
        #[arg(long, default_value_t = 10_000_000)]
        arrivals: u64,
        #[arg(long, default_value_t = 100)]
        replications: usize,
        /// Minimum number of explicit blocks in the embedded chain.
        #[arg(long, default_value_t = 256)]
        k_max: usize,
        #[command(flatten)]
        out: OutDir,
    },
    /// Cross-check the solvers against brute-force oracles.
    Verify {
        config: PathBuf,
        /// Truncation level of the reference chain.
        #[arg(long = "N", alias = "n", default_value_t = 400)]
        n: usize,
        /// Levels compared.
        #[arg(long, default_value_t = 30)]
        levels: usize,
    },
    /// Print a built-in chain config (sc1, mm1, mp2, hc1) as JSON.
    Preset { name: String },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Infinite,
    Finite,
}

#[derive(Args, Debug)]
struct OutDir {
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
}

fn status(err: &anyhow::Error) -> u8 {
    use mg1_core::Error as E;
    if err.downcast_ref::<Usage>().is_some() {
        return exit::USAGE;
    }
    if let Some(e) = err.downcast_ref::<E>() {
        return match e {
            E::WindowTooSmall { .. } => exit::WINDOW,
            E::Inapplicable(_) => exit::INAPPLICABLE,
            E::Dimension(_)
            | E::Negative(_)
            | E::NotStochastic { .. }
            | E::Reducible(_)
            | E::MultipleClosedClasses { .. }
            | E::NotPositiveRecurrent(_)
            | E::InvalidInput(_)
            | E::Json(_) => exit::VALIDATION,
            E::Domain(_) => exit::USAGE,
            _ => exit::FAILED,
        };
    }
    if err.downcast_ref::<serde_json::Error>().is_some() {
        return exit::VALIDATION;
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return exit::USAGE;
    }
    exit::FAILED
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                exit::USAGE
            } else {
                exit::OK
            });
        }
    };
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(status(&err))
        }
    }
}

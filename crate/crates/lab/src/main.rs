use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jkolab::config::RunConfig;
use jkolab::output::{ab_sequence_csv, Summary};
use jkolab::runner::{execute, RunError};
use jkolab::suites::{run_suite, Suite};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "jkolab", version, about = "Minimizing-movement runs and their Aronson-Bénilan certificates")]
struct Cli {
    /// Output directory (overrides the config's `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the randomized suites.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent suites.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a trajectory described by a TOML config.
    Run { config: PathBuf },
    /// Print k, X_k, 1-X_k and k·α·X_k as CSV.
    AbSeq { d: usize, m: f64, k: usize },
    /// Run a fixed-seed verification suite.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn print_checks(summary: &Summary) {
    for c in &summary.checks {
        println!("{} {} margin={:.3e} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.margin, c.detail);
    }
    if let Some(e) = &summary.error {
        println!("ERROR {e}");
    }
}

fn verdict(summary: &Summary) -> ExitCode {
    if summary.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error: --threads must be a positive integer");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match cli.command {
        Command::Run { config } => {
            let mut cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let out = cli.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
            match execute(&cfg, &out) {
                Ok(summary) => {
                    print_checks(&summary);
                    verdict(&summary)
                }
                Err(RunError::Config(e)) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_CONFIG)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_FAIL)
                }
            }
        }
        Command::AbSeq { d, m, k } => {
            let seq = match jkolab_core::ab::ab_sequence(d, m, k) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let written = ab_sequence_csv(std::io::stdout().lock(), &seq).and_then(|_| match &cli.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    ab_sequence_csv(std::fs::File::create(dir.join("ab_seq.csv"))?, &seq)
                }
                None => Ok(()),
            });
            match written {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_FAIL)
                }
            }
        }
        Command::Verify { suite } => {
            let seed = cli.seed.unwrap_or(0);
            let parts: Vec<_> = suite.members().into_par_iter().map(|s| run_suite(s, seed)).collect();
            let summary = Summary::new(&format!("verify {}", suite.name()), parts.into_iter().flatten().collect(), None, None);
            print_checks(&summary);
            if let Some(dir) = &cli.out {
                if let Err(e) = summary.write(dir) {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_FAIL);
                }
            }
            verdict(&summary)
        }
    }
}

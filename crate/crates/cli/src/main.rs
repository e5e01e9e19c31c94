//! `hcsolve` — solve the builtin benchmark problems with the adaptive
//! sparse spectral method and write CSV diagnostics.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hcsolve_cli::config::parse_config;
use hcsolve_cli::verify::{render, verify, VerifyOptions};
use hcsolve_cli::{run_exit_code, runner};

#[derive(Parser)]
#[command(
    name = "hcsolve",
    about = "Adaptive sparse spectral solver for PDEs on unbounded domains",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run described by an INI config file.
    Run {
        /// Path to the configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `out`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the builtin problems.
    ListProblems,
    /// Run the verification suite and print one line per check.
    Verify,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out } => {
            let mut cfg = match parse_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            match runner::run(&cfg) {
                Ok(record) => {
                    println!(
                        "{}: {} steps, final relative error {:.6e}, artifacts in {}",
                        cfg.spec.name,
                        record.rows.len(),
                        record.final_error,
                        cfg.out_dir.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("run failed: {e}");
                    ExitCode::from(run_exit_code(&e) as u8)
                }
            }
        }
        Command::ListProblems => {
            for name in hcsolve_core::problems::problem_names() {
                match hcsolve_core::problems::builtin(name) {
                    Ok(spec) => println!("{name:12} {}d  {}", spec.dim, spec.blurb),
                    Err(e) => {
                        eprintln!("internal error listing {name}: {e}");
                        return ExitCode::from(5);
                    }
                }
            }
            ExitCode::SUCCESS
        }
        Command::Verify => {
            let report = verify(&VerifyOptions::default());
            let mut all_ok = true;
            for check in &report {
                println!("{}", render(check));
                all_ok &= check.passed;
            }
            if all_ok {
                println!("all {} checks passed", report.len());
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
    }
}

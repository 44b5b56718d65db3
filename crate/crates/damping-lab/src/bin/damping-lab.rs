use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use damping_lab::cli::{self, Scenario, Suite};
use damping_lab::Error;

/// Numerical experiments for wave equations with effective time-dependent damping.
#[derive(Parser)]
#[command(name = "damping-lab", version)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, env = "DAMPING_LAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file (TOML, or JSON by extension).
    Run {
        config: PathBuf,
        /// Artifact directory, overriding the scenario's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a suite file and print a summary table.
    Suite {
        config: PathBuf,
        #[arg(long, default_value = "out/suite")]
        out: PathBuf,
        /// Run scenarios concurrently regardless of the suite setting.
        #[arg(long)]
        parallel: bool,
    },
    /// Print the shipped damping catalog as JSON.
    ListCatalog,
    /// Print the configuration schemas and CSV column layouts.
    PrintSchema {
        #[arg(long, value_enum, default_value_t = SchemaPart::All)]
        part: SchemaPart,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemaPart {
    All,
    Scenario,
    Suite,
    Csv,
}

const EXIT_FAILED: u8 = 1;
const EXIT_ERROR: u8 = 2;

fn fail(context: &str, e: Error) -> ExitCode {
    match &e {
        Error::ConfigInvalid { .. } => eprintln!("error: ConfigInvalid: {context}: {e}"),
        _ => eprintln!("error: {context}: {e}"),
    }
    ExitCode::from(EXIT_ERROR)
}

/// Prints JSON, ignoring a closed pipe (e.g. output piped into `head`).
fn emit(v: &serde_json::Value) {
    let text = serde_json::to_string_pretty(v).expect("JSON values serialize");
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn main() -> ExitCode {
    let args = Cli::parse();
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("error: DAMPING_LAB_THREADS must be at least 1");
            return ExitCode::from(EXIT_ERROR);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool is configured once");
    }
    match args.command {
        Command::Run { config, out } => {
            let ctx = config.display().to_string();
            let sc = match Scenario::load(&config) {
                Ok(sc) => sc,
                Err(e) => return fail(&ctx, e),
            };
            let dir = cli::output_dir(&sc, out.as_deref());
            match cli::run_scenario(&sc, &dir) {
                Ok(rep) => {
                    for c in &rep.checks {
                        let status = match (c.asserted, c.passed) {
                            (false, _) => "recorded",
                            (true, true) => "pass",
                            (true, false) => "FAIL",
                        };
                        let value = c.value.map(|v| format!(" = {v:e}")).unwrap_or_default();
                        println!("{status:8} {}{value}  ({})", c.name, c.detail);
                    }
                    println!("artifacts in {}", dir.display());
                    if rep.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_FAILED)
                    }
                }
                Err(e) => fail(&format!("scenario `{}`", sc.name), e),
            }
        }
        Command::Suite { config, out, parallel } => {
            let mut suite = match Suite::load(&config) {
                Ok(s) => s,
                Err(e) => return fail(&config.display().to_string(), e),
            };
            suite.parallel |= parallel;
            match cli::run_suite(&suite, &out) {
                Ok(summary) => {
                    print!("{}", summary.table());
                    if summary.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_FAILED)
                    }
                }
                Err(e) => fail(&config.display().to_string(), e),
            }
        }
        Command::ListCatalog => {
            emit(&cli::catalog_listing());
            ExitCode::SUCCESS
        }
        Command::PrintSchema { part } => {
            let all = cli::schema();
            let v = match part {
                SchemaPart::All => all,
                SchemaPart::Scenario => all["scenario"].clone(),
                SchemaPart::Suite => all["suite"].clone(),
                SchemaPart::Csv => all["csv"].clone(),
            };
            emit(&v);
            ExitCode::SUCCESS
        }
    }
}

//! chq command line: validate scenario files, run their queries, and play
//! with the built-in demo models.
//!
//! Exit codes: 0 success, 1 validation failure, 2 query failure, 3 I/O
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use chq::report::Report;
use chq::scenario::{self, RunOptions, ScenarioError};

const EXIT_VALIDATION: u8 = 1;
const EXIT_QUERY: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "chq",
    version,
    about = "Consistent-histories analysis of finite-dimensional quantum models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a scenario file and report whether it is valid
    Validate { file: PathBuf },
    /// Run a scenario's queries and print the report
    Run {
        file: PathBuf,
        /// Output format
        #[arg(long, value_enum, default_value_t = Format::Human)]
        format: Format,
        /// Override the scenario's consistency tolerance
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run a built-in demo scenario (stern_gerlach or crossed_beam)
    Demo {
        name: String,
        /// Spin-up amplitude as RE,IM (stern_gerlach only)
        #[arg(long)]
        alpha: Option<String>,
        /// Spin-down amplitude as RE,IM (stern_gerlach only)
        #[arg(long)]
        beta: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Human)]
        format: Format,
        /// Override the scenario's consistency tolerance
        #[arg(long)]
        tol: Option<f64>,
        /// Write the demo as an explicit scenario file (dense matrices)
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// List the built-in demo scenarios
    ListDemos,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Human,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { file } => validate(&file),
        Command::Run { file, format, tol } => run_file(&file, format, tol),
        Command::Demo {
            name,
            alpha,
            beta,
            format,
            tol,
            export,
        } => demo(&name, alpha, beta, format, tol, export),
        Command::ListDemos => {
            for name in scenario::demos::names() {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
    }
}

fn load_exit_code(err: &ScenarioError) -> u8 {
    match err {
        ScenarioError::Io { .. } => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

fn validate(file: &PathBuf) -> ExitCode {
    match scenario::load_path(file) {
        Ok(s) => {
            println!("ok: scenario {}", s.digest);
            println!(
                "space dim {}, {} families, {} queries",
                s.space.total_dim(),
                s.families.len(),
                s.queries.len()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("invalid: {e}");
            ExitCode::from(load_exit_code(&e))
        }
    }
}

fn emit(report: &Report, format: Format) -> ExitCode {
    match format {
        Format::Human => print!("{}", report.to_human(report.tolerance)),
        Format::Json => print!("{}", report.to_json()),
    }
    if report.has_errors() {
        ExitCode::from(EXIT_QUERY)
    } else {
        ExitCode::SUCCESS
    }
}

fn run_file(file: &PathBuf, format: Format, tol: Option<f64>) -> ExitCode {
    let scenario = match scenario::load_path(file) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(load_exit_code(&e));
        }
    };
    let report = scenario::run(
        &scenario,
        &RunOptions {
            consistency_tol: tol,
        },
    );
    emit(&report, format)
}

fn parse_amplitude(text: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = text.split(',').collect();
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad amplitude component `{s}`"))
    };
    match parts.as_slice() {
        [re] => Ok([parse(re)?, 0.0]),
        [re, im] => Ok([parse(re)?, parse(im)?]),
        _ => Err(format!("bad amplitude `{text}` (expected RE or RE,IM)")),
    }
}

fn demo(
    name: &str,
    alpha: Option<String>,
    beta: Option<String>,
    format: Format,
    tol: Option<f64>,
    export: Option<PathBuf>,
) -> ExitCode {
    let amplitude = |text: Option<String>| -> Result<Option<[f64; 2]>, String> {
        text.map(|t| parse_amplitude(&t)).transpose()
    };
    let (alpha, beta) = match (amplitude(alpha), amplitude(beta)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(m), _) | (_, Err(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let scenario = match scenario::demo_scenario(name, alpha, beta) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(load_exit_code(&e));
        }
    };
    if let Some(path) = export {
        let explicit = scenario::to_explicit_file(&scenario);
        let mut text =
            serde_json::to_string_pretty(&explicit).expect("explicit scenario serialization");
        text.push('\n');
        if let Err(e) = std::fs::write(&path, text) {
            eprintln!("error writing `{}`: {e}", path.display());
            return ExitCode::from(EXIT_IO);
        }
        eprintln!("exported explicit scenario to {}", path.display());
    }
    let report = scenario::run(
        &scenario,
        &RunOptions {
            consistency_tol: tol,
        },
    );
    emit(&report, format)
}

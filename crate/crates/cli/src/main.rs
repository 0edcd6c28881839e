mod commands;
mod config;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{Profile, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "ringamp", version, about = "Transition to chaos in rings of coupled oscillators")]
struct Cli {
    /// Seed for every random initial state.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run lengths: short "ci" runs or long "production" runs.
    #[arg(long, global = true, value_enum)]
    profile: Option<Profile>,
    /// JSON file with defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Model selection shared by all subcommands.
#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    /// "duffing" or a path to a JSON model file.
    #[arg(long)]
    pub model: Option<String>,
    /// Number of nodes.
    #[arg(long = "n")]
    pub n: Option<usize>,
    /// Duffing stiffness.
    #[arg(long)]
    pub a: Option<f64>,
    /// Duffing damping.
    #[arg(long)]
    pub d: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Continuous spectrum as CSV (phi, branch, re_lambda, im_lambda).
    Spectrum(commands::SpectrumArgs),
    /// Critical point of the continuous spectrum as JSON.
    Critical(commands::CriticalArgs),
    /// Ginzburg-Landau coefficients as JSON.
    Coeffs(commands::CriticalArgs),
    /// Integrate the amplitude equation from a small random field.
    Gl(commands::GlArgs),
    /// Integrate the ring equations; CSV of t and the full state.
    Simulate(commands::SimulateArgs),
    /// Lyapunov spectrum as JSON.
    Lyapunov(commands::LyapunovArgs),
    /// Hopf and chaos onset per ring size; CSV of N, k_H, k_Ch, k_Re.
    Scan(commands::ScanArgs),
    /// Like scan, plus a JSON summary of the rescaled intervals.
    Scaling(commands::ScanArgs),
    /// Built-in cross checks, one PASS/FAIL line each.
    Verify(verify::VerifyArgs),
}

/// Failure with its exit code: 2 for bad input, 3 for numerical failure.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            kind: "config",
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            kind: "numerical",
            message: message.into(),
        }
    }
}

impl From<ringamp::Error> for CliError {
    fn from(e: ringamp::Error) -> Self {
        if e.is_config_error() {
            Self::config(e.to_string())
        } else {
            Self::numerical(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::config(e.to_string())
    }
}

/// Global settings after merging flags over the config file.
pub struct Context {
    pub config: RunConfig,
    pub seed: u64,
    pub profile: Profile,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let threads = cli.threads.or(config.threads);
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    let ctx = Context {
        seed: config::pick(cli.seed, config.seed, 0),
        profile: config::pick(cli.profile, config.profile, Profile::Ci),
        config,
    };
    match cli.command {
        Command::Spectrum(a) => commands::spectrum(&ctx, a),
        Command::Critical(a) => commands::critical(&ctx, a),
        Command::Coeffs(a) => commands::coeffs(&ctx, a),
        Command::Gl(a) => commands::gl(&ctx, a),
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::Lyapunov(a) => commands::lyapunov(&ctx, a),
        Command::Scan(a) => commands::scan(&ctx, a, false),
        Command::Scaling(a) => commands::scan(&ctx, a, true),
        Command::Verify(a) => verify::verify(&ctx, a),
    }
}

fn report(err: &CliError) {
    let payload = json!({"error": err.kind, "message": err.message, "exit_code": err.code});
    eprintln!("{payload}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if code != 0 {
                report(&CliError::config(e.kind().to_string()));
                return ExitCode::from(2);
            }
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::from(e.code)
        }
    }
}

//! `sim levels|reflect|fidelity|regime --config <file> [--backend ...] [--plot] [--out <dir>]`

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cpf_gate::cli::{configure_threads, run, Command, Invocation, THREADS_ENV};
use cpf_gate::scattering::Backend;

#[derive(Parser)]
#[command(name = "sim", about = "CPF gate simulator for double-dot qubits coupled to a stripline resonator")]
#[command(after_help = format!("Set {THREADS_ENV} to limit the number of worker threads."))]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    /// TOML configuration; the built-in reference defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// analytic | filter | meanfield | master (overrides run.backend).
    #[arg(long, global = true, value_parser = parse_backend)]
    backend: Option<Backend>,
    /// Also write an SVG plot (fidelity only).
    #[arg(long, global = true)]
    plot: bool,
    /// Output directory (overrides run.output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Charge levels and gap against the energy offset.
    Levels,
    /// Reflected pulses for all four joint states.
    Reflect,
    /// Gate fidelity sweep.
    Fidelity,
    /// Parameter-regime report.
    Regime,
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    s.parse()
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command = match args.command {
        Cmd::Levels => Command::Levels,
        Cmd::Reflect => Command::Reflect,
        Cmd::Fidelity => Command::Fidelity,
        Cmd::Regime => Command::Regime,
    };
    let inv = Invocation { command, config: args.config, backend: args.backend, plot: args.plot, out: args.out };
    let result = configure_threads().and_then(|()| run(&inv, &mut std::io::stdout().lock()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

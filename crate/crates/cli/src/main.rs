use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nvcool::par::{self, Exec};
use nvcool_cli::{load_config, run, CliError, CliResult, Mode, Profile};

#[derive(Parser)]
#[command(name = "nvcool", version, about = "Phonon cooling by heating: analytic sweeps and master-equation runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary mean-field ⟨n_b⟩ along one parameter.
    AnalyticSweep(Common),
    /// Stationary ⟨n_b⟩ against Γ with the optimum.
    GammaSweep(Common),
    /// Time evolution (evolve-full, evolve-reduced or evolve-meanfield).
    Evolve(Common),
    /// Full model against mean field over an (n̄_a, Γ) grid.
    Compare(Common),
    /// Model parameters from laboratory quantities.
    DeriveParams(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output file; defaults to the config's output.path, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    profile: Option<Profile>,
}

fn accepts(command: &Command, mode: Mode) -> bool {
    match command {
        Command::AnalyticSweep(_) => mode == Mode::AnalyticSweep,
        Command::GammaSweep(_) => mode == Mode::GammaSweep,
        Command::Evolve(_) => matches!(mode, Mode::EvolveFull | Mode::EvolveReduced | Mode::EvolveMeanfield),
        Command::Compare(_) => mode == Mode::Compare,
        Command::DeriveParams(_) => mode == Mode::DeriveParams,
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let common = match &cli.command {
        Command::AnalyticSweep(c) | Command::GammaSweep(c) | Command::Evolve(c) | Command::Compare(c) | Command::DeriveParams(c) => c,
    };
    let mut spec = load_config(&common.config)?;
    if !accepts(&cli.command, spec.mode) {
        return Err(CliError::Config(format!("config mode `{}` does not match this subcommand", spec.mode.as_str())));
    }
    if let Some(profile) = common.profile {
        spec.apply_profile(profile);
    }
    for w in &spec.warnings {
        log::warn!("{w}");
    }
    let exec = match common.threads {
        Some(0) => return Err(CliError::Config("--threads must be ≥ 1".into())),
        Some(1) => Exec::Serial,
        Some(n) => {
            par::init_threads(n).map_err(|e| CliError::Config(format!("--threads: {e}")))?;
            Exec::Parallel
        }
        None => Exec::Parallel,
    };
    let report = run(&spec, exec)?;
    match common.out.clone().or(spec.output.clone()) {
        Some(path) => {
            let io = |source| CliError::Io { path: path.clone(), source };
            let mut w = BufWriter::new(File::create(&path).map_err(io)?);
            report.table.write_to(&mut w).map_err(io)?;
            w.flush().map_err(io)?;
        }
        None => {
            let stdout = std::io::stdout();
            report.table.write_to(stdout.lock()).map_err(|source| CliError::Io { path: "<stdout>".into(), source })?;
        }
    }
    if report.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(report.failures))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nvcool: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

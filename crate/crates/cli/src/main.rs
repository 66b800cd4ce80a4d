//! `rvlb`: runs the stability tables, α sweeps and shear-layer experiments.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rvlb::experiment::{AlphaSweep, Cell, Config, LinearTable, MaScan, ReScan, TableResult, UtildeScan, VorticityRun};
use rvlb::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

/// Meshes of the default Mach scan, plus the finest one under `--full`.
const MESHES: &str = "1/16,1/32,1/64,1/128,1/256,1/512";
const MESHES_FULL: &str = "1/16,1/32,1/64,1/128,1/256,1/512,1/1024";

#[derive(Debug, Parser)]
#[command(name = "rvlb", version, about = "Relative-velocity D2Q9 lattice Boltzmann stability experiments")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration entry; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Output file for tables (stdout if absent) or directory for field dumps.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for sweeps (defaults to available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Wavevector grid points per axis for linear stability scans.
    #[arg(long, global = true)]
    kgrid: Option<usize>,

    /// Resolution of speed and Mach searches.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Include the 1/1024 mesh in Mach scans.
    #[arg(long, global = true)]
    full: bool,

    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Linear (von Neumann) stability.
    #[command(subcommand)]
    Stability(StabilityCommand),
    /// Nonlinear Kelvin-Helmholtz runs.
    #[command(subcommand)]
    Kh(KhCommand),
}

#[derive(Debug, Subcommand)]
enum StabilityCommand {
    /// Max stable speed over the (m, n) relaxation-rate ladder.
    Table,
    /// Max stable speed as a function of α.
    AlphaSweep,
}

#[derive(Debug, Subcommand)]
enum KhCommand {
    /// Field dumps of one run.
    Vorticity,
    /// Max stable Mach number per mesh.
    ScanMa,
    /// Max stable Reynolds number per mesh.
    ScanRe,
    /// Max stable Mach number per frame-velocity scale.
    ScanUtilde,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }

    fn numerical(e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_NUMERICAL,
            message: e.to_string(),
        }
    }
}

/// Setup errors are configuration problems; anything else is numerical.
fn classify(e: Error) -> Failure {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Io(_) => Failure::config(e),
        _ => Failure::numerical(e),
    }
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            Config::parse(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?
        }
        None => Config::new(),
    };
    for pair in &cli.set {
        cfg.set_pair(pair).map_err(Failure::config)?;
    }
    if let Some(k) = cli.kgrid {
        cfg.set("experiment.kgrid", k.to_string()).map_err(Failure::config)?;
    }
    if let Some(t) = cli.tol {
        cfg.set("experiment.tol", t.to_string()).map_err(Failure::config)?;
    }
    if matches!(cli.command, Command::Kh(KhCommand::ScanMa)) && cfg.get("experiment.dx").is_none() {
        let meshes = if cli.full { MESHES_FULL } else { MESHES };
        cfg.set("experiment.dx", meshes).map_err(Failure::config)?;
    } else if cli.full {
        log::warn!("--full only extends the default meshes of `kh scan-ma`");
    }
    Ok(cfg)
}

fn write_table(table: &TableResult, out: Option<&PathBuf>) -> Result<(), Failure> {
    let result = match out {
        Some(path) => File::create(path).map_err(Error::from).and_then(|f| {
            let mut w = BufWriter::new(f);
            table.write_csv(&mut w)?;
            w.flush().map_err(Error::from)
        }),
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            table.write_csv(&mut w).and_then(|_| w.flush().map_err(Error::from))
        }
    };
    result.map_err(|e| Failure::config(format!("cannot write output: {e}")))?;
    if table.has_failures() {
        return Err(Failure::numerical("some cells failed and were written as nan"));
    }
    Ok(())
}

fn run_table(cli: &Cli, cfg: &Config) -> Result<(), Failure> {
    let threads = cli.threads;
    let table = match &cli.command {
        Command::Stability(StabilityCommand::Table) => {
            LinearTable::from_config(cfg).map_err(classify)?.run(threads)
        }
        Command::Stability(StabilityCommand::AlphaSweep) => {
            AlphaSweep::from_config(cfg).map_err(classify)?.run(threads)
        }
        Command::Kh(KhCommand::ScanMa) => MaScan::from_config(cfg).map_err(classify)?.run(threads),
        Command::Kh(KhCommand::ScanRe) => ReScan::from_config(cfg).map_err(classify)?.run(threads),
        Command::Kh(KhCommand::ScanUtilde) => UtildeScan::from_config(cfg).map_err(classify)?.run(threads),
        Command::Kh(KhCommand::Vorticity) => unreachable!("handled by run_vorticity"),
    }
    .map_err(|e| match e {
        Error::Config(_) => Failure::config(e),
        other => Failure::numerical(other),
    })?;
    write_table(&table, cli.out.as_ref())
}

fn run_vorticity(cli: &Cli, cfg: &Config) -> Result<(), Failure> {
    let run = VorticityRun::from_config(cfg).map_err(classify)?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let report = run.run(&dir).map_err(|e| match e {
        Error::Io(_) => Failure::config(e),
        other => Failure::numerical(other),
    })?;
    // dump index: one row per file written, named `{prefix}_t{iteration}.csv`
    let mut index = TableResult::new("kh vorticity", "time", vec!["iteration".into()], run.config.clone());
    for d in &report.dumps {
        index.push_row(d.time.to_string(), vec![Cell::Value(d.iteration as f64)], 0);
        eprintln!("wrote {}", d.path.display());
    }
    {
        let stdout = io::stdout();
        let mut w = stdout.lock();
        index
            .write_csv(&mut w)
            .and_then(|_| w.flush().map_err(Error::from))
            .map_err(|e| Failure::config(format!("cannot write output: {e}")))?;
    }
    match report.blow_up {
        Some(b) => Err(Failure::numerical(format!(
            "run broke at iteration {} ({}); {} dumps kept",
            b.iteration,
            b.reason,
            report.dumps.len()
        ))),
        None => Ok(()),
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let start = Instant::now();
    let result = match cli.command {
        Command::Kh(KhCommand::Vorticity) => run_vorticity(cli, &cfg),
        _ => run_table(cli, &cfg),
    };
    log::info!("finished in {:.1?}", start.elapsed());
    result
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

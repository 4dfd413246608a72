use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mcusum::montecarlo::{default_workers, WORKERS_ENV};
use mcusum_cli::{run, Command, ExperimentConfig, Overrides};

#[derive(Parser, Debug)]
#[command(name = "mcusum", version, about = "Multisensor CUSUM experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Experiment config (TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides every run count in the config.
    #[arg(long, global = true)]
    runs: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Delays (and optionally ARLs) at fixed thresholds.
    Table1,
    /// Relative-loss curves and sweep figure data.
    Figures,
    /// Thresholds for a target ARL.
    Calibrate,
    /// Renewal constants and multichart designs.
    Constants,
    /// Delay-versus-ARL sweep against the oracle CUSUM.
    Sweep,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let Some(path) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(1);
    };
    let command = match cli.command {
        Cmd::Table1 => Command::Table1,
        Cmd::Figures => Command::Figures,
        Cmd::Calibrate => Command::Calibrate,
        Cmd::Constants => Command::Constants,
        Cmd::Sweep => Command::Sweep,
    };
    let overrides = Overrides { seed: cli.seed, runs: cli.runs, out: cli.out };
    let workers = cli.workers.filter(|&w| w > 0).unwrap_or_else(default_workers);
    let result = ExperimentConfig::load(&path).and_then(|mut config| run(command, &mut config, &overrides, workers));
    match result {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use parahom::run::{exit_code, report, run, RunConfig};

/// Extended parabolic correctors and large-scale regularity experiments.
#[derive(Parser)]
#[command(name = "parahom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML configuration.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the configuration.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Summarize a finished run directory.
    Report {
        dir: PathBuf,
        /// Also write whitespace-separated `.dat` copies of every table.
        #[arg(long)]
        gnuplot: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, output } => RunConfig::load(&config).and_then(|mut cfg| {
            if let Some(dir) = output {
                cfg.output_dir = dir;
            }
            let dir = run(&cfg)?;
            print!("{}", report(&dir, false)?);
            Ok(())
        }),
        Command::Report { dir, gnuplot } => report(&dir, gnuplot).map(|s| print!("{s}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

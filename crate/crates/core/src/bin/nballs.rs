use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nballs::experiment::{parse_config, run, schema, ExperimentConfig};

#[derive(Parser)]
#[command(name = "nballs", version, about = "Experiments on N balls falling onto a floor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run { config: PathBuf },
    /// Check a configuration file without running it.
    Validate { config: PathBuf },
    /// Print the configuration key reference.
    Schema,
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cli.command {
        Command::Schema => {
            print!("{}", schema());
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load(&config) {
            Ok(c) => {
                println!("ok: {} ({} seeds, hash {})", c.kind, c.seeds.len(), c.hash());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Run { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match run(&cfg) {
                Ok(outcome) => {
                    for f in &outcome.red_flags {
                        eprintln!("red flag [{}]: {}", f.code, f.message);
                    }
                    println!("{}: {}", cfg.kind, outcome.dir.join("report.json").display());
                    ExitCode::from(outcome.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}

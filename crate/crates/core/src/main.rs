use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use randucb::bounds::BoundReport;
use randucb::harness::{self, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "randucb", version, about = "Randomized confidence-bound bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its regret curves as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print regret bounds for the RandUCB policies of a config.
    Bounds {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one experiment per value of a config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. `1/16,1/8,1`.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".to_string())
}

fn print_bounds(config: &ExperimentConfig) -> Result<(), HarnessError> {
    let entries = harness::bound_entries(config)?;
    let mut rows = Vec::new();
    for e in &entries {
        println!("[{} {}]", e.policy, e.theorem);
        match &e.report {
            Ok(r) => {
                println!("{r}");
                rows.push(format!("{},{},{}", e.policy, e.theorem, r.csv_row()));
            }
            Err(err) => {
                println!("{err}");
                rows.push(format!("{},{},{}", e.policy, e.theorem, ",".repeat(7)));
            }
        }
        println!();
    }
    println!("policy,theorem,{}", BoundReport::CSV_HEADER);
    for row in rows {
        println!("{row}");
    }
    Ok(())
}

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let path = harness::run_to_dir(&cfg, &out, &stem(&config))?;
            println!("wrote {}", path.display());
        }
        Command::Bounds { config } => print_bounds(&ExperimentConfig::load(&config)?)?,
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            if values.is_empty() {
                return Err(harness::ConfigError::invalid("--values", "", "no values given").into());
            }
            for path in harness::sweep(&cfg, &param, &values, &out, &stem(&config))? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HarnessError::Config(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

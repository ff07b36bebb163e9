//! `localmart`: run scenario files and write reports.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use localmart::scenario::{self, Scenario, MODELS};

#[derive(Parser)]
#[command(
    name = "localmart",
    version,
    about = "Strict local martingale and arbitrage diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write report.json, CSV tables and SVG plots.
    Run {
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of simulated paths.
        #[arg(long)]
        paths: Option<usize>,
        /// Output directory (default: the config's `out`, else `out/<name>`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and type-check a scenario without running it.
    Validate { config: PathBuf },
    /// List the simulated models and their parameters.
    ListModels,
}

fn load(path: &PathBuf) -> Result<Scenario, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Scenario::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn threads() -> Result<(), String> {
    let Ok(v) = std::env::var("LOCALMART_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("LOCALMART_THREADS must be a positive integer, got '{v}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<i32, String> {
    match cli.command {
        Command::ListModels => {
            for (name, params) in MODELS {
                println!("{name:<16} {params}");
            }
            Ok(0)
        }
        Command::Validate { config } => {
            let sc = load(&config)?;
            scenario::validate(&sc).map_err(|e| format!("{}: {e}", config.display()))?;
            println!("{}: ok ({} tasks)", config.display(), sc.tasks.len());
            Ok(0)
        }
        Command::Run {
            config,
            seed,
            paths,
            out,
        } => {
            let mut sc = load(&config)?;
            if let Some(s) = seed {
                sc.seed = s;
            }
            if let Some(p) = paths {
                if p == 0 {
                    return Err("--paths must be at least 1".into());
                }
                sc.paths = p;
            }
            if out.is_some() {
                sc.out = out;
            }
            let dir = sc.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&sc.name));
            scenario::validate(&sc).map_err(|e| format!("{}: {e}", config.display()))?;
            threads()?;
            let outcome = scenario::run_scenario(&sc, &dir, &[("localmart-cli", env!("CARGO_PKG_VERSION"))])
                .map_err(|e| e.to_string())?;
            if let Some(tasks) = outcome.report["tasks"].as_array() {
                for t in tasks {
                    println!(
                        "{:<24} {:<12} {}",
                        t["label"].as_str().unwrap_or(""),
                        t["task"].as_str().unwrap_or(""),
                        t["verdict"].as_str().unwrap_or("")
                    );
                }
            }
            for f in &outcome.flags {
                eprintln!("flagged: {f}");
            }
            println!("wrote {} files to {}", outcome.files.len(), dir.display());
            Ok(outcome.exit_code)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use decohere_cli::{emit, parse_config, run_scenario, Scenario, WORKERS_ENV};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

/// Run open-quantum-system scenarios from TOML configurations.
///
/// Exit status: 0 when every check passes, 1 when a check fails or a run
/// errors, 2 for usage and configuration errors. DECOHERE_WORKERS sets the
/// number of worker threads.
#[derive(Parser)]
#[command(name = "decohere", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its CSV and manifest.
    Run { config: PathBuf },
    /// Check a configuration and print it with defaults filled in.
    Validate { config: PathBuf },
    /// List the available scenarios.
    ListScenarios,
}

fn load(path: &PathBuf) -> Result<decohere_cli::ScenarioConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn init_workers() -> Result<(), String> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| format!("{WORKERS_ENV} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListScenarios => {
            for s in Scenario::ALL {
                let kinds: Vec<&str> = s.estimators().iter().map(|k| k.name()).collect();
                println!("{:<22} {}", s.name(), s.summary());
                println!("{:<22} estimators: {}; columns: {}", "", kinds.join(", "), s.columns());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                print!("{}", emit(&cfg));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(EXIT_USAGE)
            }
        },
        Command::Run { config } => {
            let cfg = match load(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(EXIT_USAGE);
                }
            };
            if let Err(e) = init_workers() {
                eprintln!("{e}");
                return ExitCode::from(EXIT_USAGE);
            }
            let manifest = match run_scenario(&cfg) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CHECK_FAILED);
                }
            };
            for c in &manifest.checks {
                println!(
                    "{} {}: {:.6e} (limit {:e}) {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.limit,
                    c.detail
                );
            }
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            println!("wrote {} and {}", cfg.output.path.display(), cfg.output.manifest.display());
            if manifest.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("failed checks: {}", serde_json::to_string(&manifest.failed).unwrap_or_default());
                ExitCode::from(EXIT_CHECK_FAILED)
            }
        }
    }
}

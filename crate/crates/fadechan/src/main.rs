//! `fadechan`: scenario-driven transmittance statistics and PDTs for
//! turbulent free-space optical channels with annular receivers.

use clap::{Parser, Subcommand};
use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

use fadechan::error::Error;
use fadechan::run;
use fadechan::scenario::{load_scenario, scenario_from_value, Scenario};

#[derive(Parser)]
#[command(
    name = "fadechan",
    about = "Transmittance distributions of turbulent optical channels with annular apertures",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Scenario JSON file; the built-in reference scenario when omitted.
    scenario: Option<PathBuf>,
    /// Override scenario fields by dotted path, e.g. --set channel.length=3000
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (default: current directory).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override sampling.seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// First-principles channel statistics (moments, spot sizes, wandering).
    Stats(CommonArgs),
    /// Probability distribution of the transmittance for the selected model.
    Pdt(CommonArgs),
    /// Sweep d0, tracking_ratio, or length over a grid.
    Sweep(CommonArgs),
    /// Self-checks of the numerical core; nonzero exit on failure.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        /// JSON file mapping check names to tolerance overrides.
        #[arg(long)]
        tolerances: Option<PathBuf>,
    },
}

fn parse_sets(raw: &[String]) -> Result<Vec<(String, String)>, Error> {
    raw.iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Scenario(format!("--set expects KEY=VALUE, got '{kv}'")))
        })
        .collect()
}

fn build_scenario(args: &CommonArgs) -> Result<Scenario, Error> {
    let mut sets = parse_sets(&args.set)?;
    if let Some(seed) = args.seed {
        sets.push(("sampling.seed".to_string(), seed.to_string()));
    }
    match &args.scenario {
        Some(path) => load_scenario(path, &sets),
        None => scenario_from_value(serde_json::json!({}), &sets),
    }
}

fn configure_threads() {
    if let Ok(v) = std::env::var("FADECHAN_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n > 0 {
                // ignore failure if a pool is already installed
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Scenario(_) | Error::Domain { .. } | Error::Io(_) => 1,
        Error::Diagnostic(_) | Error::NotPositiveSemidefinite { .. } => 2,
        Error::BudgetExceeded { .. } | Error::Overflow { .. } => 3,
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let result: Result<bool, Error> = (|| {
        match &cli.command {
            Command::Stats(args) => {
                let sc = build_scenario(args)?;
                for w in &sc.validate()?.warnings {
                    eprintln!("warning: {w}");
                }
                let path = run::run_stats(&sc, &args.out)?;
                println!("wrote {}", path.display());
                Ok(true)
            }
            Command::Pdt(args) => {
                let sc = build_scenario(args)?;
                for w in &sc.validate()?.warnings {
                    eprintln!("warning: {w}");
                }
                let (csv, json) = run::run_pdt(&sc, &args.out)?;
                println!("wrote {}", csv.display());
                println!("wrote {}", json.display());
                Ok(true)
            }
            Command::Sweep(args) => {
                let sc = build_scenario(args)?;
                for w in &sc.validate()?.warnings {
                    eprintln!("warning: {w}");
                }
                let path = run::run_sweep(&sc, &args.out)?;
                println!("wrote {}", path.display());
                Ok(true)
            }
            Command::Validate { common, tolerances } => {
                let sc = build_scenario(common)?;
                let overrides: HashMap<String, f64> = match tolerances {
                    Some(path) => {
                        let text = std::fs::read_to_string(path)
                            .map_err(|e| Error::Io(e.to_string()))?;
                        serde_json::from_str(&text)
                            .map_err(|e| Error::Scenario(format!("tolerance file: {e}")))?
                    }
                    None => HashMap::new(),
                };
                let (path, passed) = run::run_validate(&sc, &common.out, &overrides)?;
                let report = std::fs::read_to_string(&path).unwrap_or_default();
                if let Ok(v) = serde_json::from_str::<serde_json::Value>(&report) {
                    if let Some(checks) = v.get("checks").and_then(|c| c.as_array()) {
                        for c in checks {
                            let name = c["name"].as_str().unwrap_or("?");
                            let ok = c["passed"].as_bool().unwrap_or(false);
                            println!("{} {name}", if ok { "PASS" } else { "FAIL" });
                        }
                    }
                }
                println!("wrote {}", path.display());
                Ok(passed)
            }
        }
    })();

    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

use clap::{Parser, Subcommand};
use smcalc_cli::{all_ids, lookup, run_scenario, validate_config, Overall, SCENARIOS};
use std::path::PathBuf;
use std::process::ExitCode;

/// Batch verification runner for calculus with general stochastic
/// measures.
///
/// Exit codes: 0 all checks passed, 1 a check failed, 2 configuration
/// error, 3 inconclusive (a convergence report rejected).
#[derive(Parser)]
#[command(name = "smcalc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario described by a TOML configuration file.
    Run {
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the Monte Carlo path count.
        #[arg(long)]
        paths: Option<usize>,
        /// Override the finest refinement level.
        #[arg(long)]
        level: Option<u32>,
        /// Output directory for report.csv and verdicts.csv
        /// (default: $SMCALC_OUT, then the config's output_dir, then ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a configuration file and echo the resolved settings.
    Validate { config: PathBuf },
    /// List the available scenarios with anchors and default tolerances.
    List,
}

fn load_config(
    path: &PathBuf,
    seed: Option<u64>,
    paths: Option<usize>,
    level: Option<u32>,
) -> Result<smcalc_cli::ScenarioConfig, Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![format!("cannot read {}: {e}", path.display())])?;
    let mut cfg = validate_config(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(p) = paths {
        cfg.paths = p;
    }
    if let Some(l) = level {
        if !(2..=12).contains(&l) {
            return Err(vec![format!("--level must be in 2..=12, got {l}")]);
        }
        cfg.level = l;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            println!("{:<26} {:<26} {:>9}  summary", "scenario", "anchor", "tol");
            for s in SCENARIOS {
                println!(
                    "{:<26} {:<26} {:>9}  {}",
                    s.id, s.anchor, s.default_tolerance, s.summary
                );
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load_config(&config, None, None, None) {
            Ok(cfg) => {
                println!("configuration is valid:");
                println!("{cfg:#?}");
                ExitCode::SUCCESS
            }
            Err(errors) => {
                eprintln!("configuration is invalid ({} problems):", errors.len());
                for e in &errors {
                    eprintln!("  - {e}");
                }
                ExitCode::from(2)
            }
        },
        Command::Run {
            config,
            seed,
            paths,
            level,
            out,
        } => {
            let cfg = match load_config(&config, seed, paths, level) {
                Ok(cfg) => cfg,
                Err(errors) => {
                    eprintln!("configuration is invalid ({} problems):", errors.len());
                    for e in &errors {
                        eprintln!("  - {e}");
                    }
                    if errors.iter().any(|e| e.contains("unknown scenario")) {
                        eprintln!("known scenarios: {}", all_ids().join(", "));
                    }
                    return ExitCode::from(2);
                }
            };
            if lookup(&cfg.scenario).is_none() {
                eprintln!(
                    "unknown scenario `{}`; known: {}",
                    cfg.scenario,
                    all_ids().join(", ")
                );
                return ExitCode::from(2);
            }
            let out_dir = out
                .or_else(|| std::env::var_os("SMCALC_OUT").map(PathBuf::from))
                .or_else(|| cfg.output_dir.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out"));
            let report = match run_scenario(&cfg) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("scenario setup failed: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Err(e) = smcalc_cli::write_outputs(&report, &out_dir) {
                eprintln!("cannot write outputs to {}: {e}", out_dir.display());
                return ExitCode::from(2);
            }
            for row in &report.rows {
                println!(
                    "{:<28} level {:>2}  {:<16} {:>14.6e}  tol {:>12.4e}  {}",
                    row.check_id, row.level, row.metric, row.value, row.tolerance, row.verdict
                );
            }
            println!(
                "wrote {} and {}",
                out_dir.join("report.csv").display(),
                out_dir.join("verdicts.csv").display()
            );
            match report.overall() {
                Overall::Pass => {
                    println!("overall: pass");
                    ExitCode::SUCCESS
                }
                Overall::Fail => {
                    println!("overall: fail");
                    ExitCode::from(1)
                }
                Overall::Inconclusive => {
                    println!("overall: inconclusive");
                    ExitCode::from(3)
                }
            }
        }
    }
}

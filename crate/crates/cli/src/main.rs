//! Scenario runner for the MPC-enabled chain simulator.
//!
//! Exit codes: 0 all checks pass, 1 scenario failure (parse, validation or
//! oracle mismatch), 2 invariant or audit violation.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use mpcvm_core::netsim::Sim;
use mpcvm_core::report::{throughput_comparison, Report};
use mpcvm_core::scenario::{bundled_scenario, bundled_scenarios, Scenario};

#[derive(Parser)]
#[command(name = "mpcvm", about = "Deterministic simulator for a contract VM with suspendable MPC transactions", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario (a bundled name or a TOML path) and report.
    Run {
        scenario: String,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the JSON-lines event trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare regular-transaction throughput between two scenarios
    /// sharing a seed and workload.
    Throughput {
        #[arg(long)]
        baseline: String,
        #[arg(long)]
        mixed: String,
    },
    /// Run every bundled scenario and its checks.
    Selftest,
    /// List bundled scenarios.
    List,
}

fn load_scenario(name_or_path: &str) -> Result<Scenario> {
    if let Some(s) = bundled_scenario(name_or_path) {
        return Ok(s);
    }
    let text = std::fs::read_to_string(name_or_path)
        .with_context(|| format!("no bundled scenario or readable file named {name_or_path}"))?;
    Ok(Scenario::parse(&text)?)
}

/// 0 = clean, 1 = scenario failure, 2 = invariant violation.
fn verdict(report: &Report) -> u8 {
    if report.lock_violations > 0
        || !report.conservation_ok
        || report.serializability.as_ref().is_some_and(|s| !s.matches)
    {
        return 2;
    }
    if !report.sessions_pass {
        return 1;
    }
    0
}

fn run_one(scenario: &Scenario) -> Result<(Report, Sim)> {
    let sim = scenario.run()?;
    let report = Report::build(scenario, &sim);
    Ok((report, sim))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run { scenario, seed, report, trace } => {
            let mut scenario = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            let (rep, sim) = run_one(&scenario)?;
            let json = rep.to_json();
            match report {
                Some(path) => std::fs::write(&path, &json)
                    .with_context(|| format!("writing report to {}", path.display()))?,
                None => println!("{json}"),
            }
            if let Some(path) = trace {
                std::fs::write(&path, sim.trace_json_lines())
                    .with_context(|| format!("writing trace to {}", path.display()))?;
            }
            Ok(verdict(&rep))
        }
        Command::Throughput { baseline, mixed } => {
            let base_scenario = load_scenario(&baseline)?;
            let mixed_scenario = load_scenario(&mixed)?;
            if base_scenario.seed != mixed_scenario.seed {
                bail!("throughput comparison requires a shared seed");
            }
            let base = base_scenario.run()?;
            let mix = mixed_scenario.run()?;
            let cmp = throughput_comparison(&base, &mix);
            println!("{}", serde_json::to_string_pretty(&cmp)?);
            Ok(0)
        }
        Command::Selftest => {
            let mut worst = 0u8;
            for (name, _) in bundled_scenarios() {
                let scenario = match bundled_scenario(name) {
                    Some(s) => s,
                    None => {
                        println!("{name}: FAIL (parse)");
                        worst = worst.max(1);
                        continue;
                    }
                };
                match run_one(&scenario) {
                    Ok((rep, _)) => {
                        let code = verdict(&rep);
                        let label = match code {
                            0 => "PASS",
                            1 => "FAIL (scenario)",
                            _ => "FAIL (invariant)",
                        };
                        println!(
                            "{name}: {label} — {} sessions, {} blocks, avg {}.{:03} regular tx/block",
                            rep.sessions.len(),
                            rep.blocks,
                            rep.avg_regular_commits_milli / 1000,
                            rep.avg_regular_commits_milli % 1000,
                        );
                        worst = worst.max(code);
                    }
                    Err(e) => {
                        println!("{name}: FAIL ({e})");
                        worst = worst.max(1);
                    }
                }
            }
            Ok(worst)
        }
        Command::List => {
            for (name, _) in bundled_scenarios() {
                println!("{name}");
            }
            Ok(0)
        }
    }
}

//! Command-line front end: run a scenario file, sweep a builtin experiment
//! family, or list builtins. Exit codes: 0 success, 2 validation error,
//! 3 runtime assertion.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use llcsim::builtins::{builtin_scenario, BUILTIN_NAMES};
use llcsim::engine::{self, Report, SimError};
use llcsim::report::{emit_action_log, emit_csv};
use llcsim::scenario::parse_scenario_with_overrides;

#[derive(Parser)]
#[command(name = "llcsim", about = "Epoch-driven LLC contention simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and emit its CSV report.
    Run {
        /// Scenario file path.
        scenario: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the CSV report and action log.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override total_ticks.
        #[arg(long)]
        ticks: Option<u64>,
        /// Disable the management controller.
        #[arg(long)]
        no_controller: bool,
        /// `section.key=value` overrides, repeatable.
        #[arg(long = "set")]
        set: Vec<String>,
        /// Downgrade unknown scenario keys to warnings.
        #[arg(long)]
        lenient: bool,
    },
    /// Run every member of a builtin experiment family.
    Sweep {
        /// Builtin name (see list-builtins).
        name: String,
        /// Output directory for per-run CSVs.
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List builtin experiment families.
    ListBuiltins,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("runtime assertion: {msg}");
            ExitCode::from(3)
        }
    }
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => CliError::Validation(c.to_string()),
            SimError::Assertion(a) => CliError::Runtime(a.to_string()),
        }
    }
}

fn dispatch() -> Result<(), CliError> {
    match Cli::parse().command {
        Command::Run {
            scenario,
            seed,
            out,
            ticks,
            no_controller,
            set,
            lenient,
        } => {
            let text = fs::read_to_string(&scenario)
                .map_err(|e| CliError::Validation(format!("{}: {e}", scenario.display())))?;
            let mut overrides = set;
            if let Some(s) = seed {
                overrides.push(format!("sim.seed={s}"));
            }
            if let Some(t) = ticks {
                overrides.push(format!("sim.total_ticks={t}"));
            }
            if no_controller {
                overrides.push("sim.controller=off".into());
            }
            let (parsed, warnings) =
                parse_scenario_with_overrides(&text, &overrides, !lenient)
                    .map_err(|e| CliError::Validation(format!("{}: {e}", scenario.display())))?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            let report = engine::run(&parsed)?;
            let stem = scenario
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scenario".into());
            print_summary(&stem, &report);
            if let Some(dir) = out {
                write_outputs(&dir, &stem, &report)?;
            }
            Ok(())
        }
        Command::Sweep { name, out, seed } => {
            let builtin = builtin_scenario(&name)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            fs::create_dir_all(&out)
                .map_err(|e| CliError::Validation(format!("{}: {e}", out.display())))?;
            for run in &builtin.runs {
                let mut overrides = run.overrides.clone();
                if let Some(s) = seed {
                    overrides.push(format!("sim.seed={s}"));
                }
                let (parsed, _) =
                    parse_scenario_with_overrides(&builtin.base, &overrides, true)
                        .map_err(|e| CliError::Validation(format!("{name}/{}: {e}", run.label)))?;
                let report = engine::run(&parsed)?;
                let label = format!("{name}_{}", run.label);
                print_summary(&label, &report);
                write_outputs(&out, &label, &report)?;
            }
            Ok(())
        }
        Command::ListBuiltins => {
            for name in BUILTIN_NAMES {
                let b = builtin_scenario(name).unwrap();
                println!("{:22} {} ({} runs)", b.name, b.description, b.runs.len());
            }
            Ok(())
        }
    }
}

fn write_outputs(dir: &Path, stem: &str, report: &Report) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Validation(format!("{}: {e}", dir.display())))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let file = fs::File::create(&csv_path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", csv_path.display())))?;
    emit_csv(report, file).map_err(|e| CliError::Validation(e.to_string()))?;
    if !report.actions.is_empty() {
        let log_path = dir.join(format!("{stem}_actions.log"));
        let file = fs::File::create(&log_path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", log_path.display())))?;
        emit_action_log(report, file)
            .map_err(|e| CliError::Validation(format!("{}: {e}", log_path.display())))?;
    }
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn print_summary(label: &str, report: &Report) {
    let s = &report.summary;
    println!(
        "{label}: {} ticks, result window {} ticks, mem_bw {:.0} lines/tick",
        report.ticks.len(),
        s.window,
        s.memory_bandwidth
    );
    for (i, w) in report.scenario.workloads.iter().enumerate() {
        let ws = &s.workloads[i];
        println!(
            "  {:12} llc_hit {:>8} llc_miss {:>8} latency {:>8} io_tp {:>8.1}",
            w.name,
            fmt_opt(ws.llc_hit_rate),
            fmt_opt(ws.llc_miss_rate),
            fmt_opt(ws.latency_proxy),
            ws.io_throughput,
        );
    }
    for (i, d) in report.scenario.devices.iter().enumerate() {
        let ds = &s.devices[i];
        println!(
            "  {:12} leak_rate {:>8} dma {:>9.0} lines/tick",
            d.name,
            fmt_opt(ds.dca_leak_rate),
            ds.dma_lines_per_tick
        );
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

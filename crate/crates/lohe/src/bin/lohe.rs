//! Command-line front end: run a scenario from a config file, run a named
//! preset with optional overrides, sweep one parameter, or list the presets.
//!
//! Exit codes: 0 pass, 1 monitor/check failure, 2 validation error,
//! 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use lohe::error::Error;
use lohe::scenario::{preset, run_scenario, RunSummary, ScenarioConfig, PRESET_NAMES};

#[derive(Parser)]
#[command(name = "lohe", about = "Tensor/matrix aggregation flows: simulate, certify, emit CSV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario described by a TOML config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a named preset experiment.
    Preset {
        name: String,
        /// Dotted-path overrides, e.g. --override integrator.dt=5e-4
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory (default: out/<preset>).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Print the effective config instead of running.
        #[arg(long)]
        print_config: bool,
    },
    /// Re-run a config once per value of one overridden parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
    },
    /// List the available presets.
    ListPresets,
}

fn apply_overrides(mut cfg: ScenarioConfig, overrides: &[String]) -> Result<ScenarioConfig, Error> {
    for item in overrides {
        let (key, value) = item.split_once('=').ok_or_else(|| {
            Error::Validation(vec![format!("override '{item}' is not KEY=VALUE")])
        })?;
        cfg = cfg.with_override(key.trim(), value.trim())?;
    }
    Ok(cfg)
}

fn report(summary: &RunSummary) {
    println!(
        "{}: {} ({} frames, {} steps, integrate {:.2}s)",
        summary.preset.as_deref().unwrap_or("run"),
        summary.verdict,
        summary.frames_written,
        summary.steps,
        summary.integrate_sec
    );
    for c in &summary.checks {
        println!(
            "  check {:<28} {}  observed {:.6e}  limit {:.6e}",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.observed,
            c.limit
        );
    }
    for m in &summary.monitors {
        println!(
            "  monitor {:<26} {}  worst slack {:.6e}",
            m.name,
            if m.passed { "pass" } else { "FAIL" },
            m.worst_slack
        );
    }
    println!("  frames:  {}", summary.frames_csv);
    println!("  summary: {}", summary.summary_json);
}

fn run_one(cfg: &ScenarioConfig) -> ExitCode {
    match run_scenario(cfg) {
        Ok(summary) => {
            report(&summary);
            if summary.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[derive(Serialize)]
struct SweepEntry {
    value: String,
    verdict: String,
    summary_json: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => match ScenarioConfig::load(&config) {
            Ok(cfg) => run_one(&cfg),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Command::Preset { name, overrides, out_dir, print_config } => {
            let built = preset(&name).and_then(|cfg| apply_overrides(cfg, &overrides));
            match built {
                Ok(mut cfg) => {
                    if let Some(dir) = out_dir {
                        cfg.outputs.dir = dir;
                    } else {
                        cfg.outputs.dir = PathBuf::from("out").join(&name);
                    }
                    if print_config {
                        match cfg.to_toml_string() {
                            Ok(text) => {
                                println!("{text}");
                                ExitCode::SUCCESS
                            }
                            Err(e) => {
                                eprintln!("error: {e}");
                                ExitCode::from(2)
                            }
                        }
                    } else {
                        run_one(&cfg)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Sweep { config, param, values } => {
            let cfg = match ScenarioConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(e.exit_code() as u8);
                }
            };
            let mut entries = Vec::new();
            let mut worst = ExitCode::SUCCESS;
            for value in values.split(',').map(str::trim).filter(|v| !v.is_empty()) {
                let run_cfg = cfg
                    .with_override(&param, value)
                    .map(|mut c| {
                        c.outputs.dir =
                            cfg.outputs.dir.join(format!("{}={}", param.replace('.', "_"), value));
                        c
                    });
                match run_cfg {
                    Ok(c) => match run_scenario(&c) {
                        Ok(summary) => {
                            println!("{param} = {value}: {}", summary.verdict);
                            if !summary.passed() {
                                worst = ExitCode::from(1);
                            }
                            entries.push(SweepEntry {
                                value: value.to_string(),
                                verdict: summary.verdict.clone(),
                                summary_json: summary.summary_json.clone(),
                            });
                        }
                        Err(e) => {
                            eprintln!("{param} = {value}: error: {e}");
                            return ExitCode::from(e.exit_code() as u8);
                        }
                    },
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(e.exit_code() as u8);
                    }
                }
            }
            let index = cfg.outputs.dir.join("sweep.json");
            if let Err(e) = lohe::scenario::emit::write_json(&index, &entries) {
                eprintln!("error writing sweep index: {e}");
                return ExitCode::from(3);
            }
            println!("sweep index: {}", index.display());
            worst
        }
        Command::ListPresets => {
            for (name, doc) in PRESET_NAMES {
                println!("{name:<24} {doc}");
            }
            ExitCode::SUCCESS
        }
    }
}

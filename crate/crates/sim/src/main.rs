use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use d2dprice_sim::config::FULL_TRIALS;
use d2dprice_sim::{preset, run, write_output, ScenarioConfig, PRESETS};

#[derive(Parser)]
#[command(
    name = "d2dsim",
    version,
    about = "Interference pricing experiments for D2D underlay networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV plus a `.meta.json` sidecar.
    Run {
        /// Scenario config (JSON).
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        /// Use a shipped preset instead of a config file (see `list-scenarios`).
        #[arg(long)]
        preset: Option<String>,
        /// Directory the output path is resolved against.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the topology seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of Monte Carlo trials.
        #[arg(long, conflicts_with = "full")]
        trials: Option<usize>,
        /// Run the full 1000-trial Monte Carlo.
        #[arg(long)]
        full: bool,
    },
    /// List the shipped presets.
    ListScenarios,
    /// Print a preset's JSON config.
    ShowPreset { name: String },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::ListScenarios => {
            for (name, about, text) in PRESETS {
                let cfg = ScenarioConfig::from_json(text)?;
                println!("{name:<6} {:<24} {about}", format!("{:?}", cfg.scenario));
            }
        }
        Command::ShowPreset { name } => {
            let (_, _, text) = PRESETS
                .iter()
                .find(|(n, _, _)| *n == name)
                .with_context(|| format!("unknown preset `{name}`"))?;
            print!("{text}");
        }
        Command::Run {
            config,
            preset: preset_name,
            out,
            seed,
            trials,
            full,
        } => {
            let mut cfg = match (config, preset_name) {
                (Some(path), None) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    ScenarioConfig::from_json(&text)
                        .with_context(|| format!("parsing {}", path.display()))?
                }
                (None, Some(name)) => preset(&name)?,
                _ => bail!("pass exactly one of --config or --preset"),
            };
            if let Some(s) = seed {
                cfg.topology.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = Some(t);
            }
            if full {
                cfg.trials = Some(FULL_TRIALS);
            }
            cfg.validate()?;
            let output = run(&cfg)?;
            let (csv, meta) = write_output(&output, out.as_deref())?;
            println!(
                "wrote {} ({} rows) and {}",
                csv.display(),
                output.metadata.rows,
                meta.display()
            );
            if !output.metadata.excluded.is_empty() {
                println!(
                    "{} trial points excluded from aggregates",
                    output.metadata.excluded.len()
                );
            }
        }
    }
    Ok(())
}

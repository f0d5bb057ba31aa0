use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ssh_core::scenario::{self, load_config, load_config_str, preset, PRESETS};
use ssh_core::Error;

/// Finite SSH chain simulator driven by JSON scenario files.
#[derive(Parser)]
#[command(name = "ssh-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or a bundled preset by name) and print the run summary.
    Run { config: String },
    /// Check a scenario file without running it.
    Validate { config: String },
    /// Inspect the bundled presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset's JSON.
    Dump {
        name: String,
    },
}

fn load(arg: &str) -> Result<(serde_json::Value, scenario::ScenarioConfig), Error> {
    let path = Path::new(arg);
    match preset(arg) {
        Some(text) if !path.exists() => load_config_str(text, arg),
        _ => load_config(path),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => load(&config).and_then(|(raw, cfg)| {
            let out_dir = std::env::var_os(scenario::OUT_DIR_ENV).map(PathBuf::from);
            let summary = scenario::run_scenario(&cfg, &raw, out_dir.as_deref())?;
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
            Ok(())
        }),
        Command::Validate { config } => {
            load(&config).map(|(_, cfg)| println!("ok: {config} ({})", cfg.kind()))
        }
        Command::Presets {
            action: PresetAction::List,
        } => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
            Ok(())
        }
        Command::Presets {
            action: PresetAction::Dump { name },
        } => match preset(&name) {
            Some(text) => {
                print!("{text}");
                Ok(())
            }
            None => Err(Error::Config(vec![format!("unknown preset \"{name}\"")])),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use pairstate::fieldmodel::{electric_field_at, envelope, vector_potential_at};
use pairstate::fockoracle::cross_check;
use pairstate::modebasis::ModeBasis;
use pairstate::physconfig::RunConfig;
use pairstate::Error;
use pairstate_cli::{figure_configs, preset, run_once, run_sweep, SweepSpec};

/// Exact oracle agreement required by `oracle-check`.
const ORACLE_TOLERANCE: f64 = 1e-8;

#[derive(Parser)]
#[command(name = "pairstate", version, about = "Multi-pair states from laser-driven vacuum pair creation")]
struct Cli {
    /// Output directory; overrides the one in a sweep spec.
    #[arg(long, global = true, env = "PAIRSTATE_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate one configuration and report pair probabilities.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a sweep described by a JSON spec.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Print a named figure preset.
    Preset {
        #[arg(long)]
        name: Option<String>,
        /// Print the bare config, loadable by `run --config`.
        #[arg(long)]
        emit_config: bool,
    },
    /// Compare determinant amplitudes with exact Fock-space propagation.
    OracleCheck {
        #[arg(long)]
        config: PathBuf,
        /// Largest pair number compared.
        #[arg(long, default_value_t = 2)]
        max_pairs: usize,
    },
    /// Print the mode table as CSV.
    DumpBasis {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the field at z = 0 as CSV.
    DumpField {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 32)]
        samples_per_cycle: usize,
    },
}

/// Accepts a bare config or a preset document with a `config` key.
fn load_config(path: &Path) -> Result<RunConfig, Error> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let inner = value.get("config").cloned().unwrap_or(value);
    let config: RunConfig = serde_json::from_value(inner)?;
    config.validate()
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(err) if err.is_validation() => 2,
        Some(Error::Json(_)) => 2,
        Some(err) if err.is_numerical() => 3,
        _ => 1,
    }
}

fn write_output(dir: &Option<PathBuf>, name: &str, contents: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(name), contents).with_context(|| format!("writing {name}"))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config } => {
            let config = load_config(&config)?;
            let outcome = run_once(&config)?;
            let json = serde_json::to_string_pretty(&outcome)?;
            write_output(&cli.output_dir, "run.json", json.as_bytes())?;
            let mut sectors = Vec::new();
            outcome.report.write_sectors_csv(&mut sectors)?;
            write_output(&cli.output_dir, "sectors.csv", &sectors)?;
            let basis = ModeBasis::build(&config.numerics, &config.field);
            let mut states = Vec::new();
            outcome.report.write_states_csv(&basis, &mut states)?;
            write_output(&cli.output_dir, "states.csv", &states)?;
            println!("{}", serde_json::to_string_pretty(&outcome.row)?);
        }
        Command::Sweep { spec } => {
            let text = fs::read_to_string(&spec)?;
            let mut spec = SweepSpec::from_json_str(&text)?;
            if let Some(dir) = cli.output_dir {
                spec.outputs = dir;
            }
            let result = run_sweep(&spec)?;
            eprintln!(
                "{} points ({} computed, {} cached, {} failed); wrote {} and {}",
                result.rows.len(),
                result.computed,
                result.reused,
                result.failures(),
                result.csv_path.display(),
                result.json_path.display()
            );
        }
        Command::Preset { name, emit_config } => match name {
            None => {
                for p in figure_configs() {
                    println!("{}", p.name);
                }
            }
            Some(name) => {
                let p = preset(&name).ok_or_else(|| Error::InvalidInput(format!("unknown preset {name}")))?;
                if emit_config {
                    println!("{}", p.config.to_json_pretty());
                } else {
                    println!("{}", serde_json::to_string_pretty(&p)?);
                }
            }
        },
        Command::OracleCheck { config, max_pairs } => {
            let config = load_config(&config)?;
            let basis = ModeBasis::build(&config.numerics, &config.field);
            let check = cross_check(&config, &basis, max_pairs)?;
            println!("{}", serde_json::to_string_pretty(&check)?);
            let diff = check.max_difference();
            if diff > ORACLE_TOLERANCE {
                return Err(Error::OracleMismatch { difference: diff, tolerance: ORACLE_TOLERANCE }.into());
            }
        }
        Command::DumpBasis { config } => {
            let config = load_config(&config)?;
            let basis = ModeBasis::build(&config.numerics, &config.field);
            basis.write_csv(std::io::stdout().lock())?;
        }
        Command::DumpField { config, samples_per_cycle } => {
            let config = load_config(&config)?;
            if samples_per_cycle == 0 {
                return Err(anyhow!(Error::InvalidInput("samples_per_cycle must be positive".into())));
            }
            println!("t_cycles,envelope,A_x,A_y,A_z,E_x,E_y,E_z");
            let total = config.window.total_cycles() as usize * samples_per_cycle;
            for i in 0..=total {
                let t = i as f64 / samples_per_cycle as f64;
                let a = vector_potential_at(0.0, t, &config.field, &config.window);
                let e = electric_field_at(0.0, t, &config.field, &config.window);
                println!(
                    "{t},{},{},{},{},{},{},{}",
                    envelope(t, &config.window),
                    a[0],
                    a[1],
                    a[2],
                    e[0],
                    e[1],
                    e[2]
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

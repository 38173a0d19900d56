use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fedwire::config::{ExperimentConfig, Paradigm};
use fedwire::output::write_trace;
use fedwire::overlay::emit_bound_overlay;
use fedwire::sweep::{run_sweep, write_sweep};
use fedwire::trial::{run_trial, Setup, SimError};

/// Federated learning over digital and analog wireless uplinks.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Override the config's paradigm.
    #[arg(long, global = true)]
    paradigm: Option<Paradigm>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded trial and write `trace_<paradigm>.csv`.
    Run {
        #[command(flatten)]
        common: Common,
        /// Defaults to the first seed of the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep one config key over a list of values.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: Option<String>,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<String>>,
    },
    /// Write the bound trajectories and constants.
    Bounds {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common, paradigm: Option<Paradigm>) -> Result<ExperimentConfig, SimError> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(p) = paradigm {
        cfg.paradigm = p;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Run { common, seed } => {
            let cfg = load(&common, cli.paradigm)?;
            let setup = Setup::new(&cfg)?;
            setup.check_learning_rate()?;
            let seed = seed.unwrap_or(cfg.seeds[0]);
            fs::create_dir_all(&common.out)?;
            for trace in run_trial(&setup, seed)? {
                let path = common.out.join(format!("trace_{}.csv", trace.paradigm));
                write_trace(fs::File::create(&path)?, &trace)?;
                let last = trace.rows.last();
                eprintln!(
                    "{}: {} rounds, final gap {}",
                    trace.paradigm,
                    trace.rows.len(),
                    last.map_or("n/a".into(), |r| format!("{:e}", r.gap))
                );
            }
        }
        Command::Sweep {
            common,
            param,
            values,
        } => {
            let cfg = load(&common, cli.paradigm)?;
            let (param, values) = match (param, values, &cfg.sweep) {
                (Some(p), Some(v), _) => (p, v),
                (None, None, Some(s)) => (s.param.clone(), s.values.clone()),
                _ => {
                    return Err(SimError::Infeasible(
                        "give --param and --values, or sweep_param and sweep_values in the config".into(),
                    ))
                }
            };
            let points = run_sweep(&cfg, &param, &values)?;
            for pt in &points {
                if let Err(reason) = &pt.outcome {
                    eprintln!("{param} = {}: skipped ({reason})", pt.value);
                }
            }
            write_sweep(&common.out, &param, &points)?;
        }
        Command::Bounds { common } => {
            let cfg = load(&common, cli.paradigm)?;
            let setup = Setup::new(&cfg)?;
            emit_bound_overlay(&setup, &common.out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_infeasible() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

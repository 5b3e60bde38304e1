use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use vm15_core::config::RunConfig;
use vm15_core::profile::ProfileRegistry;
use vm15_core::runner::{self, ModeRegistry};
use vm15_core::Error;

/// Semi-Lagrangian 1.5D Vlasov-Maxwell runs, diagnostics and plot data.
#[derive(Parser)]
#[command(name = "vm15", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration and write its artifacts.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to the number of hardware threads.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write columnar plot data for one quantity of a finished run.
    Plot {
        /// Run directory.
        #[arg(long)]
        out: PathBuf,
        quantity: String,
    },
    /// Parse and check a configuration without running it.
    ValidateConfig {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// `key=value` with dotted keys, e.g. `grid.cells=[64,32,32]`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> vm15_core::Result<RunConfig> {
        RunConfig::load(&self.config, &self.overrides)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.reason());
            ExitCode::from(e.exit_kind().code() as u8)
        }
    }
}

fn dispatch(command: Command) -> vm15_core::Result<()> {
    let profiles = ProfileRegistry::builtin();
    let modes = ModeRegistry::builtin();
    match command {
        Command::Run { config, out, threads } => {
            let mut cfg = config.load()?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
            }
            info!("mode {} -> {}", cfg.mode, cfg.output_dir.display());
            let report = runner::run(&cfg, &cfg.output_dir, &profiles, &modes)?;
            info!(
                "{} steps; manifest {}",
                report.steps_completed,
                report.manifest.display()
            );
            for (k, v) in &report.summary {
                println!("{k} = {v}");
            }
            Ok(())
        }
        Command::Plot { out, quantity } => {
            let path = runner::emit_plot_data(&out, &quantity)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::ValidateConfig { config } => {
            let cfg = config.load()?;
            let sim = runner::validate(&cfg, &profiles, &modes)?;
            let g = sim.f0.grid;
            println!(
                "ok: mode {}, profile {}, grid {}x{}x{} cells, dt {}, {} steps",
                cfg.mode,
                sim.profile.name(),
                g.x.cells,
                g.v1.cells,
                g.v2.cells,
                sim.solver.dt,
                sim.steps
            );
            Ok(())
        }
    }
}

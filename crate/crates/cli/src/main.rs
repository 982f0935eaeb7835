use clap::{Args, Parser, Subcommand};
use odds_core::experiments::{run_experiment, ExperimentConfig, ExperimentKind, CONFIG_SCHEMA};
use odds_core::OddsError;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Stochastic NLS experiments: splitting solver and finite-difference baselines.
///
/// Settings are taken from the preset, then the config file, then flags;
/// later sources win.
#[derive(Parser)]
#[command(name = "odds", version)]
struct Cli {
    /// Directory receiving every experiment's output folder.
    #[arg(long, env = "ODDS_OUTPUT_ROOT", default_value = "odds-output", global = true)]
    output_root: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config (or a preset).
    Run {
        /// Config file; see `print-config-schema`.
        config: Option<PathBuf>,
        /// Start from the built-in preset of this kind instead of a file.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Use the long published horizons and trajectory counts (slow).
        #[arg(long, requires = "preset")]
        full: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Mean-square temporal errors and fitted order on coupled noise paths.
    Convergence {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Wall-clock of the splitting scheme against both baselines.
    Efficiency {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Preset dimension when no config is given.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        dim: u8,
        #[arg(long)]
        repeats: Option<usize>,
        /// Also time N and 2N trajectories at 1 and 4 workers.
        #[arg(long)]
        scaling: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// List the experiment kinds.
    ListExperiments,
    /// Print an annotated config template, or the preset of one kind.
    PrintConfigSchema {
        #[arg(long)]
        kind: Option<String>,
    },
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    final_time: Option<f64>,
    /// Noise amplitude; clears any sweep.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Output folder below the output root.
    #[arg(long)]
    output_dir: Option<String>,
}

impl Overrides {
    fn apply(&self, c: &mut ExperimentConfig) {
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.trajectories {
            c.trajectories = v;
        }
        if let Some(v) = self.workers {
            c.workers = v;
        }
        if let Some(v) = self.final_time {
            c.problem.final_time = v;
            // Drop preset snapshots past a shortened horizon.
            c.output.snapshot_times.retain(|&t| t <= v);
        }
        if let Some(v) = self.eps {
            c.problem.eps = v;
            c.problem.eps_sweep.clear();
        }
        if let Some(v) = self.tau {
            c.problem.tau = v;
        }
        if let Some(v) = &self.output_dir {
            c.output_dir = Some(v.clone());
        }
    }
}

fn parse_kind(name: &str) -> Result<ExperimentKind, OddsError> {
    ExperimentKind::parse(name)
        .ok_or_else(|| OddsError::Config(format!("unknown experiment kind {name:?}; try list-experiments")))
}

fn load(path: Option<&Path>, fallback: ExperimentConfig, want: ExperimentKind) -> Result<ExperimentConfig, OddsError> {
    let c = match path {
        Some(p) => ExperimentConfig::from_path(p)?,
        None => fallback,
    };
    if c.kind != want {
        return Err(OddsError::Config(format!("config kind is {}, expected {}", c.kind.name(), want.name())));
    }
    Ok(c)
}

fn execute(config: ExperimentConfig, root: &Path) -> Result<(), OddsError> {
    config.validate()?;
    let outcome = run_experiment(&config, root)?;
    let m = &outcome.manifest;
    println!("{} -> {}", m.kind, outcome.dir.display());
    for a in &m.artifacts {
        println!("  {} ({} bytes)", a.file, a.bytes);
    }
    println!("status: {} (artifact version {})", m.status, m.artifact_version);
    for f in &m.failures {
        eprintln!("trajectory {} at eps {} failed: {}", f.trajectory, f.eps, f.error);
    }
    outcome.into_result().map(|_| ())
}

fn run(cli: Cli) -> Result<(), OddsError> {
    let root = cli.output_root;
    match cli.command {
        Command::Run { config, preset, full, overrides } => {
            let mut c = match (config, preset) {
                (Some(p), _) => ExperimentConfig::from_path(&p)?,
                (None, Some(k)) if full => ExperimentConfig::full_horizon(parse_kind(&k)?),
                (None, Some(k)) => ExperimentConfig::preset(parse_kind(&k)?),
                (None, None) => return Err(OddsError::Config("give a config path or --preset".into())),
            };
            overrides.apply(&mut c);
            execute(c, &root)
        }
        Command::Convergence { config, overrides } => {
            let kind = ExperimentKind::Convergence;
            let mut c = load(config.as_deref(), ExperimentConfig::preset(kind), kind)?;
            overrides.apply(&mut c);
            execute(c, &root)
        }
        Command::Efficiency { config, dim, repeats, scaling, overrides } => {
            let fallback = if dim == 2 {
                ExperimentConfig::preset_efficiency_2d()
            } else {
                ExperimentConfig::preset(ExperimentKind::Efficiency)
            };
            let mut c = load(config.as_deref(), fallback, ExperimentKind::Efficiency)?;
            if let Some(e) = c.efficiency.as_mut() {
                if let Some(r) = repeats {
                    e.repeats = r;
                }
                if let Some(s) = scaling {
                    e.scaling_trajectories = s;
                }
            }
            overrides.apply(&mut c);
            execute(c, &root)
        }
        Command::ListExperiments => {
            for k in ExperimentKind::ALL {
                println!("{:<12} {}", k.name(), k.describe());
            }
            Ok(())
        }
        Command::PrintConfigSchema { kind } => {
            match kind {
                Some(k) => print!("{}", ExperimentConfig::preset(parse_kind(&k)?).to_toml_string()),
                None => print!("{CONFIG_SCHEMA}"),
            }
            Ok(())
        }
    }
}

fn exit_code(e: &OddsError) -> u8 {
    match e {
        OddsError::Config(_) | OddsError::InvalidParameter(_) => EXIT_CONFIG,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

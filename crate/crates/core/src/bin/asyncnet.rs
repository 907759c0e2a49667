use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use asyncnet::harness::{
    analyze, curves_csv, emit_csv, emit_report, load_config, preset, run_compare, run_validation, tail_means_csv,
    to_json, ExperimentConfig, StrategyToggles,
};
use asyncnet::moments::MomentSet;
use asyncnet::sim::{run_trials, steady_state, Scenario, StrategyKind};
use asyncnet::{Error, Result};

#[derive(Parser)]
#[command(
    name = "asyncnet",
    version,
    about = "Asynchronous diffusion adaptation: theory and simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Experiment config (JSON)
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset: paper-fig3 or desk
    #[arg(long)]
    preset: Option<String>,
    /// Override the simulation base seed
    #[arg(long)]
    seed: Option<u64>,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = match (&self.config, &self.preset) {
            (Some(path), _) => load_config(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => return Err(Error::validation("config", "pass --config or --preset")),
        };
        if let Some(seed) = self.seed {
            if config.parameter_seed.is_none() {
                config.parameter_seed = Some(config.seed);
            }
            config.seed = seed;
        }
        Ok(config)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    #[value(alias = "dist_async")]
    DistAsync,
    #[value(alias = "dist_sync")]
    DistSync,
    #[value(alias = "cent_async")]
    CentAsync,
    #[value(alias = "cent_sync")]
    CentSync,
}

impl From<Strategy> for StrategyKind {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::DistAsync => StrategyKind::DistAsync,
            Strategy::DistSync => StrategyKind::DistSync,
            Strategy::CentAsync => StrategyKind::CentAsync,
            Strategy::CentSync => StrategyKind::CentSync,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state predictions and stability
    Theory {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo learning curves
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Strategies to run (default: those enabled in the config)
        #[arg(long, value_enum, value_delimiter = ',')]
        strategy: Vec<Strategy>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Per-trial tail means
        #[arg(long)]
        tails: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Theory, simulation and property checks in one report
    Compare {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the property suites
    Validate {
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean and second-order moments of the combination process
    SampleMoments {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_or_print<T: serde::Serialize>(value: &T, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => emit_report(value, path),
        None => {
            print!("{}", to_json(value));
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Theory { source, out } => {
            let analysis = analyze(&source.load()?)?;
            write_or_print(&analysis.theory, &out)?;
            Ok(true)
        }
        Command::Simulate {
            source,
            strategy,
            trials,
            iterations,
            csv,
            tails,
            out,
        } => {
            let mut config = source.load()?;
            if !strategy.is_empty() {
                let kinds: Vec<StrategyKind> = strategy.into_iter().map(Into::into).collect();
                config.strategies = StrategyToggles::only(&kinds);
            }
            if let Some(t) = trials {
                config.simulation.trials = t;
            }
            if let Some(n) = iterations {
                config.simulation.iterations = n;
            }
            config.validate()?;
            let experiment = config.materialize()?;
            let scenario = Scenario::new(experiment.model, experiment.truth)?;
            let curves = run_trials(
                &scenario,
                &config.strategies.enabled(),
                &config.simulation_settings(),
                config.seed,
                config.simulation.trials,
            )?;
            if let Some(path) = &csv {
                emit_csv(&curves, path)?;
            }
            if let Some(path) = &tails {
                let text = tail_means_csv(&curves, config.simulation.tail_fraction);
                std::fs::write(path, text).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
            }
            let steady: BTreeMap<_, _> = curves
                .iter()
                .map(|(k, c)| Ok((*k, steady_state(c, config.simulation.tail_fraction)?)))
                .collect::<Result<_>>()?;
            if csv.is_none() && out.is_none() {
                print!("{}", curves_csv(&curves));
            } else {
                write_or_print(&steady, &out)?;
            }
            Ok(true)
        }
        Command::Compare { source, out, csv } => {
            let comparison = run_compare(&source.load()?)?;
            if let Some(path) = &csv {
                emit_csv(&comparison.curves, path)?;
            }
            write_or_print(&comparison.report, &out)?;
            let report = &comparison.report;
            if let Some(e) = &report.error {
                eprintln!("error: {e}");
            }
            for c in report.failed_checks() {
                eprintln!("check failed: {} (measured {})", c.name, c.measured);
            }
            Ok(report.all_passed())
        }
        Command::Validate { quick, out } => {
            let report = run_validation(quick)?;
            for c in &report.checks {
                eprintln!(
                    "{} {} (measured {:e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured
                );
            }
            if out.is_some() {
                write_or_print(&report, &out)?;
            }
            Ok(report.passed())
        }
        Command::SampleMoments { source, out } => {
            let config = source.load()?;
            let experiment = config.materialize()?;
            let moments = MomentSet::compute(&experiment.model, config.second_moment_mode())?;
            write_or_print(&moments, &out)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

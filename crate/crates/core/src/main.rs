use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use antijam::config::{Preset, ScenarioConfig};
use antijam::harness::{self, Baseline, JammerKind, SweepAxis, SweepSpec};
use antijam::{exec, Error, Result};

#[derive(Parser)]
#[command(name = "antijam", version, about = "MU-MIMO-OFDM uplink anti-jamming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its rates.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Preset used when no config file is given.
        #[arg(long, default_value = "desk")]
        preset: String,
        #[arg(long, default_value = "sensing-assisted")]
        baseline: String,
        #[arg(long, default_value = "worst-case")]
        jammer: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the jammer's per-RE trace and top eigenvalue.
        #[arg(long)]
        jammer_csv: Option<PathBuf>,
    },
    /// Sweep one parameter over several baselines and seeds.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "desk")]
        preset: String,
        #[arg(long)]
        axis: String,
        /// Comma separated values; defaults depend on the axis.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        base_seed: u64,
        /// Comma separated `baseline:jammer` pairs.
        #[arg(long, value_delimiter = ',')]
        curves: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a config file and print the resolved scenario.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(config: Option<PathBuf>, preset: &str) -> Result<ScenarioConfig> {
    match config {
        Some(path) => ScenarioConfig::from_file(path),
        None => Ok(Preset::parse(preset)?.config()),
    }
}

fn parse_curve(s: &str) -> Result<(Baseline, JammerKind)> {
    let (b, j) = s
        .split_once(':')
        .ok_or_else(|| Error::Input(format!("curve `{s}` must look like baseline:jammer")))?;
    Ok((Baseline::parse(b)?, JammerKind::parse(j)?))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, preset, baseline, jammer, seed, out, jammer_csv } => {
            let cfg = load(config, &preset)?;
            let outcome =
                harness::run_scenario_detailed(&cfg, Baseline::parse(&baseline)?, JammerKind::parse(&jammer)?, seed)?;
            let r = &outcome.report;
            println!(
                "baseline={} jammer={} seed={} RA_bits={:.3} RB_bits={:.3} iterations={} converged={}",
                r.baseline, r.jammer, r.seed, r.ra_bits, r.rb_bits, r.allocator_iterations, r.allocator_converged
            );
            if let Some(path) = out {
                let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                let mut w = csv::Writer::from_writer(file);
                let csv_err = |source| Error::Csv { path: path.clone(), source };
                w.write_record(["baseline", "jammer_kind", "seed", "RA_bits", "RB_bits", "iterations", "converged"])
                    .map_err(csv_err)?;
                w.write_record([
                    r.baseline.name().to_string(),
                    r.jammer.name().to_string(),
                    r.seed.to_string(),
                    r.ra_bits.to_string(),
                    r.rb_bits.to_string(),
                    r.allocator_iterations.to_string(),
                    r.allocator_converged.to_string(),
                ])
                .map_err(csv_err)?;
                w.flush().map_err(|e| Error::io(&path, e))?;
            }
            if let Some(path) = jammer_csv {
                outcome.strategy.write_csv_file(path)?;
            }
        }
        Command::Sweep { config, preset, axis, values, trials, base_seed, curves, out } => {
            let cfg = load(config, &preset)?;
            cfg.validate()?;
            let axis = SweepAxis::parse(&axis)?;
            let values = if values.is_empty() { axis.default_values() } else { values };
            let mut spec = SweepSpec::new(axis, values, trials);
            spec.base_seed = base_seed;
            if !curves.is_empty() {
                spec.curves = curves.iter().map(|c| parse_curve(c)).collect::<Result<_>>()?;
            }
            let table = harness::run_sweep(&spec, &cfg)?;
            for s in table.summarize() {
                println!(
                    "{}={} {}/{}: RB mean {:.2} std {:.2} ({} trials)",
                    axis.name(),
                    s.sweep_value,
                    s.baseline,
                    s.jammer_kind,
                    s.mean_rb,
                    s.std_rb,
                    s.trials
                );
            }
            if !table.failures.is_empty() {
                eprintln!("{} trials failed", table.failures.len());
            }
            harness::emit_results(&table, &out)?;
        }
        Command::Validate { config } => {
            let cfg = ScenarioConfig::from_file(&config)?;
            cfg.validate()?;
            println!("{}", cfg.to_json());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    exec::init_workers_from_env();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

//! Scenario pipeline, baselines and parameter sweeps.
//!
//! One scenario run: synthesise channels, let the legitimate side optimise
//! against whatever covariance its baseline knows, let the jammer respond to
//! the resulting allocation, optionally re-optimise with full knowledge of
//! the jamming, then evaluate both rate metrics under the true covariance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::allocator::{iterative_allocate, surrogate_covariance, AllocationOutcome, AllocatorOptions};
use crate::channel::{generate_scenario_geometry, ChannelSet};
use crate::config::ScenarioConfig;
use crate::exec;
use crate::grid::{build_resource_partition, dbm_to_mw, Allocation, ResourcePartition};
use crate::jammer::{barrage_strategy, worst_case_strategy, JammerStrategy};
use crate::linalg::CMat;
use crate::rates::{noise_covariances, sum_rate, user_sum_rate_with_receiver, white_noise, RateReport};
use crate::{Error, Result};

pub use crate::jammer::JammerKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// No jamming at all.
    NoJammer,
    /// Jammer active, transceivers designed for white noise.
    NoProtection,
    /// Transceivers re-optimised against the true jamming covariance.
    FullKnowledge,
    /// Transceivers designed against the DoA-based surrogate covariance.
    SensingAssisted,
}

impl Baseline {
    pub const ALL: [Baseline; 4] =
        [Baseline::NoJammer, Baseline::NoProtection, Baseline::FullKnowledge, Baseline::SensingAssisted];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::NoJammer => "no-jammer",
            Baseline::NoProtection => "no-protection",
            Baseline::FullKnowledge => "full-knowledge",
            Baseline::SensingAssisted => "sensing-assisted",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown baseline `{s}`")))
    }
}

impl std::fmt::Display for Baseline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything a scenario run produced, for inspection and validation.
#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub report: RateReport,
    pub config: ScenarioConfig,
    pub channels: ChannelSet,
    pub partition: ResourcePartition,
    pub allocation: Allocation,
    pub strategy: JammerStrategy,
    /// True `C_z` per RE.
    pub true_cz: Vec<CMat>,
    /// Covariance the receiver used for its equalizers.
    pub receiver_cz: Vec<CMat>,
}

pub fn run_scenario(cfg: &ScenarioConfig, baseline: Baseline, jammer: JammerKind, seed: u64) -> Result<RateReport> {
    run_scenario_detailed(cfg, baseline, jammer, seed).map(|o| o.report)
}

pub fn run_scenario_detailed(
    cfg: &ScenarioConfig,
    baseline: Baseline,
    jammer: JammerKind,
    seed: u64,
) -> Result<ScenarioOutcome> {
    let mut config = cfg.clone();
    config.system.seed = seed;
    config.validate()?;
    let sys = &config.system;

    let geometry = generate_scenario_geometry(sys, &config.geometry);
    let channels = ChannelSet::synthesize(&geometry, sys);
    let partition = build_resource_partition(sys)?;
    let res = channels.dims.len();
    let jammer = if baseline == Baseline::NoJammer { JammerKind::None } else { jammer };
    let opts = AllocatorOptions { eig_seed: seed, ..AllocatorOptions::default() };

    let white = white_noise(res, sys.rx_antennas, sys.noise_mw);
    let design = match baseline {
        Baseline::SensingAssisted => {
            let s = surrogate_covariance(&channels.jammer_doas, sys.eta, sys.noise_mw, sys.rx_antennas);
            vec![s.matrix; res]
        }
        _ => white,
    };
    let first = iterative_allocate(&channels, &design, &partition, sys.user_power_mw, &opts)?;
    first.allocation.validate(&partition, sys.user_power_mw)?;

    let strategy = match jammer {
        JammerKind::WorstCase => worst_case_strategy(&channels, &first.allocation, sys.jammer_power_mw)?,
        JammerKind::Barrage => barrage_strategy(channels.dims, sys.jammer_antennas, sys.jammer_power_mw),
        JammerKind::None => JammerStrategy::silent(channels.dims, sys.jammer_antennas),
    };
    strategy.validate(sys.jammer_power_mw)?;
    let true_cz = noise_covariances(&channels, &strategy.covariances, sys.noise_mw)?;

    // Full knowledge re-optimises once against the realised jamming; the
    // jammer does not respond again.
    let (outcome, receiver_cz): (AllocationOutcome, Vec<CMat>) = if baseline == Baseline::FullKnowledge {
        let second = iterative_allocate(&channels, &true_cz, &partition, sys.user_power_mw, &opts)?;
        second.allocation.validate(&partition, sys.user_power_mw)?;
        (second, true_cz.clone())
    } else {
        (first, design)
    };

    let rb = user_sum_rate_with_receiver(&outcome.allocation, &channels, &true_cz, &receiver_cz)?;
    let ra = sum_rate(&outcome.allocation, &channels, &true_cz)?;
    let report = RateReport {
        baseline,
        jammer,
        seed,
        ra_bits: ra,
        rb_bits: rb.total,
        sinr: rb.sinr,
        allocator_iterations: outcome.iterations,
        allocator_converged: outcome.converged,
    };
    Ok(ScenarioOutcome {
        report,
        config,
        channels,
        partition,
        allocation: outcome.allocation,
        strategy,
        true_cz,
        receiver_cz,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "nj")]
    JammerAntennas,
    #[serde(rename = "pj")]
    JammerPowerDbm,
    #[serde(rename = "doa")]
    JammerDoaDeg,
    #[serde(rename = "users")]
    Users,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::JammerAntennas => "nj",
            SweepAxis::JammerPowerDbm => "pj",
            SweepAxis::JammerDoaDeg => "doa",
            SweepAxis::Users => "users",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "nj" => Ok(SweepAxis::JammerAntennas),
            "pj" => Ok(SweepAxis::JammerPowerDbm),
            "doa" => Ok(SweepAxis::JammerDoaDeg),
            "users" => Ok(SweepAxis::Users),
            other => Err(Error::Input(format!("unknown sweep axis `{other}` (nj | pj | doa | users)"))),
        }
    }

    /// Copy of `template` with this axis set to `value`.
    pub fn apply(self, template: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = template.clone();
        let count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(v as usize)
            } else {
                Err(Error::Input(format!("{} sweep needs positive integers, got {v}", self.name())))
            }
        };
        match self {
            SweepAxis::JammerAntennas => cfg.system.jammer_antennas = count(value)?,
            SweepAxis::JammerPowerDbm => cfg.system.jammer_power_mw = dbm_to_mw(value),
            SweepAxis::JammerDoaDeg => cfg.geometry.jammer_doa_deg = value,
            SweepAxis::Users => cfg.system.users = count(value)?,
        }
        Ok(cfg)
    }

    /// Swept values used when none are given on the command line.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::JammerAntennas => vec![16.0, 32.0, 48.0, 64.0, 96.0, 128.0],
            SweepAxis::JammerPowerDbm => vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0],
            SweepAxis::JammerDoaDeg => vec![0.0, 5.0, 10.0, 15.0, 20.0, 30.0, 45.0, 60.0],
            SweepAxis::Users => vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        }
    }
}

/// Baseline / jammer combinations plotted by default.
pub fn default_curves() -> Vec<(Baseline, JammerKind)> {
    vec![
        (Baseline::NoJammer, JammerKind::None),
        (Baseline::NoProtection, JammerKind::WorstCase),
        (Baseline::NoProtection, JammerKind::Barrage),
        (Baseline::FullKnowledge, JammerKind::WorstCase),
        (Baseline::SensingAssisted, JammerKind::WorstCase),
        (Baseline::SensingAssisted, JammerKind::Barrage),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
    pub curves: Vec<(Baseline, JammerKind)>,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, values: Vec<f64>, trials: usize) -> Self {
        SweepSpec { axis, values, trials, base_seed: 1, curves: default_curves() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Input("sweep needs at least one value".into()));
        }
        if self.trials == 0 {
            return Err(Error::Input("sweep needs at least one trial".into()));
        }
        if self.curves.is_empty() {
            return Err(Error::Input("sweep needs at least one baseline".into()));
        }
        Ok(())
    }

    /// Seed of trial `i`; shared across sweep values and baselines.
    pub fn seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_axis: SweepAxis,
    pub sweep_value: f64,
    pub baseline: Baseline,
    pub jammer_kind: JammerKind,
    pub trial: usize,
    pub seed: u64,
    #[serde(rename = "RA_bits")]
    pub ra_bits: f64,
    #[serde(rename = "RB_bits")]
    pub rb_bits: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepFailure {
    pub sweep_value: f64,
    pub baseline: Baseline,
    pub jammer_kind: JammerKind,
    pub trial: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointSummary {
    pub sweep_value: f64,
    pub baseline: Baseline,
    pub jammer_kind: JammerKind,
    pub trials: usize,
    pub mean_rb: f64,
    pub std_rb: f64,
    pub mean_ra: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = crate::linalg::pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = crate::linalg::pairwise_sum(&xs.iter().map(|x| (x - mean).powi(2)).collect::<Vec<_>>()) / (n - 1.0);
    (mean, var.sqrt())
}

impl SweepTable {
    pub fn rows_for(&self, value: f64, baseline: Baseline, jammer: JammerKind) -> impl Iterator<Item = &SweepRow> {
        self.rows
            .iter()
            .filter(move |r| r.sweep_value == value && r.baseline == baseline && r.jammer_kind == jammer)
    }

    /// Per (value, baseline, jammer) mean and sample standard deviation of `R^B`.
    pub fn summarize(&self) -> Vec<PointSummary> {
        let mut keys: Vec<(f64, Baseline, JammerKind)> = Vec::new();
        for r in &self.rows {
            let key = (r.sweep_value, r.baseline, r.jammer_kind);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        keys.into_iter()
            .map(|(value, baseline, jammer_kind)| {
                let rb: Vec<f64> = self.rows_for(value, baseline, jammer_kind).map(|r| r.rb_bits).collect();
                let ra: Vec<f64> = self.rows_for(value, baseline, jammer_kind).map(|r| r.ra_bits).collect();
                let (mean_rb, std_rb) = mean_std(&rb);
                PointSummary { sweep_value: value, baseline, jammer_kind, trials: rb.len(), mean_rb, std_rb, mean_ra: mean_std(&ra).0 }
            })
            .collect()
    }

    pub fn mean_rb(&self, value: f64, baseline: Baseline, jammer: JammerKind) -> f64 {
        let rb: Vec<f64> = self.rows_for(value, baseline, jammer).map(|r| r.rb_bits).collect();
        mean_std(&rb).0
    }
}

/// Runs every (value, curve, trial) combination. Jobs run in parallel; rows
/// come back in (value, curve, trial) order. Failed trials are recorded.
pub fn run_sweep(spec: &SweepSpec, template: &ScenarioConfig) -> Result<SweepTable> {
    spec.validate()?;
    let configs: Vec<ScenarioConfig> =
        spec.values.iter().map(|&v| spec.axis.apply(template, v)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize, usize)> = (0..spec.values.len())
        .flat_map(|v| (0..spec.curves.len()).flat_map(move |c| (0..spec.trials).map(move |t| (v, c, t))))
        .collect();
    let results = exec::map_slice(&jobs, |&(v, c, t)| {
        let (baseline, jammer) = spec.curves[c];
        run_scenario(&configs[v], baseline, jammer, spec.seed(t))
    });

    let mut table = SweepTable::default();
    for (&(v, c, t), result) in jobs.iter().zip(results) {
        let (baseline, jammer_kind) = spec.curves[c];
        match result {
            Ok(report) => table.rows.push(SweepRow {
                sweep_axis: spec.axis,
                sweep_value: spec.values[v],
                baseline,
                jammer_kind: report.jammer,
                trial: t,
                seed: spec.seed(t),
                ra_bits: report.ra_bits,
                rb_bits: report.rb_bits,
            }),
            Err(e) => {
                log::warn!("trial {t} of {baseline}/{jammer_kind} at {} failed: {e}", spec.values[v]);
                table.failures.push(SweepFailure {
                    sweep_value: spec.values[v],
                    baseline,
                    jammer_kind,
                    trial: t,
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(table)
}

pub fn write_results<W: std::io::Write>(rows: &[SweepRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the table as CSV with header
/// `sweep_axis,sweep_value,baseline,jammer_kind,trial,seed,RA_bits,RB_bits`.
pub fn emit_results(table: &SweepTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if table.rows.is_empty() {
        return Err(Error::Input("no result rows to write".into()));
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_results(&table.rows, std::io::BufWriter::new(file)).map_err(|source| Error::Csv { path: path.into(), source })
}

pub fn read_results(path: impl AsRef<Path>) -> Result<SweepTable> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|source| Error::Csv { path: path.into(), source })?;
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<SweepRow>, _>>()
        .map_err(|source| Error::Csv { path: path.into(), source })?;
    Ok(SweepTable { rows, failures: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Preset;

    #[test]
    fn names_round_trip() {
        for b in Baseline::ALL {
            assert_eq!(Baseline::parse(b.name()).unwrap(), b);
        }
        for a in [SweepAxis::JammerAntennas, SweepAxis::JammerPowerDbm, SweepAxis::JammerDoaDeg, SweepAxis::Users] {
            assert_eq!(SweepAxis::parse(a.name()).unwrap(), a);
        }
        assert!(Baseline::parse("oracle").is_err());
        assert!(SweepAxis::parse("eta").is_err());
    }

    #[test]
    fn axes_modify_the_right_field() {
        let base = Preset::Desk.config();
        assert_eq!(SweepAxis::JammerAntennas.apply(&base, 32.0).unwrap().system.jammer_antennas, 32);
        let pj = SweepAxis::JammerPowerDbm.apply(&base, 20.0).unwrap().system.jammer_power_mw;
        assert!((pj - 100.0).abs() < 1e-9);
        assert_eq!(SweepAxis::JammerDoaDeg.apply(&base, -15.0).unwrap().geometry.jammer_doa_deg, -15.0);
        assert_eq!(SweepAxis::Users.apply(&base, 5.0).unwrap().system.users, 5);
        assert!(SweepAxis::Users.apply(&base, 2.5).is_err());
        assert!(SweepAxis::JammerAntennas.apply(&base, 0.0).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(SweepSpec::new(SweepAxis::Users, vec![], 1).validate().is_err());
        assert!(SweepSpec::new(SweepAxis::Users, vec![1.0], 0).validate().is_err());
        let mut spec = SweepSpec::new(SweepAxis::Users, vec![1.0], 1);
        spec.curves.clear();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn sample_statistics() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-15);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn empty_table_is_not_written() {
        let dir = tempfile::tempdir().unwrap();
        let err = emit_results(&SweepTable::default(), dir.path().join("out.csv")).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn no_jammer_baseline_ignores_the_requested_jammer() {
        let cfg = Preset::Desk.config();
        let out = run_scenario_detailed(&cfg, Baseline::NoJammer, JammerKind::WorstCase, 3).unwrap();
        assert_eq!(out.report.jammer, JammerKind::None);
        assert_eq!(out.strategy.total_power(), 0.0);
        assert!(out.report.rb_bits > 0.0);
    }
}

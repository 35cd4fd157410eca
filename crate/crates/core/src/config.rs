//! Scenario configuration: presets and the JSON file format.
//!
//! The file mirrors [`SystemConfig`] field names, with powers in dBm and
//! angles in degrees. Every key except `schema_version` is optional; missing
//! keys are taken from the preset named by `preset` (default `desk`).
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "preset": "paper-defaults",
//!   "users": 3,
//!   "jammer_power_dbm": 30.0,
//!   "geometry": { "jammer_doa_deg": 20.0 }
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::grid::{dbm_to_mw, mw_to_dbm, SystemConfig};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Placement of users and jammer on the circle around the base station.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Central DoA of the jammer's paths.
    pub jammer_doa_deg: f64,
    /// Central DoA of user 1; user `q` sits at `first + q * spacing`.
    pub first_user_doa_deg: f64,
    pub user_spacing_deg: f64,
    /// Half-width of the uniform per-path DoA perturbation.
    pub doa_perturbation_deg: f64,
    /// DoDs are drawn uniformly from `[-dod_range, dod_range]`.
    pub dod_range_deg: f64,
    /// Normalised path delays are drawn from `[0, max_delay]`.
    pub max_delay: f64,
    /// Normalised Doppler shifts are drawn from `[-max_doppler, max_doppler]`.
    pub max_doppler: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            jammer_doa_deg: 20.0,
            first_user_doa_deg: 0.0,
            user_spacing_deg: 5.0,
            doa_perturbation_deg: 5.0,
            dod_range_deg: 60.0,
            max_delay: 0.0,
            max_doppler: 0.0,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self, users: usize) -> Result<()> {
        let finite = [
            self.jammer_doa_deg,
            self.first_user_doa_deg,
            self.user_spacing_deg,
            self.doa_perturbation_deg,
            self.dod_range_deg,
            self.max_delay,
            self.max_doppler,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("geometry values must be finite".into()));
        }
        if self.doa_perturbation_deg < 0.0 || self.dod_range_deg < 0.0 || self.max_delay < 0.0 || self.max_doppler < 0.0 {
            return Err(Error::Config("geometry spreads must be non-negative".into()));
        }
        let last_user = self.first_user_doa_deg + self.user_spacing_deg * users.saturating_sub(1) as f64;
        let extremes = [
            self.jammer_doa_deg.abs(),
            self.first_user_doa_deg.abs(),
            last_user.abs(),
        ];
        for e in extremes {
            if e + self.doa_perturbation_deg >= 90.0 {
                return Err(Error::Config(format!(
                    "DoA {e} deg with perturbation {} deg leaves (-90, 90]",
                    self.doa_perturbation_deg
                )));
            }
        }
        if self.dod_range_deg >= 90.0 {
            return Err(Error::Config("dod_range_deg must be below 90".into()));
        }
        Ok(())
    }
}

/// Everything needed to synthesise and simulate one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub system: SystemConfig,
    pub geometry: GeometryConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Desk-scale grid (N=16, K=4) used by tests and CI.
    Desk,
    /// The full slot: N=64, K=14, N_R=16, N_T=8, Q=3.
    PaperDefaults,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Preset::Desk),
            "paper-defaults" => Ok(Preset::PaperDefaults),
            other => Err(Error::Config(format!("unknown preset `{other}` (desk | paper-defaults)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::PaperDefaults => "paper-defaults",
        }
    }

    pub fn config(self) -> ScenarioConfig {
        let system = SystemConfig {
            users: 3,
            subcarriers: 64,
            symbols: 14,
            tx_antennas: 8,
            rx_antennas: 16,
            jammer_antennas: 64,
            user_power_mw: dbm_to_mw(5.0),
            jammer_power_mw: dbm_to_mw(30.0),
            noise_mw: dbm_to_mw(-3.0),
            eta: 10.0,
            user_paths: 3,
            jammer_paths: 1,
            seed: 1,
        };
        let system = match self {
            Preset::PaperDefaults => system,
            Preset::Desk => SystemConfig { subcarriers: 16, symbols: 4, ..system },
        };
        ScenarioConfig { system, geometry: GeometryConfig::default() }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.geometry.validate(self.system.users)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ScenarioFile =
            serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })?;
        file.resolve()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("scenario JSON: {e}")))?;
        file.resolve()
    }

    pub fn to_file_format(&self) -> ScenarioFile {
        let s = &self.system;
        ScenarioFile {
            schema_version: SCHEMA_VERSION,
            preset: None,
            users: Some(s.users),
            subcarriers: Some(s.subcarriers),
            symbols: Some(s.symbols),
            tx_antennas: Some(s.tx_antennas),
            rx_antennas: Some(s.rx_antennas),
            jammer_antennas: Some(s.jammer_antennas),
            user_power_dbm: Some(mw_to_dbm(s.user_power_mw)),
            jammer_power_dbm: Some(mw_to_dbm(s.jammer_power_mw)),
            noise_dbm: Some(mw_to_dbm(s.noise_mw)),
            eta: Some(s.eta),
            user_paths: Some(s.user_paths),
            jammer_paths: Some(s.jammer_paths),
            seed: Some(s.seed),
            geometry: Some(GeometryFile::from(&self.geometry)),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file_format()).expect("scenario serialises")
    }
}

/// On-disk representation; see the module docs.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub users: Option<usize>,
    pub subcarriers: Option<usize>,
    pub symbols: Option<usize>,
    pub tx_antennas: Option<usize>,
    pub rx_antennas: Option<usize>,
    pub jammer_antennas: Option<usize>,
    pub user_power_dbm: Option<f64>,
    pub jammer_power_dbm: Option<f64>,
    pub noise_dbm: Option<f64>,
    pub eta: Option<f64>,
    pub user_paths: Option<usize>,
    pub jammer_paths: Option<usize>,
    pub seed: Option<u64>,
    pub geometry: Option<GeometryFile>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryFile {
    pub jammer_doa_deg: Option<f64>,
    pub first_user_doa_deg: Option<f64>,
    pub user_spacing_deg: Option<f64>,
    pub doa_perturbation_deg: Option<f64>,
    pub dod_range_deg: Option<f64>,
    pub max_delay: Option<f64>,
    pub max_doppler: Option<f64>,
}

impl From<&GeometryConfig> for GeometryFile {
    fn from(g: &GeometryConfig) -> Self {
        GeometryFile {
            jammer_doa_deg: Some(g.jammer_doa_deg),
            first_user_doa_deg: Some(g.first_user_doa_deg),
            user_spacing_deg: Some(g.user_spacing_deg),
            doa_perturbation_deg: Some(g.doa_perturbation_deg),
            dod_range_deg: Some(g.dod_range_deg),
            max_delay: Some(g.max_delay),
            max_doppler: Some(g.max_doppler),
        }
    }
}

impl ScenarioFile {
    pub fn resolve(self) -> Result<ScenarioConfig> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let preset = Preset::parse(self.preset.as_deref().unwrap_or("desk"))?;
        let ScenarioConfig { mut system, mut geometry } = preset.config();

        macro_rules! take {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src {
                    $dst = v;
                }
            };
        }
        take!(system.users, self.users);
        take!(system.subcarriers, self.subcarriers);
        take!(system.symbols, self.symbols);
        take!(system.tx_antennas, self.tx_antennas);
        take!(system.rx_antennas, self.rx_antennas);
        take!(system.jammer_antennas, self.jammer_antennas);
        take!(system.user_power_mw, self.user_power_dbm.map(dbm_to_mw));
        take!(system.jammer_power_mw, self.jammer_power_dbm.map(dbm_to_mw));
        take!(system.noise_mw, self.noise_dbm.map(dbm_to_mw));
        take!(system.eta, self.eta);
        take!(system.user_paths, self.user_paths);
        take!(system.jammer_paths, self.jammer_paths);
        take!(system.seed, self.seed);
        if let Some(g) = self.geometry {
            take!(geometry.jammer_doa_deg, g.jammer_doa_deg);
            take!(geometry.first_user_doa_deg, g.first_user_doa_deg);
            take!(geometry.user_spacing_deg, g.user_spacing_deg);
            take!(geometry.doa_perturbation_deg, g.doa_perturbation_deg);
            take!(geometry.dod_range_deg, g.dod_range_deg);
            take!(geometry.max_delay, g.max_delay);
            take!(geometry.max_doppler, g.max_doppler);
        }
        let cfg = ScenarioConfig { system, geometry };
        cfg.validate()?;
        Ok(cfg)
    }
}

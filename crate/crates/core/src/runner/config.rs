//! Experiment configuration: a TOML file with top-level keys and `[babf]`, `[ofdm]`,
//! `[scene]` and `[power]` sections. Every key has a default; unknown keys are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::babf::BabfConfig;
use crate::channel::Point;
use crate::equalize::CombinerMethod;
use crate::error::{Error, Result};
use crate::frontend::HybridMode;
use crate::metrics::{Arch, PowerModel};
use crate::waveform::OfdmConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    Greenmo,
    Dbf,
    HbfFull,
    HbfPartial,
    Fdma,
}

impl ArchKind {
    pub fn power_arch(self) -> Arch {
        match self {
            Self::Greenmo => Arch::GreenMo,
            Self::Dbf => Arch::Dbf,
            Self::HbfFull | Self::HbfPartial => Arch::Hbf,
            Self::Fdma => Arch::Fdma,
        }
    }

    pub fn hybrid_mode(self) -> Option<HybridMode> {
        match self {
            Self::HbfFull => Some(HybridMode::Fully),
            Self::HbfPartial => Some(HybridMode::Partially),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Greenmo => "greenmo",
            Self::Dbf => "dbf",
            Self::HbfFull => "hbf_full",
            Self::HbfPartial => "hbf_partial",
            Self::Fdma => "fdma",
        }
    }
}

impl fmt::Display for ArchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Rayleigh,
    Raytrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncMode {
    Aligned,
    Offset,
}

/// How the greenmo switch matrix is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Switching {
    Babf,
    Identity,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinerKind {
    Zf,
    Nullspace,
}

impl From<CombinerKind> for CombinerMethod {
    fn from(c: CombinerKind) -> Self {
        match c {
            CombinerKind::Zf => CombinerMethod::Zf,
            CombinerKind::Nullspace => CombinerMethod::Nullspace,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BabfSection {
    pub phi: f64,
    pub rank_tolerance: f64,
    pub max_fallbacks: usize,
}

impl Default for BabfSection {
    fn default() -> Self {
        let d = BabfConfig::default();
        Self {
            phi: d.phi,
            rank_tolerance: d.rank_tolerance,
            max_fallbacks: d.max_fallbacks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OfdmSection {
    pub user_bandwidth_hz: f64,
    pub payload_symbols: usize,
    pub lts_repetitions: usize,
}

impl Default for OfdmSection {
    fn default() -> Self {
        Self {
            user_bandwidth_hz: 10e6,
            payload_symbols: 10,
            lts_repetitions: 2,
        }
    }
}

/// Room geometry; `users` empty means fresh random positions every trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneSection {
    pub room_x_m: f64,
    pub room_y_m: f64,
    pub ap_x_m: f64,
    pub ap_y_m: f64,
    pub users: Vec<Point>,
    pub gamma: f64,
    pub max_reflections: usize,
    pub carrier_hz: f64,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            room_x_m: 12.0,
            room_y_m: 8.0,
            ap_x_m: 6.0,
            ap_y_m: 0.5,
            users: Vec::new(),
            gamma: 0.6,
            max_reflections: 1,
            carrier_hz: 2.4e9,
        }
    }
}

fn number(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::Config(format!("scene.{key} must be a number"))),
    }
}

impl SceneSection {
    fn from_table(table: &BTreeMap<String, toml::Value>) -> Result<Self> {
        let mut s = Self::default();
        let mut xs: BTreeMap<usize, f64> = BTreeMap::new();
        let mut ys: BTreeMap<usize, f64> = BTreeMap::new();
        for (key, v) in table {
            match key.as_str() {
                "room_x_m" => s.room_x_m = number(key, v)?,
                "room_y_m" => s.room_y_m = number(key, v)?,
                "ap_x_m" => s.ap_x_m = number(key, v)?,
                "ap_y_m" => s.ap_y_m = number(key, v)?,
                "gamma" => s.gamma = number(key, v)?,
                "carrier_hz" => s.carrier_hz = number(key, v)?,
                "max_reflections" => {
                    s.max_reflections = v
                        .as_integer()
                        .and_then(|i| usize::try_from(i).ok())
                        .ok_or_else(|| Error::Config("scene.max_reflections must be a non-negative integer".into()))?
                }
                other => {
                    let user = other
                        .strip_prefix("user")
                        .and_then(|rest| rest.split_once('_'))
                        .and_then(|(idx, axis)| Some((idx.parse::<usize>().ok()?, axis)));
                    match user {
                        Some((i, "x_m")) => {
                            xs.insert(i, number(key, v)?);
                        }
                        Some((i, "y_m")) => {
                            ys.insert(i, number(key, v)?);
                        }
                        _ => return Err(Error::Config(format!("unknown key scene.{other}"))),
                    }
                }
            }
        }
        if xs.keys().ne(ys.keys()) || xs.keys().enumerate().any(|(n, &i)| n != i) {
            return Err(Error::Config(
                "scene users need both user<i>_x_m and user<i>_y_m for i = 0, 1, ...".into(),
            ));
        }
        s.users = xs.values().zip(ys.values()).map(|(&x, &y)| Point::new(x, y)).collect();
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerSection {
    pub single_chain_rfe_mw: f64,
    pub per_chain_rfe_mw: f64,
    pub switch_mw: f64,
    pub adc_mw_per_10mhz: f64,
}

impl Default for PowerSection {
    fn default() -> Self {
        let d = PowerModel::default();
        Self {
            single_chain_rfe_mw: d.single_chain_rfe_mw,
            per_chain_rfe_mw: d.per_chain_rfe_mw,
            switch_mw: d.switch_mw,
            adc_mw_per_10mhz: d.adc_mw_per_10mhz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub arch: Vec<ArchKind>,
    pub users: usize,
    /// Antenna counts swept.
    pub antennas: Vec<usize>,
    /// Physical chains for dbf (default: one per antenna).
    pub dbf_chains: Option<usize>,
    /// Physical chains for hbf (default: one per user).
    pub hbf_chains: Option<usize>,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub scenario: Scenario,
    /// Equal-power taps of the Rayleigh channel.
    pub rayleigh_taps: usize,
    pub sync_mode: SyncMode,
    /// Offset mode draws each user's timing offset uniformly from `[0, max)` samples.
    pub max_offset_samples: f64,
    pub switching: Switching,
    pub combiner: CombinerKind,
    pub insertion_loss_db: f64,
    pub quantizer_bits: Option<u32>,
    pub output: Option<String>,
    pub babf: BabfSection,
    pub ofdm: OfdmSection,
    pub scene: SceneSection,
    pub power: PowerSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            arch: vec![ArchKind::Greenmo],
            users: 4,
            antennas: vec![8],
            dbf_chains: None,
            hbf_chains: None,
            snr_db: vec![15.0],
            trials: 100,
            seed: 1,
            scenario: Scenario::Rayleigh,
            rayleigh_taps: 1,
            sync_mode: SyncMode::Aligned,
            max_offset_samples: 1.0,
            switching: Switching::Babf,
            combiner: CombinerKind::Zf,
            insertion_loss_db: 0.5,
            quantizer_bits: None,
            output: None,
            babf: BabfSection::default(),
            ofdm: OfdmSection::default(),
            scene: SceneSection::default(),
            power: PowerSection::default(),
        }
    }
}

/// Raw file shape; scene keys are patterned so that section is checked by hand.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    arch: Option<Vec<ArchKind>>,
    users: Option<usize>,
    antennas: Option<Vec<usize>>,
    dbf_chains: Option<usize>,
    hbf_chains: Option<usize>,
    snr_db: Option<Vec<f64>>,
    trials: Option<usize>,
    seed: Option<u64>,
    scenario: Option<Scenario>,
    rayleigh_taps: Option<usize>,
    sync_mode: Option<SyncMode>,
    max_offset_samples: Option<f64>,
    switching: Option<Switching>,
    combiner: Option<CombinerKind>,
    insertion_loss_db: Option<f64>,
    quantizer_bits: Option<u32>,
    output: Option<String>,
    babf: Option<BabfSection>,
    ofdm: Option<OfdmSection>,
    scene: Option<BTreeMap<String, toml::Value>>,
    power: Option<PowerSection>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let d = Self::default();
        let cfg = Self {
            arch: raw.arch.unwrap_or(d.arch),
            users: raw.users.unwrap_or(d.users),
            antennas: raw.antennas.unwrap_or(d.antennas),
            dbf_chains: raw.dbf_chains,
            hbf_chains: raw.hbf_chains,
            snr_db: raw.snr_db.unwrap_or(d.snr_db),
            trials: raw.trials.unwrap_or(d.trials),
            seed: raw.seed.unwrap_or(d.seed),
            scenario: raw.scenario.unwrap_or(d.scenario),
            rayleigh_taps: raw.rayleigh_taps.unwrap_or(d.rayleigh_taps),
            sync_mode: raw.sync_mode.unwrap_or(d.sync_mode),
            max_offset_samples: raw.max_offset_samples.unwrap_or(d.max_offset_samples),
            switching: raw.switching.unwrap_or(d.switching),
            combiner: raw.combiner.unwrap_or(d.combiner),
            insertion_loss_db: raw.insertion_loss_db.unwrap_or(d.insertion_loss_db),
            quantizer_bits: raw.quantizer_bits.filter(|&b| b > 0),
            output: raw.output,
            babf: raw.babf.unwrap_or_default(),
            ofdm: raw.ofdm.unwrap_or_default(),
            scene: raw.scene.as_ref().map(SceneSection::from_table).transpose()?.unwrap_or_default(),
            power: raw.power.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.arch.is_empty() || self.antennas.is_empty() || self.snr_db.is_empty() {
            return bad("arch, antennas and snr_db must be nonempty".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.users == 0 || self.users > 64 {
            return bad(format!("users = {} outside 1..=64", self.users));
        }
        if self.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return bad("snr_db entries must be numbers (inf allowed for noiseless)".into());
        }
        if self.rayleigh_taps == 0 || self.rayleigh_taps > self.ofdm_config().cp_len {
            return bad("rayleigh_taps must be in 1..=cp_len".into());
        }
        if !(self.max_offset_samples >= 0.0 && self.max_offset_samples < self.ofdm_config().cp_len as f64) {
            return bad("max_offset_samples must lie in [0, cp_len)".into());
        }
        if !(self.insertion_loss_db >= 0.0) {
            return bad("insertion_loss_db must be non-negative".into());
        }
        if self.ofdm.payload_symbols == 0 {
            return bad("ofdm.payload_symbols must be at least 1".into());
        }
        self.ofdm_config().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.babf_config().validate().map_err(|e| Error::Config(e.to_string()))?;
        for &m in &self.antennas {
            for &arch in &self.arch {
                let chains = self.chains(arch, m);
                if chains < self.users || chains > m.max(self.users) {
                    return bad(format!("{arch} at M={m} has {chains} chains for {} users", self.users));
                }
                if m < self.users && arch != ArchKind::Fdma {
                    return bad(format!("M={m} antennas cannot serve {} users", self.users));
                }
                if arch == ArchKind::HbfPartial && m % chains != 0 {
                    return bad(format!("hbf_partial needs M={m} divisible by {chains} chains"));
                }
            }
        }
        if self.scenario == Scenario::Raytrace {
            let s = &self.scene;
            if !s.users.is_empty() && s.users.len() != self.users {
                return bad(format!("scene lists {} users, config has {}", s.users.len(), self.users));
            }
            if s.max_reflections > 2 {
                return bad("scene.max_reflections must be 0, 1 or 2".into());
            }
            if !(s.room_x_m > 1.0 && s.room_y_m > 1.0 && s.carrier_hz > 0.0) {
                return bad("scene room must exceed 1 m per side and carrier must be positive".into());
            }
        }
        Ok(())
    }

    /// Sampled streams of `arch` at `antennas` elements.
    pub fn chains(&self, arch: ArchKind, antennas: usize) -> usize {
        match arch {
            ArchKind::Greenmo | ArchKind::Fdma => self.users,
            ArchKind::Dbf => self.dbf_chains.unwrap_or(antennas),
            ArchKind::HbfFull | ArchKind::HbfPartial => self.hbf_chains.unwrap_or(self.users),
        }
    }

    pub fn ofdm_config(&self) -> OfdmConfig {
        OfdmConfig {
            user_bandwidth_hz: self.ofdm.user_bandwidth_hz,
            lts_repetitions: self.ofdm.lts_repetitions,
            ..OfdmConfig::default()
        }
    }

    pub fn babf_config(&self) -> BabfConfig {
        BabfConfig {
            phi: self.babf.phi,
            rank_tolerance: self.babf.rank_tolerance,
            max_fallbacks: self.babf.max_fallbacks,
        }
    }

    pub fn power_model(&self) -> PowerModel {
        PowerModel {
            single_chain_rfe_mw: self.power.single_chain_rfe_mw,
            per_chain_rfe_mw: self.power.per_chain_rfe_mw,
            switch_mw: self.power.switch_mw,
            adc_mw_per_10mhz: self.power.adc_mw_per_10mhz,
        }
    }

    /// SHA-256 of the canonical JSON form of the parsed configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

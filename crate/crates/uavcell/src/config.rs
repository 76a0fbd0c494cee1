//! Experiment configuration: TOML sections per subsystem with defaults
//! matching the standard urban-macro evaluation setup (500 m ISD three-tier
//! grid, 15 users per sector, 2 GHz, 10 MHz / 50 PRBs, 46 dBm BSs).

use crate::channel::ChannelParams;
use crate::deployment::UavHeightPolicy;
use crate::mac::Mode;
use crate::mu_mimo::UplinkPowerConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config field `{field}`: {msg}")]
    Invalid { field: &'static str, msg: String },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
}

fn invalid(field: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        msg: msg.into(),
    }
}

/// Deployment mode tag (serialized as `su`/`mu`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeTag {
    Su,
    Mu,
}

impl From<ModeTag> for Mode {
    fn from(t: ModeTag) -> Mode {
        match t {
            ModeTag::Su => Mode::SingleUser,
            ModeTag::Mu => Mode::MultiUser,
        }
    }
}

/// CSI acquisition regime for multi-user mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CsiMode {
    #[serde(rename = "perfect")]
    Perfect,
    #[serde(rename = "r3pc")]
    Reuse3PowerControl,
    #[serde(rename = "r3ep")]
    Reuse3EqualPower,
}

/// UAV height policy: a number (metres) or the string `"uniform"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UavHeightSetting {
    Fixed(f64),
    Keyword(UniformKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UniformKeyword {
    Uniform,
    Range,
}

impl UavHeightSetting {
    pub fn policy(self) -> UavHeightPolicy {
        match self {
            UavHeightSetting::Fixed(h) => UavHeightPolicy::Fixed(h),
            UavHeightSetting::Keyword(_) => UavHeightPolicy::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub mode: ModeTag,
    pub csi: CsiMode,
    pub drops: usize,
    pub master_seed: u64,
    pub uav_height: UavHeightSetting,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: ModeTag::Mu,
            csi: CsiMode::Reuse3PowerControl,
            drops: 500,
            master_seed: 1,
            uav_height: UavHeightSetting::Keyword(UniformKeyword::Uniform),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    pub isd_m: f64,
    pub tiers: usize,
    pub bs_height_m: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            isd_m: 500.0,
            tiers: 3,
            bs_height_m: 25.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UsersConfig {
    pub per_sector: f64,
    /// UAV fraction of all users.
    pub uav_ratio: f64,
    pub indoor_fraction: f64,
}

impl Default for UsersConfig {
    fn default() -> Self {
        UsersConfig {
            per_sector: 15.0,
            uav_ratio: 0.071,
            indoor_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AntennaConfig {
    pub element_max_gain_dbi: f64,
    pub hpbw_az_deg: f64,
    pub hpbw_el_deg: f64,
    pub element_spacing_wl: f64,
    pub mechanical_downtilt_deg: f64,
    pub su_rows: usize,
    pub su_cols: usize,
    pub mu_rows: usize,
    pub mu_cols: usize,
    pub cross_polarized: bool,
}

impl Default for AntennaConfig {
    fn default() -> Self {
        AntennaConfig {
            element_max_gain_dbi: 8.0,
            hpbw_az_deg: 65.0,
            hpbw_el_deg: 65.0,
            element_spacing_wl: 0.5,
            mechanical_downtilt_deg: 12.0,
            su_rows: 8,
            su_cols: 1,
            mu_rows: 8,
            mu_cols: 8,
            cross_polarized: true,
        }
    }
}

impl AntennaConfig {
    pub fn array(&self, mode: Mode) -> crate::antenna::ArrayConfig {
        let (rows, cols) = match mode {
            Mode::SingleUser => (self.su_rows, self.su_cols),
            Mode::MultiUser => (self.mu_rows, self.mu_cols),
        };
        crate::antenna::ArrayConfig {
            rows,
            cols,
            cross_polarized: self.cross_polarized,
            element_spacing_wl: self.element_spacing_wl,
            mechanical_downtilt_deg: self.mechanical_downtilt_deg,
            element_max_gain_dbi: self.element_max_gain_dbi,
            hpbw_az_deg: self.hpbw_az_deg,
            hpbw_el_deg: self.hpbw_el_deg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerConfig {
    pub bs_tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub bs_noise_figure_db: f64,
    pub ue_noise_figure_db: f64,
    pub uplink: UplinkPowerConfig,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig {
            bs_tx_power_dbm: 46.0,
            noise_psd_dbm_hz: -174.0,
            bs_noise_figure_db: 7.0,
            ue_noise_figure_db: 9.0,
            uplink: UplinkPowerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhyConfig {
    pub prbs: usize,
    pub prb_bandwidth_hz: f64,
    pub symbols_per_slot: usize,
    pub overhead_symbols: usize,
    /// Empty string = embedded default table.
    pub mcs_table_path: String,
    /// UAV command-and-control target rate for reliability reporting.
    pub target_rate_bps: f64,
    /// Multi-user evaluation skips links whose full-power receive level is
    /// below this fraction of the thermal noise floor (0 keeps every link).
    pub interference_floor_eps: f64,
}

impl Default for PhyConfig {
    fn default() -> Self {
        PhyConfig {
            prbs: 50,
            prb_bandwidth_hz: 180_000.0,
            symbols_per_slot: 14,
            overhead_symbols: 3,
            mcs_table_path: String::new(),
            target_rate_bps: 100_000.0,
            interference_floor_eps: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MacConfig {
    pub k_max_su: usize,
    pub k_max_mu: usize,
}

impl Default for MacConfig {
    fn default() -> Self {
        MacConfig {
            k_max_su: 1,
            k_max_mu: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MuMimoConfig {
    /// Condition-number limit before the weakest user is dropped.
    pub zf_condition_limit: f64,
}

impl Default for MuMimoConfig {
    fn default() -> Self {
        MuMimoConfig {
            zf_condition_limit: 1e8,
        }
    }
}

/// Full experiment configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub run: RunConfig,
    pub layout: LayoutConfig,
    pub users: UsersConfig,
    pub antenna: AntennaConfig,
    pub channel: ChannelParams,
    pub power: PowerConfig,
    pub phy: PhyConfig,
    pub mac: MacConfig,
    pub mu_mimo: MuMimoConfig,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn mode(&self) -> Mode {
        self.run.mode.into()
    }

    pub fn k_max(&self) -> usize {
        match self.mode() {
            Mode::SingleUser => self.mac.k_max_su,
            Mode::MultiUser => self.mac.k_max_mu,
        }
    }

    /// Per-PRB BS transmit power, mW.
    pub fn bs_power_per_prb_mw(&self) -> f64 {
        crate::geom::dbm_to_mw(self.power.bs_tx_power_dbm) / self.phy.prbs as f64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.run.drops < 1 {
            return Err(invalid("run.drops", "must be at least 1"));
        }
        if let UavHeightSetting::Fixed(h) = self.run.uav_height {
            if !(1.5..=300.0).contains(&h) {
                return Err(invalid(
                    "run.uav_height",
                    format!("fixed height {h} outside [1.5, 300] m"),
                ));
            }
        }
        if self.run.mode == ModeTag::Su && self.run.csi != CsiMode::Perfect {
            log::warn!("csi setting is ignored in single-user mode (channel knowledge is not used)");
        }
        if !(self.layout.isd_m > 0.0) {
            return Err(invalid("layout.isd_m", "must be positive"));
        }
        if !(1..=3).contains(&self.layout.tiers) {
            return Err(invalid("layout.tiers", "must be 1, 2 or 3"));
        }
        if !(self.layout.bs_height_m > 0.0) {
            return Err(invalid("layout.bs_height_m", "must be positive"));
        }
        if !(self.users.per_sector > 0.0) {
            return Err(invalid("users.per_sector", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.users.uav_ratio) {
            return Err(invalid("users.uav_ratio", "must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.users.indoor_fraction) {
            return Err(invalid("users.indoor_fraction", "must be in [0, 1]"));
        }
        if self.antenna.su_cols != 1 {
            return Err(invalid(
                "antenna.su_cols",
                "single-user analog beamforming needs a vertical (1-column) array",
            ));
        }
        for (field, v) in [
            ("antenna.su_rows", self.antenna.su_rows),
            ("antenna.mu_rows", self.antenna.mu_rows),
            ("antenna.mu_cols", self.antenna.mu_cols),
        ] {
            if v == 0 {
                return Err(invalid(field, "must be positive"));
            }
        }
        if !(self.antenna.element_spacing_wl > 0.0) {
            return Err(invalid("antenna.element_spacing_wl", "must be positive"));
        }
        if !(self.channel.carrier_ghz > 0.0) {
            return Err(invalid("channel.carrier_ghz", "must be positive"));
        }
        if self.channel.prb_group_size < 1 {
            return Err(invalid("channel.prb_group_size", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.power.uplink.alpha) {
            return Err(invalid("power.uplink.alpha", "must be in [0, 1]"));
        }
        if self.power.uplink.p_max_dbm < self.power.uplink.p0_dbm {
            return Err(invalid(
                "power.uplink.p_max_dbm",
                "must be at least p0_dbm",
            ));
        }
        if self.phy.prbs < 1 {
            return Err(invalid("phy.prbs", "must be at least 1"));
        }
        if !(self.phy.prb_bandwidth_hz > 0.0) {
            return Err(invalid("phy.prb_bandwidth_hz", "must be positive"));
        }
        if self.phy.overhead_symbols >= self.phy.symbols_per_slot {
            return Err(invalid(
                "phy.overhead_symbols",
                "must be below symbols_per_slot",
            ));
        }
        if !(self.phy.interference_floor_eps >= 0.0) {
            return Err(invalid(
                "phy.interference_floor_eps",
                "must be non-negative",
            ));
        }
        if self.mac.k_max_su != 1 {
            return Err(invalid("mac.k_max_su", "single-user mode serves one user per PRB"));
        }
        if self.mac.k_max_mu < 1 || self.mac.k_max_mu > 8 {
            return Err(invalid("mac.k_max_mu", "must be in 1..=8"));
        }
        if !(self.mu_mimo.zf_condition_limit > 1.0) {
            return Err(invalid("mu_mimo.zf_condition_limit", "must exceed 1"));
        }
        if !self.phy.mcs_table_path.is_empty()
            && !std::path::Path::new(&self.phy.mcs_table_path).exists()
        {
            return Err(invalid(
                "phy.mcs_table_path",
                format!("file not found: {}", self.phy.mcs_table_path),
            ));
        }
        Ok(())
    }
}

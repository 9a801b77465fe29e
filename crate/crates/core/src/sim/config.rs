//! Scenario files.
//!
//! A scenario is one TOML document. Unknown keys anywhere are rejected.
//!
//! ```toml
//! name = "reference"            # label copied into every output row
//! seed = 1                      # master seed, drop seeds derive from it
//! drops = 200                   # Monte-Carlo channel realizations
//! antennas = [2, 8, 16]         # transmit array sizes to sweep
//! methods = ["cb", "slnr"]      # MU precoders to evaluate
//! subband_size = 48             # subcarriers per precoding subband
//! filter_len = 33               # resampling kernel taps (odd)
//! strict = true                 # also require p_t * N_t = N_1
//! modulation = "16qam"          # qpsk | 16qam | 64qam
//! anchor_hz = -8640000.0        # optional; default centres group 1 on DC
//!
//! [[groups]]                    # one table per numerology, any order
//! scs_hz = 15000.0
//! fft_size = 2048
//! cp_len = 424
//! symbols_per_subframe = 14
//! used_subcarriers = 1152
//! user_angles_deg = [135.0]     # one user per entry, 0..=180
//!
//! [array]                       # optional; defaults shown
//! spacing = 0.5
//! dual_pol = true
//! polarization_deg = [45.0, -45.0]
//! boresight_deg = 90.0
//! cross_pol_ratio_db = 0.0
//!
//! [channel]                     # optional; defaults shown
//! profile = "cdl-a-like"        # cdl-a-like | flat | custom
//! taps = []                     # custom only: [{ delay_s, power_db, aod_offset_deg? }]
//! angular_spread_deg = 5.0
//! fading = "rayleigh"           # rayleigh | fixed
//!
//! [evm]                         # `constellation` subcommand
//! snr_db = 50.0
//! dump_drops = 1                # drops whose symbols go to constellation.csv
//! dump_samples = false          # raw antenna streams of drop 0
//! streaming = false             # carry the previous time unit's channel tail
//!
//! [capacity]                    # `capacity` subcommand
//! snr_db = [-10.0, -5.0, 0.0]
//! target_bps_hz = 8.0           # optional; default K_total * bits per QAM symbol
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{ArrayGeometry, Fading, Tap, TapProfile};
use crate::error::{Error, Result};
use crate::numerology::{validate_numerology_set, Numerology, NumerologySet};
use crate::phy::{Constellation, GroupLayout};
use crate::precoding::Method;
use crate::resample::ResampleSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub drops: usize,
    pub antennas: Vec<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_subband")]
    pub subband_size: usize,
    #[serde(default = "default_filter_len")]
    pub filter_len: usize,
    #[serde(default = "default_true")]
    pub strict: bool,
    #[serde(default)]
    pub modulation: Constellation,
    #[serde(default)]
    pub anchor_hz: Option<f64>,
    pub groups: Vec<GroupConfig>,
    #[serde(default)]
    pub array: ArrayConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub evm: EvmConfig,
    #[serde(default)]
    pub capacity: CapacityConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub scs_hz: f64,
    pub fft_size: usize,
    pub cp_len: usize,
    #[serde(default = "default_symbols")]
    pub symbols_per_subframe: usize,
    pub used_subcarriers: usize,
    pub user_angles_deg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default = "default_true")]
    pub dual_pol: bool,
    #[serde(default = "default_slants")]
    pub polarization_deg: [f64; 2],
    #[serde(default = "default_boresight")]
    pub boresight_deg: f64,
    #[serde(default)]
    pub cross_pol_ratio_db: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        ArrayConfig {
            spacing: default_spacing(),
            dual_pol: true,
            polarization_deg: default_slants(),
            boresight_deg: default_boresight(),
            cross_pol_ratio_db: 0.0,
        }
    }
}

impl ArrayConfig {
    pub fn geometry(&self, antennas: usize) -> ArrayGeometry {
        ArrayGeometry {
            antennas,
            spacing: self.spacing,
            dual_pol: self.dual_pol,
            polarization_deg: self.polarization_deg,
            boresight_deg: self.boresight_deg,
            cross_pol_ratio_db: self.cross_pol_ratio_db,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ProfileKind {
    #[default]
    #[serde(rename = "cdl-a-like")]
    CdlALike,
    #[serde(rename = "flat")]
    Flat,
    #[serde(rename = "custom")]
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default)]
    pub profile: ProfileKind,
    #[serde(default)]
    pub taps: Vec<Tap>,
    #[serde(default = "default_spread")]
    pub angular_spread_deg: f64,
    #[serde(default)]
    pub fading: Fading,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig { profile: ProfileKind::CdlALike, taps: Vec::new(), angular_spread_deg: 5.0, fading: Fading::Rayleigh }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvmConfig {
    #[serde(default = "default_evm_snr")]
    pub snr_db: f64,
    #[serde(default = "default_one")]
    pub dump_drops: usize,
    #[serde(default)]
    pub dump_samples: bool,
    #[serde(default)]
    pub streaming: bool,
}

impl Default for EvmConfig {
    fn default() -> Self {
        EvmConfig { snr_db: default_evm_snr(), dump_drops: 1, dump_samples: false, streaming: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityConfig {
    #[serde(default = "default_sweep")]
    pub snr_db: Vec<f64>,
    /// Defaults to `K_total * bits_per_symbol(modulation)`.
    #[serde(default)]
    pub target_bps_hz: Option<f64>,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        CapacityConfig { snr_db: default_sweep(), target_bps_hz: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_out() }
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::Cb, Method::Slnr]
}
fn default_subband() -> usize {
    48
}
fn default_filter_len() -> usize {
    crate::resample::DEFAULT_FILTER_LEN
}
fn default_true() -> bool {
    true
}
fn default_symbols() -> usize {
    14
}
fn default_spacing() -> f64 {
    0.5
}
fn default_slants() -> [f64; 2] {
    [45.0, -45.0]
}
fn default_boresight() -> f64 {
    90.0
}
fn default_spread() -> f64 {
    5.0
}
fn default_evm_snr() -> f64 {
    50.0
}
fn default_one() -> usize {
    1
}
fn default_sweep() -> Vec<f64> {
    (0..=20).map(|i| -10.0 + 2.5 * i as f64).collect()
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// One user of the scenario, in stacking order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UserSpec {
    pub group: usize,
    /// Index within the group.
    pub local: usize,
    pub angle_deg: f64,
}

/// A validated scenario: the config plus everything derived from it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub set: NumerologySet,
    pub profile: TapProfile,
    /// Used subcarriers per group, in sorted group order.
    pub used: Vec<usize>,
    /// Angles per group, in sorted group order.
    pub angles: Vec<Vec<f64>>,
    pub users: Vec<UserSpec>,
    pub layouts: Vec<GroupLayout>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl Scenario {
    /// Validates `config` and derives the numerology set, grids and users.
    /// Every failure is reported as [`Error::Config`].
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        Self::build(config).map_err(config_err)
    }

    fn build(config: ScenarioConfig) -> Result<Self> {
        if config.drops == 0 {
            return Err(Error::Config("drops must be at least 1".into()));
        }
        if config.antennas.is_empty() {
            return Err(Error::Config("antennas must list at least one array size".into()));
        }
        if config.methods.is_empty() {
            return Err(Error::Config("methods must not be empty".into()));
        }
        if config.subband_size == 0 {
            return Err(Error::Config("subband_size must be positive".into()));
        }
        ResampleSpec::new(1, 1, config.filter_len)?;
        for &m in &config.antennas {
            config.array.geometry(m).check()?;
        }
        if config.groups.is_empty() {
            return Err(Error::Config("at least one [[groups]] table is required".into()));
        }
        for (i, g) in config.groups.iter().enumerate() {
            if g.user_angles_deg.is_empty() {
                return Err(Error::Config(format!("group {} has no users", i + 1)));
            }
            if let Some(a) = g.user_angles_deg.iter().find(|a| !(0.0..=180.0).contains(*a)) {
                return Err(Error::Config(format!("user angle {a} outside 0..=180 degrees")));
            }
            if g.used_subcarriers == 0 {
                return Err(Error::Config(format!("group {} uses no subcarriers", i + 1)));
            }
        }
        if !config.evm.snr_db.is_finite() {
            return Err(Error::Config("evm.snr_db must be finite".into()));
        }
        if config.capacity.snr_db.is_empty() || config.capacity.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("capacity.snr_db must be a non-empty list of finite values".into()));
        }
        if let Some(t) = config.capacity.target_bps_hz {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Config(format!("capacity.target_bps_hz must be positive, got {t}")));
            }
        }
        if config.capacity.snr_db.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("capacity.snr_db must be strictly increasing".into()));
        }

        let nums = config
            .groups
            .iter()
            .map(|g| Numerology::new(g.scs_hz, g.fft_size, g.cp_len, g.symbols_per_subframe))
            .collect::<Result<Vec<_>>>()?;
        let set = validate_numerology_set(&nums, config.strict)?;
        // Pair every sorted numerology back with its group table.
        let mut order: Vec<usize> = Vec::with_capacity(nums.len());
        for n in set.groups() {
            let i = (0..nums.len()).find(|i| !order.contains(i) && nums[*i] == *n).expect("sorted set is a permutation");
            order.push(i);
        }
        let used: Vec<usize> = order.iter().map(|&i| config.groups[i].used_subcarriers).collect();
        let angles: Vec<Vec<f64>> = order.iter().map(|&i| config.groups[i].user_angles_deg.clone()).collect();

        let scs1 = set.group(0).scs_hz;
        for t in 1..set.len() {
            let r = set.group(t).scs_hz / scs1;
            if (r - r.round()).abs() > 1e-9 {
                return Err(Error::Config(format!("group {} spacing is not an integer multiple of group 1's", t + 1)));
            }
            let r = r.round() as usize;
            if used[t] != used[0].div_ceil(r) {
                return Err(Error::Config(format!(
                    "group {} must span group 1's bandwidth: {} subcarriers of {} Hz vs {} of {} Hz",
                    t + 1,
                    used[t],
                    set.group(t).scs_hz,
                    used[0],
                    scs1
                )));
            }
        }

        let coarsest = set.groups().last().expect("non-empty").scs_hz;
        let anchor = match config.anchor_hz {
            Some(a) => a,
            None => -((used[0] as f64 * scs1 / 2.0) / coarsest).floor() * coarsest,
        };
        let set = set.with_anchor(anchor)?;
        let layouts = (0..set.len()).map(|t| GroupLayout::new(&set, t, used[t])).collect::<Result<Vec<_>>>()?;

        let profile = match config.channel.profile {
            ProfileKind::CdlALike if config.channel.taps.is_empty() => TapProfile::cdl_a_like(),
            ProfileKind::Flat if config.channel.taps.is_empty() => TapProfile::flat(),
            ProfileKind::Custom => TapProfile::new(config.channel.taps.clone())?,
            _ => return Err(Error::Config("channel.taps is only allowed with profile = \"custom\"".into())),
        };
        let min_cp = set.groups().iter().map(|g| g.cp_len).min().unwrap_or(0);
        if profile.max_delay_samples(set.sample_rate()) >= min_cp {
            log::warn!("channel delay spread reaches the shortest cyclic prefix ({min_cp} samples)");
        }

        let users = angles
            .iter()
            .enumerate()
            .flat_map(|(t, a)| a.iter().enumerate().map(move |(u, &angle_deg)| UserSpec { group: t, local: u, angle_deg }))
            .collect();
        Ok(Scenario { config, set, profile, used, angles, users, layouts })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::new(ScenarioConfig::from_toml(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(ScenarioConfig::load(path)?)
    }

    pub fn k_total(&self) -> usize {
        self.users.len()
    }

    /// Capacity at which SNR gains are read: configured, or every user
    /// running at the spectral efficiency of the configured modulation.
    pub fn target_capacity(&self) -> f64 {
        self.config
            .capacity
            .target_bps_hz
            .unwrap_or((self.k_total() * self.config.modulation.bits_per_symbol()) as f64)
    }

    /// Subcarrier-spacing ratio of group `t` to group 1.
    pub fn spacing_ratio(&self, t: usize) -> usize {
        (self.set.group(t).scs_hz / self.set.group(0).scs_hz).round() as usize
    }
}

/// The bundled two-user reference scenario.
pub const REFERENCE_SCENARIO: &str = include_str!("../../scenarios/reference.toml");

//! Scenario configuration: physical parameters, protocol thresholds, attack
//! model, and the line-based `key = value` config file format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::protocol::{ProtocolConfig, ThresholdMode};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid config: {key} {reason}")]
    Invalid { key: &'static str, reason: String },
}

/// What a compromised node does once the attack starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttackMode {
    /// Reports `field_mean + offset_sigmas * field_std` as its reading.
    #[default]
    ConstantOffset,
    /// Reports a uniform draw from `field_mean ± 20 * field_std` each sample.
    RandomLiar,
    /// Repeats its first reading forever.
    StuckValue,
    /// Behaves honestly but broadcasts one false isolation announcement
    /// against a random honest neighbor every sampling period.
    Framer,
}

impl AttackMode {
    pub fn label(&self) -> &'static str {
        match self {
            AttackMode::ConstantOffset => "constant-offset",
            AttackMode::RandomLiar => "random-liar",
            AttackMode::StuckValue => "stuck-value",
            AttackMode::Framer => "framer",
        }
    }
}

impl fmt::Display for AttackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AttackMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant-offset" => Ok(AttackMode::ConstantOffset),
            "random-liar" => Ok(AttackMode::RandomLiar),
            "stuck-value" => Ok(AttackMode::StuckValue),
            "framer" => Ok(AttackMode::Framer),
            other => Err(format!(
                "unknown attack mode {other:?} (expected constant-offset, random-liar, stuck-value or framer)"
            )),
        }
    }
}

/// Compromise injection parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    /// Fraction of nodes compromised; `floor(fraction * n_nodes)` nodes are
    /// picked without replacement by the seeded RNG.
    pub compromised_fraction: f64,
    pub mode: AttackMode,
    /// Offset of the constant-offset lie, in field standard deviations.
    pub offset_sigmas: f64,
    /// Attack behavior starts at this simulation time.
    pub start_time_s: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            compromised_fraction: 0.0,
            mode: AttackMode::ConstantOffset,
            offset_sigmas: 10.0,
            start_time_s: 0.0,
        }
    }
}

/// Full scenario description. Defaults reproduce the reference temperature
/// monitoring setup: 160 stationary nodes uniform over 120 m x 120 m, 15 m
/// radio range, 5 J batteries, 0.75 W transmit / 0.25 W receive / 10 mW
/// sense, 0.5 s sampling, 5-message buffers, a Gaussian 25 +/- 1 degC field,
/// and broadcasts when an estimate moves by more than 2%.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_nodes: usize,
    pub sim_time_s: f64,
    pub area_width_m: f64,
    pub area_height_m: f64,
    pub tx_range_m: f64,
    pub initial_energy_j: f64,
    pub tx_power_w: f64,
    pub rx_power_w: f64,
    pub sense_power_w: f64,
    pub sampling_period_s: f64,
    pub buffer_capacity: usize,
    /// Mean of the sensed field: each node's true value is one draw from
    /// `Normal(field_mean, field_std^2)`.
    pub field_mean: f64,
    /// Spatial spread of the field across nodes; also the default
    /// `protocol.sensing_std` yardstick.
    pub field_std: f64,
    /// Per-reading measurement noise: a reading is the node's true value
    /// plus `Normal(0, sensor_noise_std^2)`, reported with this confidence.
    pub sensor_noise_std: f64,
    /// Relative estimate change that justifies a broadcast; mirrored into
    /// `protocol.broadcast_threshold`.
    pub send_change_fraction: f64,
    pub radio_loss_prob: f64,
    pub msg_airtime_s: f64,
    pub rng_seed: u64,
    pub protocol: ProtocolConfig,
    pub attack: AttackConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_nodes: 160,
            sim_time_s: 200.0,
            area_width_m: 120.0,
            area_height_m: 120.0,
            tx_range_m: 15.0,
            initial_energy_j: 5.0,
            tx_power_w: 0.75,
            rx_power_w: 0.25,
            sense_power_w: 0.010,
            sampling_period_s: 0.5,
            buffer_capacity: 5,
            field_mean: 25.0,
            field_std: 1.0,
            sensor_noise_std: 0.25,
            send_change_fraction: 0.02,
            radio_loss_prob: 0.0,
            msg_airtime_s: 0.002,
            rng_seed: 1,
            protocol: ProtocolConfig::default(),
            attack: AttackConfig::default(),
        }
    }
}

macro_rules! require {
    ($cond:expr, $key:literal, $reason:expr) => {
        if !$cond {
            return Err(ConfigError::Invalid { key: $key, reason: $reason.to_string() });
        }
    };
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        require!(self.n_nodes >= 1, "n_nodes", "must be at least 1");
        require!(self.sim_time_s > 0.0, "sim_time_s", "must be positive");
        require!(self.area_width_m > 0.0, "area_width_m", "must be positive");
        require!(self.area_height_m > 0.0, "area_height_m", "must be positive");
        require!(self.tx_range_m > 0.0, "tx_range_m", "must be positive");
        require!(self.initial_energy_j > 0.0, "initial_energy_j", "must be positive");
        require!(self.tx_power_w > 0.0, "tx_power_w", "must be positive");
        require!(self.rx_power_w > 0.0, "rx_power_w", "must be positive");
        require!(self.sense_power_w > 0.0, "sense_power_w", "must be positive");
        require!(self.sampling_period_s > 0.0, "sampling_period_s", "must be positive");
        require!(self.buffer_capacity >= 1, "buffer_capacity", "must be at least 1");
        require!(self.field_std > 0.0, "field_std", "must be positive");
        require!(self.field_mean.is_finite(), "field_mean", "must be finite");
        require!(self.sensor_noise_std > 0.0, "sensor_noise_std", "must be positive");
        require!(self.protocol.sensing_std > 0.0, "sensing_std", "must be positive");
        require!(
            (0.0..=1.0).contains(&self.send_change_fraction),
            "send_change_fraction",
            "must lie in [0, 1]"
        );
        require!(
            (0.0..=1.0).contains(&self.radio_loss_prob),
            "radio_loss_prob",
            "must lie in [0, 1]"
        );
        require!(self.msg_airtime_s > 0.0, "msg_airtime_s", "must be positive");
        require!(
            self.protocol.broadcast_threshold > 0.0,
            "broadcast_threshold",
            "must be positive"
        );
        require!(self.protocol.deviation_sigma > 0.0, "deviation_sigma", "must be positive");
        require!(
            self.protocol.sharp_fall_sigmas >= 0.0,
            "sharp_fall_sigmas",
            "must be nonnegative"
        );
        require!(
            self.protocol.challenge_window_s > 0.0,
            "challenge_window_s",
            "must be positive"
        );
        require!(self.protocol.min_responders >= 1, "min_responders", "must be at least 1");
        require!(
            (0.0..=1.0).contains(&self.attack.compromised_fraction),
            "compromised_fraction",
            "must lie in [0, 1]"
        );
        require!(self.attack.offset_sigmas.is_finite(), "offset_sigmas", "must be finite");
        require!(self.attack.start_time_s >= 0.0, "attack_start_time_s", "must be nonnegative");
        Ok(())
    }

    /// Number of compromised nodes this scenario injects.
    pub fn compromised_count(&self) -> usize {
        (self.attack.compromised_fraction * self.n_nodes as f64).floor() as usize
    }

    /// Parses a `key = value` config file. Blank lines and lines starting
    /// with `#` are skipped; unknown keys are rejected with their line
    /// number; a later duplicate key overrides an earlier one. Keys that are
    /// absent keep their defaults, so an empty file is the reference
    /// scenario. The result is validated.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_config_str(&text)
    }

    /// [`ScenarioConfig::from_file`] on an in-memory string.
    pub fn from_config_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Parse {
                    line: line_no,
                    msg: format!("expected `key = value`, got {line:?}"),
                });
            };
            cfg.apply(key.trim(), value.trim())
                .map_err(|msg| ConfigError::Parse { line: line_no, msg })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T, String>
        where
            T::Err: fmt::Display,
        {
            value.parse::<T>().map_err(|e| format!("{key}: cannot parse {value:?}: {e}"))
        }
        match key {
            "n_nodes" => self.n_nodes = num(key, value)?,
            "sim_time_s" => self.sim_time_s = num(key, value)?,
            "area_width_m" => self.area_width_m = num(key, value)?,
            "area_height_m" => self.area_height_m = num(key, value)?,
            "tx_range_m" => self.tx_range_m = num(key, value)?,
            "initial_energy_j" => self.initial_energy_j = num(key, value)?,
            "tx_power_w" => self.tx_power_w = num(key, value)?,
            "rx_power_w" => self.rx_power_w = num(key, value)?,
            "sense_power_w" => self.sense_power_w = num(key, value)?,
            "sampling_period_s" => self.sampling_period_s = num(key, value)?,
            "buffer_capacity" => self.buffer_capacity = num(key, value)?,
            "field_mean" => self.field_mean = num(key, value)?,
            "field_std" => {
                // The neighborhood sensing spread doubles as the deviation
                // yardstick; an explicit sensing_std key can still split
                // them.
                self.field_std = num(key, value)?;
                self.protocol.sensing_std = self.field_std;
            }
            "sensor_noise_std" => self.sensor_noise_std = num(key, value)?,
            "sensing_std" => self.protocol.sensing_std = num(key, value)?,
            "send_change_fraction" => {
                // The one knob controls both the stored fraction and the
                // effective (relative) broadcast threshold.
                self.send_change_fraction = num(key, value)?;
                self.protocol.broadcast_threshold = self.send_change_fraction;
                self.protocol.broadcast_mode = ThresholdMode::Relative;
            }
            "radio_loss_prob" => self.radio_loss_prob = num(key, value)?,
            "msg_airtime_s" => self.msg_airtime_s = num(key, value)?,
            "rng_seed" => self.rng_seed = num(key, value)?,
            "security_enabled" => self.protocol.security_enabled = num(key, value)?,
            "broadcast_threshold" => self.protocol.broadcast_threshold = num(key, value)?,
            "broadcast_mode" => {
                self.protocol.broadcast_mode = match value {
                    "absolute" => ThresholdMode::Absolute,
                    "relative" => ThresholdMode::Relative,
                    other => {
                        return Err(format!(
                            "broadcast_mode: expected absolute or relative, got {other:?}"
                        ))
                    }
                }
            }
            "deviation_sigma" => self.protocol.deviation_sigma = num(key, value)?,
            "sharp_fall_sigmas" => self.protocol.sharp_fall_sigmas = num(key, value)?,
            "challenge_window_s" => self.protocol.challenge_window_s = num(key, value)?,
            "min_responders" => self.protocol.min_responders = num(key, value)?,
            "hard_truncate" => self.protocol.hard_truncate = num(key, value)?,
            "compromised_fraction" => self.attack.compromised_fraction = num(key, value)?,
            "attack_mode" => self.attack.mode = value.parse()?,
            "offset_sigmas" => self.attack.offset_sigmas = num(key, value)?,
            "attack_start_time_s" => self.attack.start_time_s = num(key, value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Renders the configuration in the same `key = value` format the parser
    /// accepts, with enough precision to round-trip exactly.
    pub fn to_config_string(&self) -> String {
        let mode = match self.protocol.broadcast_mode {
            ThresholdMode::Absolute => "absolute",
            ThresholdMode::Relative => "relative",
        };
        format!(
            "n_nodes = {}\n\
             sim_time_s = {}\n\
             area_width_m = {}\n\
             area_height_m = {}\n\
             tx_range_m = {}\n\
             initial_energy_j = {}\n\
             tx_power_w = {}\n\
             rx_power_w = {}\n\
             sense_power_w = {}\n\
             sampling_period_s = {}\n\
             buffer_capacity = {}\n\
             field_mean = {}\n\
             field_std = {}\n\
             sensor_noise_std = {}\n\
             send_change_fraction = {}\n\
             radio_loss_prob = {}\n\
             msg_airtime_s = {}\n\
             rng_seed = {}\n\
             security_enabled = {}\n\
             broadcast_threshold = {}\n\
             broadcast_mode = {}\n\
             deviation_sigma = {}\n\
             sensing_std = {}\n\
             sharp_fall_sigmas = {}\n\
             challenge_window_s = {}\n\
             min_responders = {}\n\
             hard_truncate = {}\n\
             compromised_fraction = {}\n\
             attack_mode = {}\n\
             offset_sigmas = {}\n\
             attack_start_time_s = {}\n",
            self.n_nodes,
            self.sim_time_s,
            self.area_width_m,
            self.area_height_m,
            self.tx_range_m,
            self.initial_energy_j,
            self.tx_power_w,
            self.rx_power_w,
            self.sense_power_w,
            self.sampling_period_s,
            self.buffer_capacity,
            self.field_mean,
            self.field_std,
            self.sensor_noise_std,
            self.send_change_fraction,
            self.radio_loss_prob,
            self.msg_airtime_s,
            self.rng_seed,
            self.protocol.security_enabled,
            self.protocol.broadcast_threshold,
            mode,
            self.protocol.deviation_sigma,
            self.protocol.sensing_std,
            self.protocol.sharp_fall_sigmas,
            self.protocol.challenge_window_s,
            self.protocol.min_responders,
            self.protocol.hard_truncate,
            self.attack.compromised_fraction,
            self.attack.mode,
            self.attack.offset_sigmas,
            self.attack.start_time_s,
        )
    }
}

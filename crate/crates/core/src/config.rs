//! Experiment configuration: a TOML document with one table per component.
//!
//! Every key is optional. Unknown keys are rejected, and validation errors
//! name the dotted key that failed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::controller::{ControllerConfig, ControllerMode};
use crate::detector::{DetectorMode, DetectorParams};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::optics::{ChannelParams, G2SplitterParams};
use crate::source::{ModeCount, SourceParams};

/// Which controller modes a run simulates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Enabled,
    Disabled,
    Both,
}

impl RunMode {
    pub fn controller_modes(self) -> &'static [ControllerMode] {
        match self {
            RunMode::Enabled => &[ControllerMode::Enabled],
            RunMode::Disabled => &[ControllerMode::Disabled],
            RunMode::Both => &[ControllerMode::Enabled, ControllerMode::Disabled],
        }
    }
}

impl FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "enabled" => Ok(RunMode::Enabled),
            "disabled" => Ok(RunMode::Disabled),
            "both" => Ok(RunMode::Both),
            _ => Err(format!("expected enabled, disabled or both, got {s:?}")),
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunMode::Enabled => "enabled",
            RunMode::Disabled => "disabled",
            RunMode::Both => "both",
        })
    }
}

/// Fully resolved experiment configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub mode: RunMode,
    pub grid: TimeGrid,
    pub source: SourceParams,
    pub channel: ChannelParams,
    pub herald_detector: DetectorParams,
    pub idler_detector: DetectorParams,
    pub controller: ControllerConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2: Option<G2SplitterParams>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            mode: RunMode::Both,
            grid: TimeGrid::default(),
            source: SourceParams::default(),
            channel: ChannelParams::default(),
            herald_detector: DetectorParams::herald_default(),
            idler_detector: DetectorParams::idler_default(),
            controller: ControllerConfig::default(),
            g2: None,
        }
    }
}

/// Detector table as written in the file; missing keys take the defaults
/// of the detector's role.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectorTable {
    efficiency: Option<f64>,
    dead_time_ns: Option<f64>,
    dark_rate_hz: Option<f64>,
    mode: Option<DetectorMode>,
    gate_offset_ns: Option<f64>,
    gate_width_ns: Option<f64>,
}

impl DetectorTable {
    fn resolve(self, base: DetectorParams) -> DetectorParams {
        DetectorParams {
            efficiency: self.efficiency.unwrap_or(base.efficiency),
            dead_time_ns: self.dead_time_ns.unwrap_or(base.dead_time_ns),
            dark_rate_hz: self.dark_rate_hz.unwrap_or(base.dark_rate_hz),
            mode: self.mode.unwrap_or(base.mode),
            gate_offset_ns: self.gate_offset_ns.unwrap_or(base.gate_offset_ns),
            gate_width_ns: self.gate_width_ns.unwrap_or(base.gate_width_ns),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_mode")]
    mode: RunMode,
    #[serde(default)]
    grid: TimeGrid,
    #[serde(default)]
    source: SourceParams,
    #[serde(default)]
    channel: ChannelParams,
    #[serde(default)]
    herald_detector: DetectorTable,
    #[serde(default)]
    idler_detector: DetectorTable,
    #[serde(default)]
    controller: ControllerConfig,
    #[serde(default)]
    g2: Option<G2SplitterParams>,
}

fn default_seed() -> u64 {
    1
}

fn default_mode() -> RunMode {
    RunMode::Both
}

impl ConfigFile {
    fn resolve(self) -> ExperimentConfig {
        let mut controller = self.controller;
        controller.idler_predelay_ns = self.channel.predelay_ns;
        ExperimentConfig {
            seed: self.seed,
            mode: self.mode,
            grid: self.grid,
            source: self.source,
            channel: self.channel,
            herald_detector: self.herald_detector.resolve(DetectorParams::herald_default()),
            idler_detector: self.idler_detector.resolve(DetectorParams::idler_default()),
            controller,
            g2: self.g2,
        }
    }
}

fn parse_error<E: fmt::Display>(e: serde_path_to_error::Error<E>) -> Error {
    let path = e.path().to_string();
    let inner = e.into_inner().to_string();
    // toml messages carry a source excerpt; the first line is the reason
    let message = inner
        .lines()
        .find(|l| !l.trim().is_empty() && !l.starts_with("TOML parse error"))
        .unwrap_or(&inner)
        .trim()
        .to_string();
    Error::ConfigParse { path, message }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = toml::de::Deserializer::parse(text).map_err(|e| Error::ConfigParse {
        path: ".".into(),
        message: e.to_string().trim().to_string(),
    })?;
    let file: ConfigFile = serde_path_to_error::deserialize(de).map_err(parse_error)?;
    let cfg = file.resolve();
    cfg.validate()?;
    Ok(cfg)
}

fn from_value(value: toml::Value) -> Result<ExperimentConfig> {
    let file: ConfigFile = serde_path_to_error::deserialize(value).map_err(parse_error)?;
    let cfg = file.resolve();
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.source.validate()?;
        self.channel.validate(&self.grid)?;
        self.herald_detector.validate("herald_detector")?;
        self.idler_detector.validate("idler_detector")?;
        if self.herald_detector.mode != DetectorMode::FreeRunning {
            return Err(Error::config(
                "herald_detector.mode",
                "the herald detector must be free_running",
            ));
        }
        if self.idler_detector.mode != DetectorMode::Gated {
            return Err(Error::config("idler_detector.mode", "the idler detector must be gated"));
        }
        let period = self.grid.cycle_period_ns();
        let width = self.idler_detector.gate_width_ns;
        if width > period {
            return Err(Error::config(
                "idler_detector.gate_width_ns",
                format!("gates of {width} ns overlap at a {period} ns clock period"),
            ));
        }
        let mut controller = self.controller.clone();
        controller.idler_predelay_ns = self.channel.predelay_ns;
        controller.validate()?;
        if let Some(g2) = &self.g2 {
            g2.validate()?;
            // the delayed-arm gate must fall between two direct-arm gates
            let phase = g2.arm_delay_ns.rem_euclid(period);
            if phase < width || period - phase < width {
                return Err(Error::OverlappingGates {
                    first_start_ns: 0.0,
                    first_width_ns: width,
                    second_start_ns: g2.arm_delay_ns,
                });
            }
        }
        Ok(())
    }

    /// Controller timing with the pre-delay taken from the channel.
    pub fn controller_config(&self) -> ControllerConfig {
        ControllerConfig {
            idler_predelay_ns: self.channel.predelay_ns,
            ..self.controller.clone()
        }
    }

    pub fn mu(&self) -> f64 {
        self.source.mean_pairs_per_bin()
    }

    /// The configuration as a TOML document that parses back to `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    /// Returns a copy with the numeric key `axis` (a dotted path such as
    /// `channel.long_path_extra_loss_db`) set to `value`. Setting the pump
    /// power clears an explicit `mu` and the reverse.
    pub fn with_value(&self, axis: &str, value: f64) -> Result<ExperimentConfig> {
        let new_value = match axis_slot(axis)? {
            toml::Value::Integer(_) => {
                if value.fract() != 0.0 || value < 0.0 || value > i64::MAX as f64 {
                    return Err(Error::config(axis, format!("needs a non-negative integer, got {value}")));
                }
                toml::Value::Integer(value as i64)
            }
            _ => toml::Value::Float(value),
        };
        let mut doc = toml::Value::try_from(self).expect("configuration serializes");
        let (parent_path, key) = axis.rsplit_once('.').unwrap_or(("", axis));
        if axis == "source.pump_power_mw" {
            remove(&mut doc, "source.mu");
        } else if axis == "source.mu" {
            remove(&mut doc, "source.pump_power_mw");
        }
        let mut node = &mut doc;
        for part in parent_path.split('.').filter(|p| !p.is_empty()) {
            let table = node.as_table_mut().expect("config sections are tables");
            node = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        node.as_table_mut()
            .expect("config sections are tables")
            .insert(key.to_string(), new_value);
        from_value(doc)
    }
}

/// Fails with [`Error::UnknownAxis`] unless `axis` is a numeric key.
pub fn check_axis(axis: &str) -> Result<()> {
    axis_slot(axis).map(|_| ())
}

fn axis_slot(axis: &str) -> Result<toml::Value> {
    let reference = toml::Value::try_from(sweep_reference()).expect("reference serializes");
    match lookup(&reference, axis) {
        Some(v @ (toml::Value::Integer(_) | toml::Value::Float(_))) => Ok(v.clone()),
        _ => Err(Error::UnknownAxis(axis.to_string())),
    }
}

/// A configuration with every optional key present, used to decide which
/// dotted paths are numeric sweep axes.
fn sweep_reference() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.source.mu = Some(0.0);
    cfg.source.pump_power_mw = Some(0.0);
    cfg.source.mode_count = ModeCount::Finite(1);
    cfg.channel.n_switches = Some(0);
    cfg.g2 = Some(G2SplitterParams::default());
    cfg
}

fn lookup<'a>(doc: &'a toml::Value, path: &str) -> Option<&'a toml::Value> {
    path.split('.').try_fold(doc, |node, part| node.as_table()?.get(part))
}

fn remove(doc: &mut toml::Value, path: &str) {
    let (parent, key) = path.rsplit_once('.').expect("dotted path");
    if let Some(t) = doc.get_mut(parent).and_then(|v| v.as_table_mut()) {
        t.remove(key);
    }
}

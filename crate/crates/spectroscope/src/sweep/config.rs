//! Line-based `key = value` configuration with `#` comments. Command-line
//! `--set key=value` pairs reuse the same parser and override file values.

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::dissipation::KB_GHZ_PER_KELVIN;
use crate::model::{Drive, ModelError, SystemParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("line {line}: expected `key = value`, got `{text}`")]
    BadLine { line: usize, text: String },
    #[error("key `{key}`: cannot parse `{value}` as {expected}")]
    BadValue { key: String, value: String, expected: &'static str },
    #[error("mode `{0}` is not one of quasienergies|sweep1d|sweep2d|gmap|dissipative")]
    BadMode(String),
    #[error("sweep parameter `{0}` is not one of eps1|eps2|g|amplitude")]
    BadAxisParam(String),
    #[error("missing required key `{0}` for this mode")]
    Missing(&'static str),
    #[error("sweep_points must be >= 2, got {0}")]
    TooFewPoints(usize),
    #[error("mode {mode} requires {requirement}")]
    ModeRequirement { mode: &'static str, requirement: &'static str },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no output path: set `out` in the config or pass --out")]
    NoOutput,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Quasienergies,
    Sweep1d,
    Sweep2d,
    GMap,
    Dissipative,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "quasienergies" => Ok(Mode::Quasienergies),
            "sweep1d" => Ok(Mode::Sweep1d),
            "sweep2d" => Ok(Mode::Sweep2d),
            "gmap" => Ok(Mode::GMap),
            "dissipative" => Ok(Mode::Dissipative),
            other => Err(ConfigError::BadMode(other.to_string())),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::Quasienergies => "quasienergies",
            Mode::Sweep1d => "sweep1d",
            Mode::Sweep2d => "sweep2d",
            Mode::GMap => "gmap",
            Mode::Dissipative => "dissipative",
        }
    }

    pub fn is_two_dimensional(self) -> bool {
        matches!(self, Mode::Sweep2d | Mode::GMap)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisParam {
    Eps1,
    Eps2,
    G,
    Amplitude,
}

impl AxisParam {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "eps1" => Ok(AxisParam::Eps1),
            "eps2" => Ok(AxisParam::Eps2),
            "g" => Ok(AxisParam::G),
            "amplitude" => Ok(AxisParam::Amplitude),
            other => Err(ConfigError::BadAxisParam(other.to_string())),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AxisParam::Eps1 => "eps1",
            AxisParam::Eps2 => "eps2",
            AxisParam::G => "g",
            AxisParam::Amplitude => "amplitude",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Axis {
    pub param: AxisParam,
    pub min: f64,
    pub max: f64,
    pub n_points: usize,
}

impl Axis {
    pub fn value(&self, i: usize) -> f64 {
        if self.n_points <= 1 {
            self.min
        } else {
            self.min + (self.max - self.min) * i as f64 / (self.n_points - 1) as f64
        }
    }
}

/// Raw dissipative-rate settings; per-point detailed balance happens in the
/// runner because the qubit gaps move with the swept bias.
#[derive(Clone, Copy, Debug, Default)]
pub struct RatesConfig {
    pub gamma_phi: [f64; 2],
    pub gamma_down: [f64; 2],
    /// Bath temperature in frequency units; `None` means zero temperature
    /// (excitation rates identically zero).
    pub tau_b: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub mode: Mode,
    pub params: SystemParams,
    pub drive: Drive,
    /// Lock `eps2 = ratio * eps1` along the sweep.
    pub eps2_ratio: Option<f64>,
    pub axis: Axis,
    pub axis2: Option<Axis>,
    pub tol: f64,
    pub k_max_override: Option<i64>,
    pub rates: Option<RatesConfig>,
    pub transient: bool,
    pub out: Option<PathBuf>,
    pub workers: usize,
}

const KNOWN_KEYS: &[&str] = &[
    "mode",
    "eps1",
    "eps2",
    "delta1",
    "delta2",
    "g",
    "amplitude",
    "omega",
    "phi0",
    "eps2_ratio",
    "sweep_param",
    "sweep_min",
    "sweep_max",
    "sweep_points",
    "sweep2_param",
    "sweep2_min",
    "sweep2_max",
    "sweep2_points",
    "tol",
    "k_max",
    "gamma_phi1",
    "gamma_phi2",
    "gamma_down1",
    "gamma_down2",
    "temperature_mk",
    "tau_b",
    "transient",
    "out",
    "workers",
];

/// Parse `key = value` text into an ordered map; later assignments win.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::BadLine { line: idx + 1, text: raw.to_string() });
        };
        let key = key.trim().to_ascii_lowercase();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

/// Apply a single `--set key=value` override.
pub fn apply_override(
    map: &mut BTreeMap<String, String>,
    pair: &str,
) -> Result<(), ConfigError> {
    let Some((key, value)) = pair.split_once('=') else {
        return Err(ConfigError::BadLine { line: 0, text: pair.to_string() });
    };
    let key = key.trim().to_ascii_lowercase();
    if !KNOWN_KEYS.contains(&key.as_str()) {
        return Err(ConfigError::UnknownKey(key));
    }
    map.insert(key, value.trim().to_string());
    Ok(())
}

fn get_f64(map: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64, ConfigError> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
            key: key.to_string(),
            value: v.clone(),
            expected: "a number",
        }),
    }
}

fn get_usize(
    map: &BTreeMap<String, String>,
    key: &str,
    default: usize,
) -> Result<usize, ConfigError> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
            key: key.to_string(),
            value: v.clone(),
            expected: "a nonnegative integer",
        }),
    }
}

fn get_bool(map: &BTreeMap<String, String>, key: &str, default: bool) -> Result<bool, ConfigError> {
    match map.get(key).map(String::as_str) {
        None => Ok(default),
        Some("true") | Some("1") => Ok(true),
        Some("false") | Some("0") => Ok(false),
        Some(v) => Err(ConfigError::BadValue {
            key: key.to_string(),
            value: v.to_string(),
            expected: "true or false",
        }),
    }
}

/// Build the full configuration for a mode from parsed pairs.
pub fn build_config(mode: Mode, map: &BTreeMap<String, String>) -> Result<SweepConfig, ConfigError> {
    // Accept a `mode` key for documentation purposes; the subcommand wins.
    if let Some(m) = map.get("mode") {
        Mode::parse(m)?;
    }

    let params = SystemParams::new(
        get_f64(map, "eps1", 1.0)?,
        get_f64(map, "eps2", 2.0)?,
        get_f64(map, "delta1", 0.1)?,
        get_f64(map, "delta2", 0.15)?,
        get_f64(map, "g", 0.15)?,
    )?;
    let drive = Drive::new(
        get_f64(map, "amplitude", 5.0)?,
        get_f64(map, "omega", 1.0)?,
        get_f64(map, "phi0", 0.0)?,
    )?;

    let axis = {
        let param = AxisParam::parse(
            map.get("sweep_param").ok_or(ConfigError::Missing("sweep_param"))?,
        )?;
        let min = get_f64(map, "sweep_min", f64::NAN)?;
        let max = get_f64(map, "sweep_max", f64::NAN)?;
        if !min.is_finite() {
            return Err(ConfigError::Missing("sweep_min"));
        }
        if !max.is_finite() {
            return Err(ConfigError::Missing("sweep_max"));
        }
        let n_points = get_usize(map, "sweep_points", 0)?;
        if n_points < 2 {
            return Err(ConfigError::TooFewPoints(n_points));
        }
        Axis { param, min, max, n_points }
    };

    let axis2 = if map.contains_key("sweep2_param") {
        let param = AxisParam::parse(map.get("sweep2_param").unwrap())?;
        let min = get_f64(map, "sweep2_min", f64::NAN)?;
        let max = get_f64(map, "sweep2_max", f64::NAN)?;
        if !min.is_finite() {
            return Err(ConfigError::Missing("sweep2_min"));
        }
        if !max.is_finite() {
            return Err(ConfigError::Missing("sweep2_max"));
        }
        let n_points = get_usize(map, "sweep2_points", 0)?;
        if n_points < 2 {
            return Err(ConfigError::TooFewPoints(n_points));
        }
        Some(Axis { param, min, max, n_points })
    } else {
        None
    };

    if mode.is_two_dimensional() && axis2.is_none() {
        return Err(ConfigError::ModeRequirement {
            mode: mode.label(),
            requirement: "a second axis (sweep2_param/sweep2_min/sweep2_max/sweep2_points)",
        });
    }
    if mode == Mode::GMap {
        if let Some(a2) = &axis2 {
            if a2.param != AxisParam::G && axis.param != AxisParam::G {
                return Err(ConfigError::ModeRequirement {
                    mode: "gmap",
                    requirement: "one axis over g",
                });
            }
        }
    }

    let rates = if map.contains_key("gamma_down1")
        || map.contains_key("gamma_down2")
        || map.contains_key("gamma_phi1")
        || map.contains_key("gamma_phi2")
    {
        let tau_b = if map.contains_key("tau_b") {
            Some(get_f64(map, "tau_b", 0.0)?)
        } else if map.contains_key("temperature_mk") {
            Some(KB_GHZ_PER_KELVIN * get_f64(map, "temperature_mk", 0.0)? * 1e-3)
        } else {
            None
        };
        Some(RatesConfig {
            gamma_phi: [get_f64(map, "gamma_phi1", 0.0)?, get_f64(map, "gamma_phi2", 0.0)?],
            gamma_down: [get_f64(map, "gamma_down1", 0.0)?, get_f64(map, "gamma_down2", 0.0)?],
            tau_b,
        })
    } else {
        None
    };

    if mode == Mode::Dissipative && rates.is_none() {
        return Err(ConfigError::ModeRequirement {
            mode: "dissipative",
            requirement: "rate keys (gamma_down1/gamma_down2, optional gamma_phi*, temperature_mk)",
        });
    }

    Ok(SweepConfig {
        mode,
        params,
        drive,
        eps2_ratio: map.get("eps2_ratio").map(|v| v.parse()).transpose().map_err(|_| {
            ConfigError::BadValue {
                key: "eps2_ratio".into(),
                value: map.get("eps2_ratio").cloned().unwrap_or_default(),
                expected: "a number",
            }
        })?,
        axis,
        axis2,
        tol: get_f64(map, "tol", 1e-10)?,
        k_max_override: match map.get("k_max") {
            None => None,
            Some(v) => Some(v.parse().map_err(|_| ConfigError::BadValue {
                key: "k_max".into(),
                value: v.clone(),
                expected: "an integer",
            })?),
        },
        rates,
        transient: get_bool(map, "transient", false)?,
        out: map.get("out").map(PathBuf::from),
        workers: get_usize(map, "workers", 0)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "\
# headline parameter set
eps1 = 1.0
eps2 = 2.0
delta1 = 0.1
delta2 = 0.15   # splittings
g = 0.15
amplitude = 5.0
omega = 1.0
eps2_ratio = 2.0
sweep_param = eps1
sweep_min = 0.2
sweep_max = 3.2
sweep_points = 11
out = /tmp/test.csv
";

    #[test]
    fn parses_base_config() {
        let map = parse_pairs(BASE).unwrap();
        let cfg = build_config(Mode::Sweep1d, &map).unwrap();
        assert_eq!(cfg.axis.n_points, 11);
        assert_eq!(cfg.axis.param, AxisParam::Eps1);
        assert_eq!(cfg.eps2_ratio, Some(2.0));
        assert_eq!(cfg.tol, 1e-10);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_pairs("epsilon_one = 3\n").unwrap_err();
        match err {
            ConfigError::UnknownKey(k) => assert_eq!(k, "epsilon_one"),
            other => panic!("unexpected: {other}"),
        }
    }

    #[test]
    fn overrides_win() {
        let mut map = parse_pairs(BASE).unwrap();
        apply_override(&mut map, "sweep_points=21").unwrap();
        apply_override(&mut map, "g = 0.2").unwrap();
        let cfg = build_config(Mode::Sweep1d, &map).unwrap();
        assert_eq!(cfg.axis.n_points, 21);
        assert_eq!(cfg.params.g, 0.2);
    }

    #[test]
    fn mode_requirements_enforced() {
        let map = parse_pairs(BASE).unwrap();
        assert!(matches!(
            build_config(Mode::Sweep2d, &map),
            Err(ConfigError::ModeRequirement { .. })
        ));
        assert!(matches!(
            build_config(Mode::Dissipative, &map),
            Err(ConfigError::ModeRequirement { .. })
        ));
        let mut map2 = map.clone();
        apply_override(&mut map2, "sweep_points=1").unwrap();
        assert!(matches!(build_config(Mode::Sweep1d, &map2), Err(ConfigError::TooFewPoints(1))));
    }

    #[test]
    fn temperature_converts_to_tau_b() {
        let mut map = parse_pairs(BASE).unwrap();
        apply_override(&mut map, "gamma_down1=2e-4").unwrap();
        apply_override(&mut map, "gamma_down2=2e-4").unwrap();
        apply_override(&mut map, "temperature_mk=30").unwrap();
        let cfg = build_config(Mode::Dissipative, &map).unwrap();
        let tau = cfg.rates.unwrap().tau_b.unwrap();
        assert!((tau - 0.62511).abs() < 1e-9);
    }
}

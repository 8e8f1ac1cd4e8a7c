//! Scenario configuration: the validated parameter set for one experiment and
//! its flat `key = value` file representation.
//!
//! ```text
//! # two targets, one interferer
//! n_tx = 12
//! target_angles = 10, 30
//! interferer_angles = -50
//! eta_db = 2.5
//! ```
//!
//! Keys not present in the file keep their [`Default`] value. Unknown keys,
//! duplicate keys and malformed values are rejected. List values are
//! comma-separated; an empty right-hand side is the empty list.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{DripError, Result};

/// Unit-average-energy symbol alphabets used for the downlink users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constellation {
    Qpsk,
    Psk16,
    Psk64,
    Qam16,
    Qam64,
}

impl Constellation {
    pub const ALL: [Constellation; 5] = [
        Constellation::Qpsk,
        Constellation::Psk16,
        Constellation::Psk64,
        Constellation::Qam16,
        Constellation::Qam64,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Constellation::Qpsk => "QPSK",
            Constellation::Psk16 => "PSK16",
            Constellation::Psk64 => "PSK64",
            Constellation::Qam16 => "QAM16",
            Constellation::Qam64 => "QAM64",
        }
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Constellation {
    type Err = DripError;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        match key.as_str() {
            "QPSK" | "PSK4" => Ok(Constellation::Qpsk),
            "PSK16" | "16PSK" => Ok(Constellation::Psk16),
            "PSK64" | "64PSK" => Ok(Constellation::Psk64),
            "QAM16" | "16QAM" => Ok(Constellation::Qam16),
            "QAM64" | "64QAM" => Ok(Constellation::Qam64),
            _ => Err(DripError::UnsupportedConstellation(s.to_string())),
        }
    }
}

/// All physical and solver parameters of one experiment.
///
/// Angles are in degrees and `eta_db` / `sinr_floors_db` in dB, exactly as
/// written in the file; [`crate::array_model::Scene`] converts them once.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_samples: usize,
    pub n_users: usize,
    pub target_angles: Vec<f64>,
    pub interferer_angles: Vec<f64>,
    pub target_powers: Vec<f64>,
    pub interferer_powers: Vec<f64>,
    pub radar_noise_power: f64,
    pub comm_noise_power: f64,
    pub epsilon: f64,
    pub eta_db: f64,
    pub sinr_floors_db: Vec<f64>,
    pub rho: f64,
    /// Grow the penalty when the augmented-Lagrangian residual stalls.
    pub adaptive_penalty: bool,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub bfgs_iters: usize,
    pub constellation: Constellation,
    pub tx_spacing_wavelengths: f64,
    pub rx_spacing_wavelengths: f64,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    /// Two targets at 10 and 30 degrees, one interferer at -50 degrees,
    /// 12 transmit / 7 receive antennas, 7 samples, 4 users.
    fn default() -> Self {
        Self {
            n_tx: 12,
            n_rx: 7,
            n_samples: 7,
            n_users: 4,
            target_angles: vec![10.0, 30.0],
            interferer_angles: vec![-50.0],
            target_powers: vec![1.0, 1.0],
            interferer_powers: vec![1.0],
            radar_noise_power: 0.01,
            comm_noise_power: 0.01,
            epsilon: 1.0,
            eta_db: 2.5,
            sinr_floors_db: vec![20.0, 20.0],
            rho: 10.0,
            adaptive_penalty: true,
            outer_iters: 10,
            inner_iters: 60,
            bfgs_iters: 50,
            constellation: Constellation::Qam16,
            tx_spacing_wavelengths: 0.5,
            rx_spacing_wavelengths: 0.5,
            rng_seed: 1,
        }
    }
}

/// Every recognised key, in file order.
pub const KEYS: &[&str] = &[
    "n_tx",
    "n_rx",
    "n_samples",
    "n_users",
    "target_angles",
    "interferer_angles",
    "target_powers",
    "interferer_powers",
    "radar_noise_power",
    "comm_noise_power",
    "epsilon",
    "eta_db",
    "sinr_floors_db",
    "rho",
    "adaptive_penalty",
    "outer_iters",
    "inner_iters",
    "bfgs_iters",
    "constellation",
    "tx_spacing_wavelengths",
    "rx_spacing_wavelengths",
    "rng_seed",
];

/// `10^(v_db / 10)`.
pub fn db_to_linear(v_db: f64) -> f64 {
    10f64.powf(v_db / 10.0)
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| DripError::invalid(key, format!("`{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(DripError::invalid(key, "value must be finite"));
    }
    Ok(x)
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse()
        .map_err(|_| DripError::invalid(key, format!("`{v}` is not a non-negative integer")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|item| parse_f64(key, item)).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(DripError::invalid(key, format!("`{v}` is not a boolean"))),
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl ScenarioConfig {
    pub fn n_targets(&self) -> usize {
        self.target_angles.len()
    }

    pub fn n_interferers(&self) -> usize {
        self.interferer_angles.len()
    }

    /// Number of complex unknowns, `N_T * L`.
    pub fn n_complex(&self) -> usize {
        self.n_tx * self.n_samples
    }

    pub fn eta_linear(&self) -> f64 {
        db_to_linear(self.eta_db)
    }

    /// Assign one key from its textual value. Does not validate cross-field
    /// invariants; call [`ScenarioConfig::validate`] afterwards.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n_tx" => self.n_tx = parse_usize(key, value)?,
            "n_rx" => self.n_rx = parse_usize(key, value)?,
            "n_samples" => self.n_samples = parse_usize(key, value)?,
            "n_users" => self.n_users = parse_usize(key, value)?,
            "target_angles" => self.target_angles = parse_list(key, value)?,
            "interferer_angles" => self.interferer_angles = parse_list(key, value)?,
            "target_powers" => self.target_powers = parse_list(key, value)?,
            "interferer_powers" => self.interferer_powers = parse_list(key, value)?,
            "radar_noise_power" => self.radar_noise_power = parse_f64(key, value)?,
            "comm_noise_power" => self.comm_noise_power = parse_f64(key, value)?,
            "epsilon" => self.epsilon = parse_f64(key, value)?,
            "eta_db" => self.eta_db = parse_f64(key, value)?,
            "sinr_floors_db" => self.sinr_floors_db = parse_list(key, value)?,
            "rho" => self.rho = parse_f64(key, value)?,
            "adaptive_penalty" => self.adaptive_penalty = parse_bool(key, value)?,
            "outer_iters" => self.outer_iters = parse_usize(key, value)?,
            "inner_iters" => self.inner_iters = parse_usize(key, value)?,
            "bfgs_iters" => self.bfgs_iters = parse_usize(key, value)?,
            "constellation" => self.constellation = value.trim().parse()?,
            "tx_spacing_wavelengths" => self.tx_spacing_wavelengths = parse_f64(key, value)?,
            "rx_spacing_wavelengths" => self.rx_spacing_wavelengths = parse_f64(key, value)?,
            "rng_seed" => {
                self.rng_seed = value
                    .trim()
                    .parse()
                    .map_err(|_| DripError::invalid(key, format!("`{value}` is not a seed")))?
            }
            _ => {
                return Err(DripError::invalid(key, "unknown key"));
            }
        }
        Ok(())
    }

    /// Textual value of one key, in the same syntax [`ScenarioConfig::set`] accepts.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "n_tx" => self.n_tx.to_string(),
            "n_rx" => self.n_rx.to_string(),
            "n_samples" => self.n_samples.to_string(),
            "n_users" => self.n_users.to_string(),
            "target_angles" => fmt_list(&self.target_angles),
            "interferer_angles" => fmt_list(&self.interferer_angles),
            "target_powers" => fmt_list(&self.target_powers),
            "interferer_powers" => fmt_list(&self.interferer_powers),
            "radar_noise_power" => format!("{}", self.radar_noise_power),
            "comm_noise_power" => format!("{}", self.comm_noise_power),
            "epsilon" => format!("{}", self.epsilon),
            "eta_db" => format!("{}", self.eta_db),
            "sinr_floors_db" => fmt_list(&self.sinr_floors_db),
            "rho" => format!("{}", self.rho),
            "adaptive_penalty" => self.adaptive_penalty.to_string(),
            "outer_iters" => self.outer_iters.to_string(),
            "inner_iters" => self.inner_iters.to_string(),
            "bfgs_iters" => self.bfgs_iters.to_string(),
            "constellation" => self.constellation.to_string(),
            "tx_spacing_wavelengths" => format!("{}", self.tx_spacing_wavelengths),
            "rx_spacing_wavelengths" => format!("{}", self.rx_spacing_wavelengths),
            "rng_seed" => self.rng_seed.to_string(),
            _ => return None,
        })
    }

    /// Check every cross-field invariant. The error names the offending field.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_tx", self.n_tx),
            ("n_rx", self.n_rx),
            ("n_samples", self.n_samples),
            ("n_users", self.n_users),
            ("outer_iters", self.outer_iters),
            ("inner_iters", self.inner_iters),
            ("bfgs_iters", self.bfgs_iters),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(DripError::invalid(field, "must be at least 1"));
            }
        }
        if self.n_users > self.n_tx {
            return Err(DripError::invalid(
                "n_users",
                format!("n_users exceeds n_tx ({} > {})", self.n_users, self.n_tx),
            ));
        }
        let q = self.target_angles.len();
        if q == 0 {
            return Err(DripError::invalid(
                "target_angles",
                "at least one target is required",
            ));
        }
        if self.target_powers.len() != q {
            return Err(DripError::invalid(
                "target_powers",
                format!("expected {q} entries, found {}", self.target_powers.len()),
            ));
        }
        if self.sinr_floors_db.len() != q {
            return Err(DripError::invalid(
                "sinr_floors_db",
                format!("expected {q} entries, found {}", self.sinr_floors_db.len()),
            ));
        }
        if self.interferer_powers.len() != self.interferer_angles.len() {
            return Err(DripError::invalid(
                "interferer_powers",
                format!(
                    "expected {} entries, found {}",
                    self.interferer_angles.len(),
                    self.interferer_powers.len()
                ),
            ));
        }
        for (field, angles) in [
            ("target_angles", &self.target_angles),
            ("interferer_angles", &self.interferer_angles),
        ] {
            if let Some(a) = angles.iter().find(|a| !(a.abs() < 90.0)) {
                return Err(DripError::invalid(
                    field,
                    format!("angle {a} outside (-90, 90)"),
                ));
            }
        }
        for (field, powers) in [
            ("target_powers", &self.target_powers),
            ("interferer_powers", &self.interferer_powers),
        ] {
            if let Some(p) = powers.iter().find(|p| !(**p >= 0.0)) {
                return Err(DripError::invalid(field, format!("power {p} is negative")));
            }
        }
        for (field, v) in [
            ("radar_noise_power", self.radar_noise_power),
            ("comm_noise_power", self.comm_noise_power),
            ("rho", self.rho),
            ("tx_spacing_wavelengths", self.tx_spacing_wavelengths),
            ("rx_spacing_wavelengths", self.rx_spacing_wavelengths),
        ] {
            if !(v > 0.0) {
                return Err(DripError::invalid(field, "must be positive"));
            }
        }
        if !(self.epsilon >= 0.0) {
            return Err(DripError::invalid("epsilon", "must be non-negative"));
        }
        if !(self.eta_db >= 0.0) {
            return Err(DripError::invalid(
                "eta_db",
                format!("eta below unit PAPR ({} dB < 0 dB)", self.eta_db),
            ));
        }
        Ok(())
    }

    /// Parse the `key = value` text format and validate the result.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| DripError::Parse {
                line: idx + 1,
                msg: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(DripError::Parse {
                    line: idx + 1,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            cfg.set(key, value.trim()).map_err(|e| DripError::Parse {
                line: idx + 1,
                msg: match e {
                    DripError::Invalid { field, msg } if msg == "unknown key" => {
                        format!("unknown key `{field}`")
                    }
                    other => other.to_string(),
                },
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Render every key in the file format; `parse(to_config_string())` is
    /// field-equal to `self`.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&self.get(key).expect("known key"));
            out.push('\n');
        }
        out
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    ScenarioConfig::parse(&text)
}

pub fn save_scenario(cfg: &ScenarioConfig, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, cfg.to_config_string())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn loads_partial_file_over_defaults() {
        let cfg = ScenarioConfig::parse(
            "n_tx = 12\nn_rx = 7\nn_samples = 7\nn_users = 4\n\
             target_angles = 10, 30  # degrees\ninterferer_angles = -50\n",
        )
        .unwrap();
        assert_eq!(cfg.n_tx, 12);
        assert_eq!(cfg.n_rx, 7);
        assert_eq!(cfg.target_angles, vec![10.0, 30.0]);
        assert_eq!(cfg.interferer_angles, vec![-50.0]);
    }

    #[test]
    fn rejects_more_users_than_antennas() {
        let err = ScenarioConfig::parse("n_users = 5\nn_tx = 4\n").unwrap_err();
        assert!(err.to_string().contains("n_users exceeds n_tx"), "{err}");
        assert!(err.is_config_error());
    }

    #[test]
    fn rejects_eta_below_zero_db() {
        let err = ScenarioConfig::parse("eta_db = -1\n").unwrap_err();
        assert!(err.to_string().contains("eta below unit PAPR"), "{err}");
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let err = ScenarioConfig::parse("n_tx = 4\nfoo = 1\n").unwrap_err();
        assert!(err.to_string().contains("unknown key `foo`"), "{err}");
        let err = ScenarioConfig::parse("n_tx = 4\nn_tx = 5\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn rejects_mismatched_target_lists() {
        let err = ScenarioConfig::parse("target_angles = 10, 20, 30\n").unwrap_err();
        assert!(err.to_string().contains("target_powers"), "{err}");
    }

    #[test]
    fn empty_interferer_list() {
        let cfg = ScenarioConfig::parse("interferer_angles =\ninterferer_powers =\n").unwrap();
        assert_eq!(cfg.n_interferers(), 0);
    }

    #[test]
    fn constellation_names() {
        for c in Constellation::ALL {
            assert_eq!(c.name().parse::<Constellation>().unwrap(), c);
        }
        assert_eq!(
            "16-QAM".parse::<Constellation>().unwrap(),
            Constellation::Qam16
        );
        assert!("8PSK".parse::<Constellation>().is_err());
    }

    #[test]
    fn db_conversion_values() {
        assert_eq!(db_to_linear(0.0), 1.0);
        assert!((db_to_linear(10.0) - 10.0).abs() < 1e-12);
        assert!((db_to_linear(2.5) - 10f64.powf(0.25)).abs() < 1e-15);
        assert!((db_to_linear(2.5) - 1.778_279_410_038_923).abs() < 1e-12);
    }

    #[test]
    fn save_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.cfg");
        let mut cfg = ScenarioConfig::default();
        cfg.epsilon = 0.123_456_789_012_345_6;
        cfg.interferer_angles.clear();
        cfg.interferer_powers.clear();
        save_scenario(&cfg, &path).unwrap();
        assert_eq!(load_scenario(&path).unwrap(), cfg);
    }

    proptest! {
        #[test]
        fn db_is_multiplicative(a in -60.0f64..60.0, b in -60.0f64..60.0) {
            let lhs = db_to_linear(a + b);
            let rhs = db_to_linear(a) * db_to_linear(b);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
            prop_assert!(db_to_linear(a + 1e-3) > db_to_linear(a));
        }

        #[test]
        fn config_round_trip(
            eps in 0.0f64..2.0,
            eta in 0.0f64..9.0,
            floor in 0.0f64..30.0,
            t1 in -89.0f64..89.0,
            seed in any::<u64>(),
        ) {
            let mut cfg = ScenarioConfig::default();
            cfg.epsilon = eps;
            cfg.eta_db = eta;
            cfg.sinr_floors_db = vec![floor, floor + 1.0];
            cfg.target_angles[0] = t1;
            cfg.rng_seed = seed;
            let back = ScenarioConfig::parse(&cfg.to_config_string()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}

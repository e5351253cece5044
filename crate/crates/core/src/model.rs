//! Domain types shared by every rate computation.
//!
//! Gains are amplitudes (the channel power gain of a link is the square of
//! its gain). Powers and noise variances are linear. Every rate is in bits
//! per channel use.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One Wyner lag: the local path gain `b` and the inter-cell gain `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagGains {
    pub local: f64,
    pub cross: f64,
}

impl LagGains {
    pub fn new(local: f64, cross: f64) -> Result<Self> {
        let lag = LagGains { local, cross };
        lag.validate()?;
        Ok(lag)
    }

    pub fn validate(&self) -> Result<()> {
        check_gain("local", self.local)?;
        check_gain("cross", self.cross)
    }

    pub fn is_zero(&self) -> bool {
        self.local == 0.0 && self.cross == 0.0
    }
}

/// Full description of the relay-aided circular Wyner uplink.
///
/// MT to RT: `beta` (local), `alpha` (adjacent cells). RT to BS: `gamma`
/// (local), `eta` (adjacent cells). RT to RT leakage: `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
    pub mu: f64,
    pub power_p: f64,
    pub power_q: f64,
    pub noise1: f64,
    pub noise2: f64,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, value) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("eta", self.eta),
            ("mu", self.mu),
        ] {
            check_gain(key, value)?;
        }
        for (key, value) in [("power_p", self.power_p), ("power_q", self.power_q)] {
            check_finite(key, value)?;
            if value < 0.0 {
                return Err(invalid(key, "power must be nonnegative"));
            }
        }
        for (key, value) in [("noise1", self.noise1), ("noise2", self.noise2)] {
            check_finite(key, value)?;
            if value <= 0.0 {
                return Err(invalid(key, "noise power must be strictly positive"));
            }
        }
        Ok(())
    }

    /// SNR of the MT-RT lag, `P / noise1`.
    pub fn rho1(&self) -> f64 {
        self.power_p / self.noise1
    }

    /// SNR of the RT-BS lag, `Q / noise2`.
    pub fn rho2(&self) -> f64 {
        self.power_q / self.noise2
    }

    pub fn first_lag(&self) -> LagGains {
        LagGains {
            local: self.beta,
            cross: self.alpha,
        }
    }

    pub fn second_lag(&self) -> LagGains {
        LagGains {
            local: self.gamma,
            cross: self.eta,
        }
    }

    /// The flat key-value form that [`parse_config`] accepts (linear keys).
    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        for (key, value) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("eta", self.eta),
            ("mu", self.mu),
            ("power_p", self.power_p),
            ("power_q", self.power_q),
            ("noise1", self.noise1),
            ("noise2", self.noise2),
        ] {
            kv.set(key, value);
        }
        kv
    }
}

/// Resolution and stopping rule of the periodic trapezoid quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    initial_points: usize,
    max_points: usize,
    rel_tol: f64,
}

impl QuadratureConfig {
    pub const DEFAULT_INITIAL_POINTS: usize = 64;
    pub const DEFAULT_MAX_POINTS: usize = 1 << 22;
    pub const DEFAULT_REL_TOL: f64 = 1e-10;

    pub fn new(initial_points: usize, max_points: usize, rel_tol: f64) -> Result<Self> {
        if initial_points < 8 || !initial_points.is_power_of_two() {
            return Err(invalid(
                "initial_points",
                "must be a power of two no smaller than 8",
            ));
        }
        if !max_points.is_power_of_two() || max_points < initial_points {
            return Err(invalid(
                "max_points",
                "must be a power of two no smaller than initial_points",
            ));
        }
        if !(rel_tol > 0.0 && rel_tol < 1.0) {
            return Err(invalid("rel_tol", "must lie in (0, 1)"));
        }
        Ok(QuadratureConfig {
            initial_points,
            max_points,
            rel_tol,
        })
    }

    pub fn initial_points(&self) -> usize {
        self.initial_points
    }

    pub fn max_points(&self) -> usize {
        self.max_points
    }

    pub fn rel_tol(&self) -> f64 {
        self.rel_tol
    }

    /// Same grid limits with the tolerance tightened to at most `tol`.
    pub fn tightened(&self, tol: f64) -> Self {
        QuadratureConfig {
            rel_tol: self.rel_tol.min(tol),
            ..*self
        }
    }
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            initial_points: Self::DEFAULT_INITIAL_POINTS,
            max_points: Self::DEFAULT_MAX_POINTS,
            rel_tol: Self::DEFAULT_REL_TOL,
        }
    }
}

/// A rate in bits per channel use; finite and nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RateValue(f64);

impl RateValue {
    pub const ZERO: RateValue = RateValue(0.0);

    pub fn new(bits: f64) -> Result<Self> {
        if !bits.is_finite() || bits < 0.0 {
            return Err(Error::InvalidInput(format!(
                "rate must be finite and nonnegative, got {bits}"
            )));
        }
        Ok(RateValue(bits))
    }

    /// For integrals of nonnegative integrands: absorbs a negative zero.
    pub(crate) fn from_nonnegative(bits: f64) -> Self {
        debug_assert!(bits.is_finite() && bits >= -1e-15, "rate {bits}");
        RateValue(bits.max(0.0))
    }

    pub fn bits(self) -> f64 {
        self.0
    }
}

impl fmt::Display for RateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// A flat numeric key-value document, the common form of JSON and TOML
/// config files and of command-line overrides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues(BTreeMap<String, f64>);

impl KeyValues {
    pub fn set(&mut self, key: &str, value: f64) {
        self.0.insert(key.to_string(), value);
    }

    pub fn remove(&mut self, key: &str) -> Option<f64> {
        self.0.remove(key)
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let serde_json::Value::Object(map) = value else {
            return Err(Error::Parse("expected one flat JSON object".into()));
        };
        let mut kv = KeyValues::default();
        for (key, value) in map {
            let number = value
                .as_f64()
                .ok_or_else(|| invalid(&key, "expected a number"))?;
            kv.set(&key, number);
        }
        Ok(kv)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Parse(e.message().to_string()))?;
        let mut kv = KeyValues::default();
        for (key, value) in table {
            let number = match value {
                toml::Value::Float(x) => x,
                toml::Value::Integer(i) => i as f64,
                _ => return Err(invalid(&key, "expected a number")),
            };
            kv.set(&key, number);
        }
        Ok(kv)
    }
}

const GAIN_KEYS: [&str; 5] = ["alpha", "beta", "gamma", "eta", "mu"];
// (linear key, dB key)
const POWER_KEYS: [(&str, &str); 4] = [
    ("power_p", "P_dB"),
    ("power_q", "Q_dB"),
    ("noise1", "noise1_dB"),
    ("noise2", "noise2_dB"),
];

/// Builds a validated [`SystemConfig`] from a flat key-value document.
///
/// Gains are always linear amplitudes. Each power or noise quantity is given
/// either linearly (`power_p`, `power_q`, `noise1`, `noise2`) or in dB
/// (`P_dB`, `Q_dB`, `noise1_dB`, `noise2_dB`), never both.
pub fn parse_config(doc: &KeyValues) -> Result<SystemConfig> {
    for key in doc.0.keys() {
        let known = GAIN_KEYS.contains(&key.as_str())
            || POWER_KEYS.iter().any(|(lin, db)| key == lin || key == db);
        if !known {
            return Err(Error::UnknownField(key.clone()));
        }
    }

    let gain = |key: &str| -> Result<f64> {
        let value = doc
            .get(key)
            .ok_or_else(|| Error::MissingField(key.to_string()))?;
        check_gain(key, value)?;
        Ok(value)
    };
    let power = |(lin, db): (&str, &str)| -> Result<f64> {
        match (doc.get(lin), doc.get(db)) {
            (Some(_), Some(_)) => Err(Error::Ambiguous {
                linear: lin.to_string(),
                db: db.to_string(),
            }),
            (Some(value), None) => {
                check_finite(lin, value)?;
                Ok(value)
            }
            (None, Some(value)) => {
                check_finite(db, value)?;
                Ok(db_to_linear(value))
            }
            (None, None) => Err(Error::MissingField(lin.to_string())),
        }
    };

    let config = SystemConfig {
        alpha: gain("alpha")?,
        beta: gain("beta")?,
        gamma: gain("gamma")?,
        eta: gain("eta")?,
        mu: gain("mu")?,
        power_p: power(POWER_KEYS[0])?,
        power_q: power(POWER_KEYS[1])?,
        noise1: power(POWER_KEYS[2])?,
        noise2: power(POWER_KEYS[3])?,
    };
    config.validate()?;
    Ok(config)
}

fn check_finite(key: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            key: key.to_string(),
        })
    }
}

fn check_gain(key: &str, value: f64) -> Result<()> {
    check_finite(key, value)?;
    if value < 0.0 {
        return Err(invalid(key, "gain amplitude must be nonnegative"));
    }
    Ok(())
}

fn invalid(key: &str, reason: &str) -> Error {
    Error::InvalidField {
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

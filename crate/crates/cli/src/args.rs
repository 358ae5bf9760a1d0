//! Argument value types and the merge of `--config` JSON over flags.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use treehist::moments::{FractionMode, FractionSpec};

use crate::error::{CliError, CliResult};

/// Angle in radians; parsed from `0.15pi`, `pi` or a raw number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Angle(pub f64);

impl FromStr for Angle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let bad = || format!("invalid angle '{s}' (expected e.g. 0.15pi or 0.47)");
        let value = match s.strip_suffix("pi") {
            Some("") => PI,
            Some(c) => c.trim_end_matches('*').parse::<f64>().map_err(|_| bad())? * PI,
            None => s.parse::<f64>().map_err(|_| bad())?,
        };
        if value.is_finite() {
            Ok(Angle(value))
        } else {
            Err(bad())
        }
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Angle(x)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Non-empty list of integers written as `4..10`, `2,4,8` or a mix.
/// Ranges include both ends.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntList(pub Vec<u32>);

impl FromStr for IntList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = |part: &str| format!("invalid integer list item '{part}' in '{s}'");
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if let Some((a, b)) = part.split_once("..") {
                let a: u32 = a.trim().parse().map_err(|_| bad(part))?;
                let b: u32 = b.trim_start_matches('=').trim().parse().map_err(|_| bad(part))?;
                if b < a {
                    return Err(format!("empty range '{part}'"));
                }
                out.extend(a..=b);
            } else {
                out.push(part.parse().map_err(|_| bad(part))?);
            }
        }
        if out.is_empty() {
            return Err(format!("empty integer list '{s}'"));
        }
        Ok(IntList(out))
    }
}

impl Serialize for IntList {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntList {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            List(Vec<u32>),
            One(u32),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::List(v) if !v.is_empty() => Ok(IntList(v)),
            Raw::List(_) => Err(serde::de::Error::custom("empty integer list")),
            Raw::One(x) => Ok(IntList(vec![x])),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Leaf subset for the moments command: `full`, `compact:T0` or `dilute:T0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fraction(pub FractionSpec);

impl FromStr for Fraction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("invalid fraction '{s}' (expected full, compact:T0 or dilute:T0)");
        if s == "full" {
            return Ok(Fraction(FractionSpec::full()));
        }
        let (mode, t0) = s.split_once(':').ok_or_else(bad)?;
        let mode = match mode {
            "compact" => FractionMode::CompactSubtree,
            "dilute" => FractionMode::Dilute,
            _ => return Err(bad()),
        };
        Ok(Fraction(FractionSpec { mode, t0: t0.parse().map_err(|_| bad())? }))
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0.mode {
            FractionMode::Full => write!(f, "full"),
            FractionMode::CompactSubtree => write!(f, "compact:{}", self.0.t0),
            FractionMode::Dilute => write!(f, "dilute:{}", self.0.t0),
        }
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    X,
    Y,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatsKind {
    /// Encoding-phase covariance by lag.
    Covariance,
    /// Law of the frozen outcome in the apparatus phase.
    Freezing,
    /// Sampled measured histories.
    Histories,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaArgs {
    /// Tree angle, e.g. 0.15pi.
    #[arg(long)]
    pub theta: Option<Angle>,
    /// Relative imprecision of the coarse measurement.
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// First measured time(s).
    #[arg(long, default_value = "4..10")]
    pub tau: IntList,
    /// Window length(s) T - tau.
    #[arg(long = "L", default_value = "3")]
    #[serde(rename = "L")]
    pub l: IntList,
    /// Antithetic field pairs per probe.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Use the single-leaf probe with this absolute imprecision.
    #[arg(long)]
    pub fine_grained: Option<f64>,
    /// Override the number of frequency nodes (power of two).
    #[arg(long)]
    pub n_w: Option<usize>,
    /// Override the frequency cutoff.
    #[arg(long)]
    pub w_max: Option<f64>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointerArgs {
    #[arg(long)]
    pub theta: Option<Angle>,
    /// Tree depth.
    #[arg(long, default_value_t = 20)]
    pub t: u32,
    #[arg(long, default_value_t = 0.05)]
    pub gamma: f64,
    /// Number of sampled states.
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Override the number of frequency nodes (power of two).
    #[arg(long)]
    pub n_w: Option<usize>,
    /// Override the frequency cutoff.
    #[arg(long)]
    pub w_max: Option<f64>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LgArgs {
    #[arg(long)]
    pub theta: Option<Angle>,
    /// Delay parameter of the involution.
    #[arg(long, default_value_t = 8)]
    pub t_m: u32,
    /// Window starts; each row uses times t..t+3.
    #[arg(long, default_value = "1..16")]
    pub t: IntList,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsArgs {
    #[arg(long)]
    pub theta: Option<Angle>,
    #[arg(long, value_enum, default_value = "covariance")]
    pub kind: StatsKind,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// Lags for the covariance table.
    #[arg(long, default_value = "0..30")]
    pub dt: IntList,
    /// History length.
    #[arg(long, default_value_t = 30)]
    pub length: usize,
    /// Number of sampled histories.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsArgs {
    #[arg(long)]
    pub theta: Option<Angle>,
    #[arg(long, default_value = "1..40")]
    pub t: IntList,
    #[arg(long, value_enum, default_value = "z")]
    pub probe: Probe,
    /// Leaf subset: full, compact:T0 or dilute:T0.
    #[arg(long, default_value = "full")]
    pub fraction: Fraction,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateArgs {
    /// Angles to validate.
    #[arg(long, value_delimiter = ',', default_value = "0.15pi,0.3pi")]
    pub theta: Vec<Angle>,
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// Antithetic field pairs for the Monte Carlo marginals.
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 20240611)]
    pub seed: u64,
    /// Offset added to the angle of the fast path only.
    #[arg(long, default_value_t = 0.0, hide = true)]
    pub perturb_theta: f64,
}

pub fn require_theta(theta: Option<Angle>) -> CliResult<f64> {
    theta.map(|a| a.0).ok_or_else(|| CliError::Config("--theta is required (flag or config file)".into()))
}

/// Reads a config file: either a bare object of fields or a sidecar whose
/// `config` member holds them.
pub fn read_config(path: &Path, command: &str) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: Value = serde_json::from_str(&text)?;
    let Value::Object(mut map) = value else {
        return Err(CliError::Config(format!("{}: expected a JSON object", path.display())));
    };
    if let Some(Value::Object(inner)) = map.remove("config") {
        if let Some(Value::String(c)) = map.get("command") {
            if c != command {
                return Err(CliError::Config(format!("{} was written by '{c}', not '{command}'", path.display())));
            }
        }
        return Ok(Value::Object(inner));
    }
    Ok(Value::Object(map))
}

/// Flag values overridden field by field with `config`.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: Option<Value>) -> CliResult<T> {
    let Some(Value::Object(over)) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(flags)?)?);
    };
    let mut base = serde_json::to_value(flags)?;
    let obj = base.as_object_mut().expect("argument structs serialize to objects");
    obj.extend(over);
    serde_json::from_value(base).map_err(|e| CliError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles() {
        assert!((Angle::from_str("0.15pi").unwrap().0 - 0.15 * PI).abs() < 1e-15);
        assert_eq!(Angle::from_str("pi").unwrap().0, PI);
        assert_eq!(Angle::from_str("0.5").unwrap().0, 0.5);
        assert!(Angle::from_str("abc").is_err());
        let a: Angle = serde_json::from_str("\"0.3pi\"").unwrap();
        assert!((a.0 - 0.3 * PI).abs() < 1e-15);
    }

    #[test]
    fn int_lists() {
        assert_eq!(IntList::from_str("2..5").unwrap().0, vec![2, 3, 4, 5]);
        assert_eq!(IntList::from_str("1,3..4,9").unwrap().0, vec![1, 3, 4, 9]);
        assert_eq!(IntList::from_str("2..=3").unwrap().0, vec![2, 3]);
        assert!(IntList::from_str("5..2").is_err());
        assert!(IntList::from_str("").is_err());
        let l: IntList = serde_json::from_str("\"4..6\"").unwrap();
        assert_eq!(l.0, vec![4, 5, 6]);
    }

    #[test]
    fn fractions_round_trip() {
        for s in ["full", "compact:3", "dilute:2"] {
            assert_eq!(Fraction::from_str(s).unwrap().to_string(), s);
        }
        assert!(Fraction::from_str("half").is_err());
    }

    #[test]
    fn config_overrides_flags() {
        let flags = LgArgs { theta: None, t_m: 8, t: IntList(vec![1, 2]) };
        let merged = merge(&flags, Some(serde_json::json!({"theta": "0.35pi", "t_m": 4}))).unwrap();
        assert_eq!(merged.t_m, 4);
        assert_eq!(merged.t.0, vec![1, 2]);
        assert!((merged.theta.unwrap().0 - 0.35 * PI).abs() < 1e-15);
        assert!(merge(&flags, Some(serde_json::json!({"bogus": 1}))).is_err());
    }
}

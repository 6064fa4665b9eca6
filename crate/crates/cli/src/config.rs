//! Scenario files: flat `key = value` lines with `#` comments.
//!
//! The grammar is documented in `docs/config-format.md`.

use std::collections::HashMap;

use fblmac::{LinkSet, PcModel, Protocol, RelayArm};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: `{key}`: {msg}")]
    Value { line: usize, key: String, msg: String },
    #[error("missing required key `{key}`")]
    Missing { key: String },
    #[error("`{key}`: {msg}")]
    Inconsistent { key: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    N,
    K,
    L,
    Snr,
    Lambda,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub slots: u64,
    pub seed: u64,
    pub warmup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub protocol: Option<Protocol>,
    pub snr_sd: Option<f64>,
    pub snr_sr: Option<f64>,
    pub snr_rd: Option<f64>,
    pub n: Option<u64>,
    pub k: Option<u64>,
    pub batch: Option<u64>,
    pub lambda_a: Option<f64>,
    pub lambda_b: Option<f64>,
    pub omega_a: f64,
    pub model: PcModel,
    pub relay_arm: Option<RelayArm>,
    pub k_max: Option<u64>,
    pub l_max: Option<u64>,
    pub sim: Option<SimSettings>,
    pub sweep: Option<SweepSpec>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            protocol: None,
            snr_sd: None,
            snr_sr: None,
            snr_rd: None,
            n: None,
            k: None,
            batch: None,
            lambda_a: None,
            lambda_b: None,
            omega_a: 0.5,
            model: PcModel::SecondOrder,
            relay_arm: None,
            k_max: None,
            l_max: None,
            sim: None,
            sweep: None,
        }
    }
}

const KEYS: &[&str] = &[
    "protocol", "snr_sd", "snr_sr", "snr_rd", "n", "k", "L", "lambda_a", "lambda_b", "omega_a", "model", "relay_arm",
    "k_max", "l_max", "slots", "seed", "warmup", "axis", "values", "start", "stop", "step",
];

pub const DEFAULT_SLOTS: u64 = 1_000_000;

pub fn parse_protocol(s: &str) -> Option<Protocol> {
    Protocol::ALL.into_iter().find(|p| p.name() == s)
}

pub fn parse_relay_arm(s: &str) -> Option<RelayArm> {
    [RelayArm::Unweighted, RelayArm::BatchWeighted]
        .into_iter()
        .find(|a| a.name() == s)
}

fn parse_model(s: &str) -> Option<PcModel> {
    [PcModel::SecondOrder, PcModel::ThirdOrder]
        .into_iter()
        .find(|m| m.name() == s)
}

struct Entry {
    line: usize,
    raw: String,
    db: bool,
}

impl Entry {
    fn err(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::Value {
            line: self.line,
            key: key.to_string(),
            msg: msg.into(),
        }
    }

    fn real(&self, key: &str) -> Result<f64, ConfigError> {
        let v: f64 = self
            .raw
            .parse()
            .map_err(|_| self.err(key, format!("expected a number, got `{}`", self.raw)))?;
        if !v.is_finite() {
            return Err(self.err(key, "must be finite"));
        }
        Ok(v)
    }

    fn int(&self, key: &str, min: u64) -> Result<u64, ConfigError> {
        let v: u64 = self
            .raw
            .parse()
            .map_err(|_| self.err(key, format!("expected a non-negative integer, got `{}`", self.raw)))?;
        if v < min {
            return Err(self.err(key, format!("must be at least {min}, got {v}")));
        }
        Ok(v)
    }

    fn unit(&self, key: &str, upper_open: bool) -> Result<f64, ConfigError> {
        let v = self.real(key)?;
        let ok = if upper_open { (0.0..1.0).contains(&v) } else { (0.0..=1.0).contains(&v) };
        if !ok {
            let range = if upper_open { "[0, 1)" } else { "[0, 1]" };
            return Err(self.err(key, format!("must lie in {range}, got {v}")));
        }
        Ok(v)
    }

    fn snr(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.real(key)?;
        let linear = if self.db { 10f64.powf(v / 10.0) } else { v };
        if !(linear > 0.0 && linear.is_finite()) {
            return Err(self.err(key, format!("snr must be positive, got {v}")));
        }
        Ok(linear)
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    let mut entries: HashMap<String, Entry> = HashMap::new();
    for (idx, raw_line) in text.split('\n').enumerate() {
        let line = idx + 1;
        let content = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        let content = content.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            msg: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(ConfigError::Syntax {
                line,
                msg: format!("invalid key `{key}`"),
            });
        }
        let base = key.strip_suffix("_db").filter(|b| b.starts_with("snr_")).unwrap_or(key);
        if !KEYS.contains(&base) {
            return Err(ConfigError::Value {
                line,
                key: key.to_string(),
                msg: "unknown key".into(),
            });
        }
        if value.is_empty() {
            return Err(ConfigError::Value {
                line,
                key: key.to_string(),
                msg: "empty value".into(),
            });
        }
        // a linear key and its dB twin name the same quantity
        if let Some(prev) = entries.get(base) {
            return Err(ConfigError::Value {
                line,
                key: key.to_string(),
                msg: format!("duplicate key (first set on line {})", prev.line),
            });
        }
        entries.insert(
            base.to_string(),
            Entry {
                line,
                raw: value.to_string(),
                db: base != key,
            },
        );
    }

    let mut s = Scenario::default();
    let mut ordered: Vec<_> = entries.iter().collect();
    ordered.sort_by_key(|(_, e)| e.line);
    for (key, entry) in ordered {
        let key = key.as_str();
        match key {
            "protocol" => {
                s.protocol = Some(parse_protocol(&entry.raw).ok_or_else(|| {
                    entry.err(key, format!("expected one of nc, cc, baf_relay, baf_source, got `{}`", entry.raw))
                })?)
            }
            "snr_sd" | "snr_sr" | "snr_rd" => {
                let name = if entry.db { format!("{key}_db") } else { key.to_string() };
                let v = entry.snr(&name)?;
                match key {
                    "snr_sd" => s.snr_sd = Some(v),
                    "snr_sr" => s.snr_sr = Some(v),
                    _ => s.snr_rd = Some(v),
                }
            }
            "n" => s.n = Some(entry.int(key, 1)?),
            "k" => s.k = Some(entry.int(key, 1)?),
            "L" => s.batch = Some(entry.int(key, 1)?),
            "k_max" => s.k_max = Some(entry.int(key, 1)?),
            "l_max" => s.l_max = Some(entry.int(key, 1)?),
            "lambda_a" => s.lambda_a = Some(entry.unit(key, false)?),
            "lambda_b" => s.lambda_b = Some(entry.unit(key, false)?),
            "omega_a" => s.omega_a = entry.unit(key, false)?,
            "model" => {
                s.model = parse_model(&entry.raw)
                    .ok_or_else(|| entry.err(key, format!("expected `second` or `third`, got `{}`", entry.raw)))?
            }
            "relay_arm" => {
                s.relay_arm = Some(parse_relay_arm(&entry.raw).ok_or_else(|| {
                    entry.err(key, format!("expected `unweighted` or `batch_weighted`, got `{}`", entry.raw))
                })?)
            }
            _ => {}
        }
    }

    if ["slots", "seed", "warmup"].iter().any(|k| entries.contains_key(*k)) {
        s.sim = Some(SimSettings {
            slots: entries.get("slots").map(|e| e.int("slots", 10_000)).transpose()?.unwrap_or(DEFAULT_SLOTS),
            seed: entries.get("seed").map(|e| e.int("seed", 0)).transpose()?.unwrap_or(0),
            warmup: entries.get("warmup").map(|e| e.unit("warmup", true)).transpose()?.unwrap_or(0.1),
        });
    }
    s.sweep = parse_sweep(&entries)?;
    Ok(s)
}

fn parse_sweep(entries: &HashMap<String, Entry>) -> Result<Option<SweepSpec>, ConfigError> {
    let range_keys = ["start", "stop", "step"];
    let Some(axis_entry) = entries.get("axis") else {
        if let Some(k) = ["values", "start", "stop", "step"].into_iter().find(|k| entries.contains_key(*k)) {
            return Err(ConfigError::Inconsistent {
                key: k.into(),
                msg: "sweep values given without `axis`".into(),
            });
        }
        return Ok(None);
    };
    let axis = match axis_entry.raw.as_str() {
        "n" => Axis::N,
        "k" => Axis::K,
        "L" => Axis::L,
        "snr" => Axis::Snr,
        "lambda" => Axis::Lambda,
        other => {
            return Err(axis_entry.err("axis", format!("expected one of n, k, L, snr, lambda, got `{other}`")));
        }
    };
    let values = match entries.get("values") {
        Some(e) => {
            if let Some(k) = range_keys.into_iter().find(|k| entries.contains_key(*k)) {
                return Err(ConfigError::Inconsistent {
                    key: k.into(),
                    msg: "give either `values` or `start`/`stop`/`step`, not both".into(),
                });
            }
            e.raw
                .split(',')
                .map(|v| {
                    Entry {
                        line: e.line,
                        raw: v.trim().to_string(),
                        db: false,
                    }
                    .real("values")
                })
                .collect::<Result<Vec<_>, _>>()?
        }
        None => {
            let get = |k: &str| {
                entries
                    .get(k)
                    .ok_or_else(|| ConfigError::Missing { key: k.into() })
                    .and_then(|e| e.real(k))
            };
            let (start, stop, step) = (get("start")?, get("stop")?, get("step")?);
            if !(step > 0.0) || stop < start {
                return Err(entries["step"].err("step", "need step > 0 and stop >= start"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| start + i as f64 * step).collect()
        }
    };
    let line = entries.get("values").map_or(axis_entry.line, |e| e.line);
    if values.is_empty() {
        return Err(ConfigError::Value {
            line,
            key: "values".into(),
            msg: "sweep needs at least one value".into(),
        });
    }
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ConfigError::Value {
            line,
            key: "values".into(),
            msg: "sweep values must be strictly increasing".into(),
        });
    }
    let integral = matches!(axis, Axis::N | Axis::K | Axis::L);
    for &v in &values {
        let ok = match axis {
            _ if integral => v >= 1.0 && v.fract() == 0.0,
            Axis::Snr => v > 0.0,
            _ => (0.0..=2.0).contains(&v),
        };
        if !ok {
            return Err(ConfigError::Value {
                line,
                key: "values".into(),
                msg: format!("value {v} is out of range for this axis"),
            });
        }
    }
    Ok(Some(SweepSpec { axis, values }))
}

impl Scenario {
    pub fn require<T: Copy>(value: Option<T>, key: &str) -> Result<T, ConfigError> {
        value.ok_or_else(|| ConfigError::Missing { key: key.into() })
    }

    pub fn protocol(&self) -> Result<Protocol, ConfigError> {
        Self::require(self.protocol, "protocol")
    }

    pub fn n(&self) -> Result<u64, ConfigError> {
        Self::require(self.n, "n")
    }

    pub fn k(&self) -> Result<u64, ConfigError> {
        Self::require(self.k, "k")
    }

    /// Link SNRs as `(sd, sr, rd)`. The non-cooperative protocol only needs
    /// `snr_sd`; absent relay links then copy it.
    pub fn snrs(&self, protocol: Protocol) -> Result<(f64, f64, f64), ConfigError> {
        let sd = Self::require(self.snr_sd, "snr_sd")?;
        if protocol == Protocol::Nc {
            return Ok((sd, self.snr_sr.unwrap_or(sd), self.snr_rd.unwrap_or(sd)));
        }
        Ok((sd, Self::require(self.snr_sr, "snr_sr")?, Self::require(self.snr_rd, "snr_rd")?))
    }

    pub fn links(&self, protocol: Protocol) -> Result<LinkSet, ConfigError> {
        let (sd, sr, rd) = self.snrs(protocol)?;
        LinkSet::from_snr(sd, sr, rd).map_err(|e| ConfigError::Inconsistent {
            key: "snr".into(),
            msg: e.to_string(),
        })
    }

    /// Batch size for batched protocols, 1 otherwise.
    pub fn batch_for(&self, protocol: Protocol) -> Result<u64, ConfigError> {
        match (protocol.is_batched(), self.batch) {
            (true, Some(l)) => Ok(l),
            (true, None) => Err(ConfigError::Missing { key: "L".into() }),
            (false, None | Some(1)) => Ok(1),
            (false, Some(l)) => Err(ConfigError::Inconsistent {
                key: "L".into(),
                msg: format!("protocol {} does not batch; got L={l}", protocol.name()),
            }),
        }
    }
}

//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comment
//! family = mab                  # mab | linear | logistic
//! horizon = 20000
//! replications = 10
//! base_seed = 1
//! checkpoint_every = 100        # default horizon / 200
//! env.K = 100
//! env.difficulty = easy         # easy | hard (mab)
//! env.reward_kind = bernoulli   # bernoulli | beta | gaussian (mab); bernoulli | mean_only (structured)
//! env.nu = 4                    # beta concentration
//! env.sigma_r = 0.1             # gaussian reward standard deviation
//! env.means = 0.5, 0.5          # fixed mab means instead of a generated instance
//! env.d = 5                     # structured families
//! policies = randucb, ucb1, fast:randucb
//! policy.fast.z.sigma = 1/16
//! ```
//!
//! Each entry of `policies` is `label:kind` or just `kind`; per-policy keys
//! live under `policy.<label>.`. Numbers may be written as fractions `a/b`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::envs::{Difficulty, Link, RewardKind};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("`{key}`: invalid value `{value}`: {reason}")]
    Invalid { key: String, value: String, reason: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
}

impl ConfigError {
    pub fn invalid(key: &str, value: &str, reason: impl fmt::Display) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            value: value.to_string(),
            reason: reason.to_string(),
        }
    }
}

/// Parses a number, allowing `a/b` fractions.
pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            (b != 0.0).then_some(a / b)
        }
        None => s.parse().ok(),
    }
}

/// Ordered key-value pairs with line-aware parsing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_string(),
                });
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_string(),
                });
            }
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(ConfigError::Duplicate { line: i + 1, key });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Typed access to one namespace of a [`RawConfig`], tracking which keys
/// were read so leftovers can be reported.
pub struct Section<'a> {
    raw: &'a RawConfig,
    prefix: String,
}

impl<'a> Section<'a> {
    pub fn new(raw: &'a RawConfig, prefix: &str) -> Self {
        Self {
            raw,
            prefix: prefix.to_string(),
        }
    }

    pub fn full_key(&self, key: &str) -> String {
        format!("{}{}", self.prefix, key)
    }

    pub fn str(&self, key: &str) -> Option<&'a str> {
        self.raw.get(&self.full_key(key))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e: T::Err| ConfigError::invalid(&self.full_key(key), v, e)),
        }
    }

    pub fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.str(key) {
            None => Ok(None),
            Some(v) => parse_number(v)
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| ConfigError::invalid(&self.full_key(key), v, "not a finite number")),
        }
    }

    pub fn integer(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v
                .trim()
                .replace('_', "")
                .parse()
                .map(Some)
                .map_err(|_| ConfigError::invalid(&self.full_key(key), v, "not a nonnegative integer")),
        }
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.str(key) {
            None => Ok(None),
            Some("true") | Some("yes") => Ok(Some(true)),
            Some("false") | Some("no") => Ok(Some(false)),
            Some(v) => Err(ConfigError::invalid(&self.full_key(key), v, "expected true or false")),
        }
    }

    /// Errors on any key under this prefix that is not in `allowed`.
    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        for key in self.raw.keys() {
            if let Some(rest) = key.strip_prefix(&self.prefix) {
                if !allowed.contains(&rest) {
                    return Err(ConfigError::UnknownKey(key.to_string()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Mab,
    Linear,
    Logistic,
}

impl Family {
    pub fn link(self) -> Option<Link> {
        match self {
            Family::Mab => None,
            Family::Linear => Some(Link::Identity),
            Family::Logistic => Some(Link::Logistic),
        }
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mab" => Ok(Family::Mab),
            "linear" => Ok(Family::Linear),
            "logistic" => Ok(Family::Logistic),
            other => Err(format!("unknown family `{other}` (mab, linear, logistic)")),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Mab => "mab",
            Family::Linear => "linear",
            Family::Logistic => "logistic",
        })
    }
}

/// How instances are produced for each replication.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    Mab {
        k: usize,
        difficulty: Difficulty,
        reward: RewardKind,
        means: Option<Vec<f64>>,
    },
    Structured {
        k: usize,
        d: usize,
        link: Link,
        mean_only: bool,
    },
}

impl EnvSpec {
    pub fn num_arms(&self) -> usize {
        match self {
            EnvSpec::Mab { k, .. } | EnvSpec::Structured { k, .. } => *k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySpec {
    pub label: String,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub family: Family,
    pub env: EnvSpec,
    pub horizon: u64,
    pub replications: usize,
    pub base_seed: u64,
    pub checkpoint_every: u64,
    pub policies: Vec<PolicySpec>,
    pub raw: RawConfig,
}

const TOP_KEYS: &[&str] = &["family", "horizon", "replications", "base_seed", "checkpoint_every", "policies"];
const ENV_KEYS: &[&str] = &["K", "d", "difficulty", "reward_kind", "nu", "sigma_r", "means"];

fn parse_policies(value: &str) -> Result<Vec<PolicySpec>, ConfigError> {
    let mut out: Vec<PolicySpec> = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (label, kind) = match item.split_once(':') {
            Some((l, k)) => (l.trim(), k.trim()),
            None => (item, item),
        };
        let valid = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !valid(label) || !valid(kind) {
            return Err(ConfigError::invalid("policies", item, "expected label:kind"));
        }
        if out.iter().any(|p| p.label == label) {
            return Err(ConfigError::invalid("policies", item, "duplicate label"));
        }
        out.push(PolicySpec {
            label: label.to_string(),
            kind: kind.to_string(),
        });
    }
    if out.is_empty() {
        return Err(ConfigError::invalid("policies", value, "no policies listed"));
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_raw(RawConfig::load(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_raw(RawConfig::parse(text)?)
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        for key in raw.keys() {
            let known = TOP_KEYS.contains(&key) || key.starts_with("env.") || key.starts_with("policy.");
            if !known {
                return Err(ConfigError::UnknownKey(key.to_string()));
            }
        }
        let top = Section::new(&raw, "");
        let require = |key: &str| -> Result<&str, ConfigError> { top.str(key).ok_or_else(|| ConfigError::Missing(key.into())) };

        let family: Family = require("family")?
            .parse()
            .map_err(|e: String| ConfigError::invalid("family", top.str("family").unwrap_or(""), e))?;
        let horizon = top.integer("horizon")?.ok_or_else(|| ConfigError::Missing("horizon".into()))?;
        if horizon < 2 {
            return Err(ConfigError::invalid("horizon", &horizon.to_string(), "must be at least 2"));
        }
        let replications = top.integer("replications")?.unwrap_or(1);
        if replications < 1 {
            return Err(ConfigError::invalid("replications", "0", "must be at least 1"));
        }
        let base_seed = top.integer("base_seed")?.unwrap_or(0);
        let checkpoint_every = top.integer("checkpoint_every")?.unwrap_or((horizon / 200).max(1));
        if checkpoint_every == 0 || checkpoint_every > horizon / 2 {
            return Err(ConfigError::invalid(
                "checkpoint_every",
                &checkpoint_every.to_string(),
                "must be in [1, horizon/2] so there are at least two checkpoints",
            ));
        }
        let policies = parse_policies(require("policies")?)?;
        for key in raw.keys() {
            if let Some(rest) = key.strip_prefix("policy.") {
                let label = rest.split('.').next().unwrap_or("");
                if !policies.iter().any(|p| p.label == label) {
                    return Err(ConfigError::UnknownKey(key.to_string()));
                }
            }
        }

        let env = Self::parse_env(&raw, family)?;
        if env.num_arms() < 2 {
            return Err(ConfigError::invalid("env.K", &env.num_arms().to_string(), "need at least 2 arms"));
        }
        if horizon < env.num_arms() as u64 {
            return Err(ConfigError::invalid(
                "horizon",
                &horizon.to_string(),
                "must be at least K so every arm can be initialized",
            ));
        }
        Ok(Self {
            family,
            env,
            horizon,
            replications: replications as usize,
            base_seed,
            checkpoint_every,
            policies,
            raw,
        })
    }

    fn parse_env(raw: &RawConfig, family: Family) -> Result<EnvSpec, ConfigError> {
        let env = Section::new(raw, "env.");
        env.reject_unknown(ENV_KEYS)?;
        let means: Option<Vec<f64>> = match env.str("means") {
            None => None,
            Some(v) => Some(
                v.split(',')
                    .map(|s| parse_number(s).ok_or_else(|| ConfigError::invalid("env.means", v, "not a list of numbers")))
                    .collect::<Result<_, _>>()?,
            ),
        };
        let k = match (env.integer("K")?, &means) {
            (Some(k), Some(m)) if k as usize != m.len() => {
                return Err(ConfigError::invalid("env.K", &k.to_string(), "does not match env.means"));
            }
            (Some(k), _) => k as usize,
            (None, Some(m)) => m.len(),
            (None, None) => return Err(ConfigError::Missing("env.K".into())),
        };
        let reward_kind = env.str("reward_kind").unwrap_or("bernoulli");
        match family {
            Family::Mab => {
                if env.str("d").is_some() {
                    return Err(ConfigError::UnknownKey("env.d".into()));
                }
                let difficulty: Difficulty = env.parse("difficulty")?.unwrap_or(Difficulty::Easy);
                let reward = match reward_kind {
                    "bernoulli" => RewardKind::Bernoulli,
                    "beta" => RewardKind::Beta {
                        concentration: env.number("nu")?.unwrap_or(RewardKind::DEFAULT_CONCENTRATION),
                    },
                    "gaussian" => RewardKind::Gaussian {
                        stddev: env.number("sigma_r")?.unwrap_or(RewardKind::DEFAULT_STDDEV),
                    },
                    other => {
                        return Err(ConfigError::invalid("env.reward_kind", other, "expected bernoulli, beta or gaussian"))
                    }
                };
                if let Some(m) = &means {
                    crate::envs::MabInstance::new(m.clone(), reward)
                        .map_err(|e| ConfigError::invalid("env.means", env.str("means").unwrap_or(""), e))?;
                }
                Ok(EnvSpec::Mab {
                    k,
                    difficulty,
                    reward,
                    means,
                })
            }
            Family::Linear | Family::Logistic => {
                for key in ["difficulty", "nu", "sigma_r", "means"] {
                    if env.str(key).is_some() {
                        return Err(ConfigError::UnknownKey(format!("env.{key}")));
                    }
                }
                let d = env.integer("d")?.ok_or_else(|| ConfigError::Missing("env.d".into()))? as usize;
                if d < 2 {
                    return Err(ConfigError::invalid("env.d", &d.to_string(), "need d >= 2"));
                }
                let mean_only = match reward_kind {
                    "bernoulli" => false,
                    "mean_only" => true,
                    other => return Err(ConfigError::invalid("env.reward_kind", other, "expected bernoulli or mean_only")),
                };
                Ok(EnvSpec::Structured {
                    k,
                    d,
                    link: family.link().expect("structured family"),
                    mean_only,
                })
            }
        }
    }

    /// Per-policy key namespace `policy.<label>.`.
    pub fn policy_section(&self, label: &str) -> Section<'_> {
        Section::new(&self.raw, &format!("policy.{label}."))
    }

    /// Rounds at which regret is recorded: multiples of `checkpoint_every`,
    /// plus the horizon.
    pub fn checkpoints(&self) -> Vec<u64> {
        let mut out: Vec<u64> = (1..=self.horizon / self.checkpoint_every)
            .map(|i| i * self.checkpoint_every)
            .collect();
        if out.last() != Some(&self.horizon) {
            out.push(self.horizon);
        }
        out
    }

    /// Returns a copy with `key` set to `value`, re-validated.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self, ConfigError> {
        let mut raw = self.raw.clone();
        raw.set(key, value);
        Self::from_raw(raw)
    }
}

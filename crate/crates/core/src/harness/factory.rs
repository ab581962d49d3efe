//! Policy construction by name.
//!
//! | kind | keys |
//! |---|---|
//! | `randucb`, `randucb_uncoupled`, `randucb_nonoptimistic` | `z.*`, `coupling`, `optimistic`, `bonus` |
//! | `ucb1` | `beta` |
//! | `klucb`, `bts`, `gts`, `ots`, `uniform` | |
//! | `eps_greedy` | `eps` |
//! | `randlinucb` | `lambda`, `u_mode`, `z.*` |
//! | `linucb` | `lambda`, `beta` |
//! | `lints`, `lints_inflated` | `lambda`, `beta`, `inflation` |
//! | `lin_eps_greedy` | `lambda`, `eps` |
//! | `randucblog` | GLB keys, `z.*` |
//! | `ucbglm` | GLB keys, `beta` |
//! | `glmts` | GLB keys, `scale` |
//!
//! `z.*` is `z.kind`, `z.L`, `z.U`, `z.M`, `z.eps`, `z.sigma`. GLB keys are
//! `link`, `tau0_mode`, `tau0_cap`, `mu_mode` (`g_prime_2` or `custom`) and
//! `mu`. MAB policies run on any family; the others need features.

use std::sync::Arc;

use crate::envs::{Environment, Instance, Link};
use crate::glb::{self, GlbState, LinkSpec, Tau0Mode};
use crate::harness::config::{ConfigError, ExperimentConfig, Family, Section};
use crate::linalg::Vector;
use crate::linear::{self, BetaMode, UMode};
use crate::mab::{self, Bonus, Coupling, RandUcbMode};
use crate::zdist::{ZDist, ZDistKind, ZDistSpec};
use crate::Policy;

pub const DEFAULT_LAMBDA: f64 = 1e-4;
pub const DEFAULT_EPS: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct GlbParams {
    pub link: LinkSpec,
    pub tau0: Tau0Mode,
}

/// Fully resolved policy parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyParams {
    RandUcb { z: ZDist, mode: RandUcbMode },
    Ucb1 { beta: f64 },
    KlUcb,
    BernoulliTs,
    GaussianTs { optimistic: bool },
    EpsGreedy { eps: f64 },
    Uniform,
    RandLinUcb { lambda: f64, z: ZDist, u_mode: UMode },
    LinUcb { lambda: f64, beta: BetaMode },
    LinTs { lambda: f64, inflation: f64, beta: BetaMode },
    LinEpsGreedy { lambda: f64, eps: f64 },
    RandUcbLog { glb: GlbParams, z: ZDist },
    UcbGlm { glb: GlbParams, beta: f64 },
    GlmTs { glb: GlbParams, scale: f64 },
}

const Z_KEYS: [&str; 6] = ["z.kind", "z.L", "z.U", "z.M", "z.eps", "z.sigma"];
const GLB_KEYS: [&str; 5] = ["link", "tau0_mode", "tau0_cap", "mu_mode", "mu"];

fn keys<'a>(base: &[&'a str], z: bool, glb_keys: bool) -> Vec<&'a str> {
    let mut out = base.to_vec();
    if z {
        out.extend(Z_KEYS);
    }
    if glb_keys {
        out.extend(GLB_KEYS);
    }
    out
}

/// Reads `z.*` over a default Gaussian shape on `[lower, upper]`; `None`
/// if no `z.` key is present.
fn zdist_from(sec: &Section, lower: f64, upper: f64, m: usize, sigma: f64) -> Result<Option<ZDist>, ConfigError> {
    if Z_KEYS.iter().all(|k| sec.str(k).is_none()) {
        return Ok(None);
    }
    let spec = ZDistSpec {
        kind: sec.parse::<ZDistKind>("z.kind")?.unwrap_or(ZDistKind::Gaussian),
        lower: sec.number("z.L")?.unwrap_or(lower),
        upper: sec.number("z.U")?.unwrap_or(upper),
        m: sec.integer("z.M")?.map_or(m, |v| v as usize),
        eps: sec.number("z.eps")?.unwrap_or(1e-7),
        sigma: sec.number("z.sigma")?.unwrap_or(sigma),
    };
    spec.build()
        .map(Some)
        .map_err(|e| ConfigError::invalid(&sec.full_key("z"), &spec.to_string(), e))
}

fn positive(sec: &Section, key: &str, default: f64) -> Result<f64, ConfigError> {
    let v = sec.number(key)?.unwrap_or(default);
    if v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::invalid(&sec.full_key(key), &v.to_string(), "must be positive"))
    }
}

fn nonnegative(sec: &Section, key: &str, default: f64) -> Result<f64, ConfigError> {
    let v = sec.number(key)?.unwrap_or(default);
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::invalid(&sec.full_key(key), &v.to_string(), "must be nonnegative"))
    }
}

fn choice<'a>(sec: &Section, key: &str, options: &[&'a str], default: &'a str) -> Result<&'a str, ConfigError> {
    match sec.str(key) {
        None => Ok(default),
        Some(v) => options
            .iter()
            .find(|o| **o == v)
            .copied()
            .ok_or_else(|| ConfigError::invalid(&sec.full_key(key), v, format!("expected one of {}", options.join(", ")))),
    }
}

fn beta_mode(sec: &Section) -> Result<BetaMode, ConfigError> {
    match sec.str("beta") {
        None | Some("data_dependent") => Ok(BetaMode::DataDependent),
        Some(_) => Ok(BetaMode::Constant(nonnegative(sec, "beta", 0.0)?)),
    }
}

fn glb_params(sec: &Section, family: Family) -> Result<GlbParams, ConfigError> {
    let link: Link = match sec.str("link") {
        Some(v) => v.parse().map_err(|e| ConfigError::invalid(&sec.full_key("link"), v, e))?,
        None => family.link().unwrap_or(Link::Logistic),
    };
    let mut spec = LinkSpec::for_link(link);
    match choice(sec, "mu_mode", &["g_prime_2", "custom"], "g_prime_2")? {
        "custom" => {
            let mu = sec.number("mu")?.ok_or_else(|| ConfigError::Missing(sec.full_key("mu")))?;
            if !(mu > 0.0 && mu <= spec.lipschitz) {
                return Err(ConfigError::invalid(&sec.full_key("mu"), &mu.to_string(), "need 0 < mu <= lipschitz"));
            }
            spec = spec.with_mu(mu);
        }
        _ => {
            if sec.str("mu").is_some() {
                return Err(ConfigError::invalid(&sec.full_key("mu"), sec.str("mu").unwrap_or(""), "set mu_mode = custom"));
            }
        }
    }
    let tau0 = match choice(sec, "tau0_mode", &["theory", "capped"], "capped")? {
        "theory" => Tau0Mode::Theory,
        _ => Tau0Mode::Capped {
            cap: sec.integer("tau0_cap")?.unwrap_or(glb::DEFAULT_TAU0_CAP),
        },
    };
    Ok(GlbParams { link: spec, tau0 })
}

impl PolicyParams {
    /// Resolves the parameters of policy `label` from the config.
    pub fn from_config(config: &ExperimentConfig, label: &str, kind: &str) -> Result<Self, ConfigError> {
        let sec = config.policy_section(label);
        let t = config.horizon;
        let mab_upper = 2.0 * (t as f64).ln().sqrt();
        let d = match config.env {
            crate::harness::config::EnvSpec::Structured { d, .. } => Some(d),
            _ => None,
        };
        let need_d = || {
            d.ok_or_else(|| {
                ConfigError::invalid(&format!("policy.{label}"), kind, "needs a linear or logistic family")
            })
        };
        let params = match kind {
            "randucb" | "randucb_uncoupled" | "randucb_nonoptimistic" => {
                sec.reject_unknown(&keys(&["coupling", "optimistic", "bonus"], true, false))?;
                let default_coupling = if kind == "randucb_uncoupled" { "uncoupled" } else { "coupled" };
                let coupling = match choice(&sec, "coupling", &["coupled", "uncoupled"], default_coupling)? {
                    "uncoupled" => Coupling::Uncoupled,
                    _ => Coupling::Coupled,
                };
                let bonus = match choice(&sec, "bonus", &["standard", "plus_one"], "standard")? {
                    "plus_one" => Bonus::PlusOne,
                    _ => Bonus::Standard,
                };
                let optimistic = sec.bool("optimistic")?.unwrap_or(kind != "randucb_nonoptimistic");
                let (lower, m) = if optimistic { (0.0, 20) } else { (-mab_upper, 40) };
                let z = match zdist_from(&sec, lower, mab_upper, m, 0.125)? {
                    Some(z) => z,
                    None => ZDist::gaussian(lower, mab_upper, m, 1e-7, 0.125).expect("default parameters are valid"),
                };
                PolicyParams::RandUcb {
                    z,
                    mode: RandUcbMode { coupling, bonus },
                }
            }
            "ucb1" => {
                sec.reject_unknown(&["beta"])?;
                PolicyParams::Ucb1 {
                    beta: nonnegative(&sec, "beta", mab::ucb1_beta(t))?,
                }
            }
            "klucb" | "bts" | "gts" | "ots" | "uniform" => {
                sec.reject_unknown(&[])?;
                match kind {
                    "klucb" => PolicyParams::KlUcb,
                    "bts" => PolicyParams::BernoulliTs,
                    "gts" => PolicyParams::GaussianTs { optimistic: false },
                    "ots" => PolicyParams::GaussianTs { optimistic: true },
                    _ => PolicyParams::Uniform,
                }
            }
            "eps_greedy" => {
                sec.reject_unknown(&["eps"])?;
                PolicyParams::EpsGreedy {
                    eps: nonnegative(&sec, "eps", DEFAULT_EPS)?,
                }
            }
            "randlinucb" => {
                sec.reject_unknown(&keys(&["lambda", "u_mode"], true, false))?;
                let d = need_d()?;
                let lambda = positive(&sec, "lambda", DEFAULT_LAMBDA)?;
                let (u_mode, z) = match choice(&sec, "u_mode", &["fixed", "data_dependent"], "data_dependent")? {
                    "fixed" => {
                        let upper = 3.0 * linear::theory_c1(d, t, lambda);
                        let z = zdist_from(&sec, 0.0, upper, 20, 0.125 * upper / mab_upper)?;
                        (UMode::Fixed, z.unwrap_or_else(|| linear::theory_zdist(d, t, lambda)))
                    }
                    _ => {
                        let z = zdist_from(&sec, 0.0, mab_upper, 20, 0.125)?;
                        (UMode::DataDependent, z.unwrap_or_else(|| ZDist::default_mab(t)))
                    }
                };
                PolicyParams::RandLinUcb { lambda, z, u_mode }
            }
            "linucb" => {
                sec.reject_unknown(&["lambda", "beta"])?;
                need_d()?;
                PolicyParams::LinUcb {
                    lambda: positive(&sec, "lambda", DEFAULT_LAMBDA)?,
                    beta: beta_mode(&sec)?,
                }
            }
            "lints" | "lints_inflated" => {
                sec.reject_unknown(&["lambda", "beta", "inflation"])?;
                let d = need_d()?;
                let sqrt_d = (d as f64).sqrt();
                let inflation = match sec.str("inflation") {
                    Some("sqrt_d") => sqrt_d,
                    Some(_) => nonnegative(&sec, "inflation", 1.0)?,
                    None if kind == "lints_inflated" => sqrt_d,
                    None => 1.0,
                };
                PolicyParams::LinTs {
                    lambda: positive(&sec, "lambda", DEFAULT_LAMBDA)?,
                    inflation,
                    beta: beta_mode(&sec)?,
                }
            }
            "lin_eps_greedy" => {
                sec.reject_unknown(&["lambda", "eps"])?;
                need_d()?;
                PolicyParams::LinEpsGreedy {
                    lambda: positive(&sec, "lambda", DEFAULT_LAMBDA)?,
                    eps: nonnegative(&sec, "eps", DEFAULT_EPS)?,
                }
            }
            "randucblog" => {
                sec.reject_unknown(&keys(&[], true, true))?;
                let d = need_d()?;
                let glb = glb_params(&sec, config.family)?;
                let upper = glb::ucbglm_width(d, t, glb.link.mu_floor);
                let z = zdist_from(&sec, 0.0, upper, 20, 0.125 * upper / mab_upper)?
                    .unwrap_or_else(|| ZDist::default_shape(t, upper));
                PolicyParams::RandUcbLog { glb, z }
            }
            "ucbglm" => {
                sec.reject_unknown(&keys(&["beta"], false, true))?;
                let d = need_d()?;
                let glb = glb_params(&sec, config.family)?;
                let beta = nonnegative(&sec, "beta", glb::ucbglm_width(d, t, glb.link.mu_floor))?;
                PolicyParams::UcbGlm { glb, beta }
            }
            "glmts" => {
                sec.reject_unknown(&keys(&["scale"], false, true))?;
                need_d()?;
                PolicyParams::GlmTs {
                    glb: glb_params(&sec, config.family)?,
                    scale: nonnegative(&sec, "scale", 1.0)?,
                }
            }
            other => {
                return Err(ConfigError::invalid(
                    &format!("policies ({label})"),
                    other,
                    "unknown policy kind",
                ))
            }
        };
        Ok(params)
    }

    /// The sampling distribution of RandUCB-type policies.
    pub fn zdist(&self) -> Option<&ZDist> {
        match self {
            PolicyParams::RandUcb { z, .. } | PolicyParams::RandLinUcb { z, .. } | PolicyParams::RandUcbLog { z, .. } => {
                Some(z)
            }
            _ => None,
        }
    }

    /// Instantiates the policy for one replication.
    pub fn build(&self, instance: &Instance, horizon: u64) -> Result<Box<dyn Policy>, String> {
        let k = instance.num_arms();
        let features = || -> Result<Arc<[Vector]>, String> {
            match instance {
                Instance::Structured(s) => Ok(s.features().to_vec().into()),
                Instance::Mab(_) => Err("policy needs feature vectors".to_string()),
            }
        };
        let glb_state = |p: &GlbParams| -> Result<GlbState, String> {
            GlbState::new(features()?, p.link, p.tau0, horizon).map_err(|e| e.to_string())
        };
        let lin_err = |e: linear::LinError| e.to_string();
        Ok(match self {
            PolicyParams::RandUcb { z, mode } => Box::new(mab::RandUcb::new(k, z.clone(), *mode)),
            PolicyParams::Ucb1 { beta } => Box::new(mab::Ucb1::new(k, *beta)),
            PolicyParams::KlUcb => Box::new(mab::KlUcb::new(k)),
            PolicyParams::BernoulliTs => Box::new(mab::BernoulliTs::new(k)),
            PolicyParams::GaussianTs { optimistic } => Box::new(mab::GaussianTs::new(k, *optimistic)),
            PolicyParams::EpsGreedy { eps } => Box::new(mab::EpsGreedy::new(k, *eps, horizon)),
            PolicyParams::Uniform => Box::new(mab::UniformRandom::new(k)),
            PolicyParams::RandLinUcb { lambda, z, u_mode } => Box::new(
                linear::RandLinUcb::new(features()?, *lambda, z.clone(), *u_mode, horizon).map_err(lin_err)?,
            ),
            PolicyParams::LinUcb { lambda, beta } => {
                Box::new(linear::LinUcb::new(features()?, *lambda, *beta, horizon).map_err(lin_err)?)
            }
            PolicyParams::LinTs { lambda, inflation, beta } => {
                Box::new(linear::LinTs::new(features()?, *lambda, *inflation, *beta, horizon).map_err(lin_err)?)
            }
            PolicyParams::LinEpsGreedy { lambda, eps } => {
                Box::new(linear::LinEpsGreedy::new(features()?, *lambda, *eps, horizon).map_err(lin_err)?)
            }
            PolicyParams::RandUcbLog { glb, z } => Box::new(glb::RandUcbLog::new(glb_state(glb)?, z.clone())),
            PolicyParams::UcbGlm { glb, beta } => Box::new(glb::UcbGlm::new(glb_state(glb)?, *beta)),
            PolicyParams::GlmTs { glb, scale } => Box::new(glb::GlmTs::new(glb_state(glb)?, *scale)),
        })
    }
}

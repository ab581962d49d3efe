//! Seeded experiment runner.
//!
//! Every replication draws its instance from the `Instance` stream of its
//! run index, precomputes the optimal arm's realized rewards `Y*_t` from the
//! shared `Optimal` stream, and then runs each policy with its own `Policy`
//! and `Reward` streams. When a policy pulls the optimal arm it observes
//! `Y*_t` itself, so that round contributes exactly zero regret.

pub mod config;
pub mod factory;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::{self, BoundError, BoundReport};
use crate::envs::{gen_mab, gen_structured, Environment, Instance, MabInstance, StructuredReward};
use crate::glb;
use crate::rng::{self, Role};
use crate::Policy;

pub use config::{ConfigError, EnvSpec, ExperimentConfig, Family, PolicySpec};
pub use factory::PolicyParams;

/// Environment variable holding the worker thread count (0 = all cores).
pub const THREADS_ENV: &str = "RANDUCB_THREADS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run {run}: {message}")]
    Runtime { run: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

/// Cumulative empirical regret of one policy in one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub policy: String,
    pub run: usize,
    pub checkpoints: Vec<(u64, f64)>,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        self.checkpoints.last().map_or(0.0, |c| c.1)
    }

    /// Regret at the last checkpoint not after `round`.
    pub fn regret_at(&self, round: u64) -> Option<f64> {
        self.checkpoints.iter().rev().find(|c| c.0 <= round).map(|c| c.1)
    }
}

/// A trace with the per-round detail kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub trace: RegretTrace,
    pub arms: Vec<usize>,
    pub instantaneous: Vec<f64>,
}

/// Instance of replication `run`.
pub fn make_instance(config: &ExperimentConfig, run: usize) -> Result<Instance, HarnessError> {
    let mut rng = rng::stream(config.base_seed, run as u64, Role::Instance, "");
    let runtime = |e: crate::envs::EnvError| HarnessError::Runtime {
        run,
        message: e.to_string(),
    };
    Ok(match &config.env {
        EnvSpec::Mab {
            k,
            difficulty,
            reward,
            means,
        } => Instance::Mab(match means {
            Some(m) => MabInstance::new(m.clone(), *reward).map_err(runtime)?,
            None => gen_mab(*k, *difficulty, *reward, &mut rng).map_err(runtime)?,
        }),
        EnvSpec::Structured { k, d, link, mean_only } => {
            let inst = gen_structured(*k, *d, *link, &mut rng).map_err(runtime)?;
            Instance::Structured(if *mean_only {
                inst.with_reward_mode(StructuredReward::MeanOnly)
            } else {
                inst
            })
        }
    })
}

/// Realized rewards of the optimal arm for rounds `1..=T`.
pub fn optimal_rewards(config: &ExperimentConfig, instance: &Instance, run: usize) -> Vec<f64> {
    let mut rng = rng::stream(config.base_seed, run as u64, Role::Optimal, "");
    let best = instance.optimal_arm();
    (0..config.horizon).map(|_| instance.pull(best, &mut rng)).collect()
}

/// Runs one policy for `ystar.len()` rounds.
pub fn simulate(
    policy: &mut dyn Policy,
    instance: &Instance,
    ystar: &[f64],
    checkpoints: &[u64],
    policy_rng: &mut rng::Stream,
    reward_rng: &mut rng::Stream,
    record: bool,
) -> (Vec<(u64, f64)>, Vec<usize>, Vec<f64>) {
    let best = instance.optimal_arm();
    let mut cumulative = 0.0;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().peekable();
    let (mut arms, mut inst) = (Vec::new(), Vec::new());
    for (t, &y_best) in ystar.iter().enumerate() {
        let arm = policy.select(policy_rng);
        let y = if arm == best {
            y_best
        } else {
            instance.pull(arm, reward_rng)
        };
        policy.update(arm, y, policy_rng);
        let r = y_best - y;
        cumulative += r;
        if record {
            arms.push(arm);
            inst.push(r);
        }
        let round = t as u64 + 1;
        if next.peek() == Some(&&round) {
            out.push((round, cumulative));
            next.next();
        }
    }
    if record {
        debug_assert_eq!(inst.iter().sum::<f64>(), cumulative, "regret conservation");
    }
    (out, arms, inst)
}

fn resolve_policies(config: &ExperimentConfig) -> Result<Vec<(String, PolicyParams)>, HarnessError> {
    config
        .policies
        .iter()
        .map(|p| Ok((p.label.clone(), PolicyParams::from_config(config, &p.label, &p.kind)?)))
        .collect()
}

fn replicate(
    config: &ExperimentConfig,
    policies: &[(String, PolicyParams)],
    run: usize,
    record: bool,
) -> Result<Vec<RunRecord>, HarnessError> {
    let instance = make_instance(config, run)?;
    let ystar = optimal_rewards(config, &instance, run);
    let checkpoints = config.checkpoints();
    policies
        .iter()
        .map(|(label, params)| {
            let mut policy = params
                .build(&instance, config.horizon)
                .map_err(|message| HarnessError::Runtime { run, message })?;
            let mut prng = rng::stream(config.base_seed, run as u64, Role::Policy, label);
            let mut rrng = rng::stream(config.base_seed, run as u64, Role::Reward, label);
            let (cps, arms, instantaneous) =
                simulate(policy.as_mut(), &instance, &ystar, &checkpoints, &mut prng, &mut rrng, record);
            Ok(RunRecord {
                trace: RegretTrace {
                    policy: label.clone(),
                    run,
                    checkpoints: cps,
                },
                arms,
                instantaneous,
            })
        })
        .collect()
}

/// Thread count from [`THREADS_ENV`]; `None` means rayon's default.
pub fn configured_threads() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

fn run_all(config: &ExperimentConfig, record: bool) -> Result<Vec<RunRecord>, HarnessError> {
    let policies = resolve_policies(config)?;
    let work = || -> Result<Vec<Vec<RunRecord>>, HarnessError> {
        (0..config.replications)
            .into_par_iter()
            .map(|run| replicate(config, &policies, run, record))
            .collect()
    };
    let nested = match configured_threads() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Runtime {
                run: 0,
                message: e.to_string(),
            })?
            .install(work)?,
        None => work()?,
    };
    Ok(nested.into_iter().flatten().collect())
}

/// All traces, ordered by run then by policy order in the config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RegretTrace>, HarnessError> {
    Ok(run_all(config, false)?.into_iter().map(|r| r.trace).collect())
}

/// Like [`run_experiment`] but keeps arms and per-round regrets.
pub fn run_experiment_recorded(config: &ExperimentConfig) -> Result<Vec<RunRecord>, HarnessError> {
    run_all(config, true)
}

/// Mean and standard error across runs at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub policy: String,
    pub round: u64,
    pub mean: f64,
    pub stderr: f64,
    pub runs: usize,
}

/// Per-policy mean and `sd/√R` at every checkpoint, sorted by policy then round.
pub fn aggregate(traces: &[RegretTrace]) -> Vec<AggregateRow> {
    let mut by_key: std::collections::BTreeMap<(&str, u64), Vec<f64>> = std::collections::BTreeMap::new();
    let mut ordered: Vec<&RegretTrace> = traces.iter().collect();
    ordered.sort_by_key(|t| t.run);
    for t in ordered {
        for &(round, value) in &t.checkpoints {
            by_key.entry((t.policy.as_str(), round)).or_default().push(value);
        }
    }
    by_key
        .into_iter()
        .map(|((policy, round), values)| {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let stderr = if n > 1 {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            AggregateRow {
                policy: policy.to_string(),
                round,
                mean,
                stderr,
                runs: n,
            }
        })
        .collect()
}

pub const CSV_HEADER: [&str; 6] = ["family", "policy", "round", "mean_regret", "stderr", "runs"];

/// `v` with 9 significant digits.
pub fn format_sig9(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn write_csv(family: Family, rows: &[AggregateRow], path: &Path) -> Result<(), HarnessError> {
    let csv_err = |source| HarnessError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            family.to_string(),
            r.policy.clone(),
            r.round.to_string(),
            format_sig9(r.mean),
            format_sig9(r.stderr),
            r.runs.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Runs the experiment and writes `<dir>/<name>.csv`.
pub fn run_to_dir(config: &ExperimentConfig, dir: &Path, name: &str) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let traces = run_experiment(config)?;
    let path = dir.join(format!("{name}.csv"));
    write_csv(config.family, &aggregate(&traces), &path)?;
    Ok(path)
}

/// File-name-safe form of a sweep value (`1/16` becomes `1_16`).
pub fn sanitize(value: &str) -> String {
    value
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// Runs one experiment per value of `param`, writing `<dir>/<name>_<value>.csv`.
pub fn sweep(
    config: &ExperimentConfig,
    param: &str,
    values: &[String],
    dir: &Path,
    name: &str,
) -> Result<Vec<PathBuf>, HarnessError> {
    let variants: Vec<ExperimentConfig> = values
        .iter()
        .map(|v| config.with_override(param, v))
        .collect::<Result<_, _>>()?;
    for c in &variants {
        resolve_policies(c)?;
    }
    let key = param.rsplit('.').next().unwrap_or(param);
    variants
        .iter()
        .zip(values)
        .map(|(c, v)| run_to_dir(c, dir, &format!("{name}_{key}_{}", sanitize(v))))
        .collect()
}

/// One bound evaluation for a RandUCB-type policy.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundEntry {
    pub policy: String,
    pub theorem: &'static str,
    pub report: Result<BoundReport, BoundError>,
}

/// Bounds for every RandUCB-type policy, using the instance of run 0 for
/// instance-dependent constants.
pub fn bound_entries(config: &ExperimentConfig) -> Result<Vec<BoundEntry>, HarnessError> {
    let policies = resolve_policies(config)?;
    let instance = make_instance(config, 0)?;
    let (t, k) = (config.horizon, instance.num_arms());
    let mut out = Vec::new();
    for (label, params) in &policies {
        let mut push = |theorem, report| {
            out.push(BoundEntry {
                policy: label.clone(),
                theorem,
                report,
            })
        };
        match params {
            PolicyParams::RandUcb { z, .. } => {
                push("thm1", bounds::thm1_bound(k, t, z, None));
                push("thm6", bounds::thm6_bound(&instance.gaps(), z, t, k));
            }
            PolicyParams::RandLinUcb { lambda, z, .. } => {
                let d = match &instance {
                    Instance::Structured(s) => s.dim(),
                    Instance::Mab(_) => unreachable!("linear policies need features"),
                };
                push("thm3", bounds::thm3_bound(d, t, *lambda, z, None));
            }
            PolicyParams::RandUcbLog { glb: g, z } => {
                let Instance::Structured(s) = &instance else {
                    unreachable!("GLB policies need features")
                };
                let (_, rho) = glb::select_basis(s.features()).map_err(|e| HarnessError::Runtime {
                    run: 0,
                    message: e.to_string(),
                })?;
                push(
                    "thm4",
                    bounds::thm4_bound(s.dim(), t, g.link.mu_floor, g.link.lipschitz, rho, z, None),
                );
            }
            _ => {}
        }
    }
    Ok(out)
}

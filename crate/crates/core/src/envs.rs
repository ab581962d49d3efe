//! Ground-truth bandit environments and randomized instance generators.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta, Distribution, Normal, StandardNormal};
use thiserror::Error;

use crate::linalg::Vector;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("need at least 2 arms, got {0}")]
    TooFewArms(usize),
    #[error("need dimension d >= 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("arm {arm} has mean {mean} outside [0, 1]")]
    MeanOutOfRange { arm: usize, mean: f64 },
    #[error("arm {arm} has mean {mean}; beta rewards need a mean strictly inside (0, 1)")]
    DegenerateBeta { arm: usize, mean: f64 },
    #[error("invalid reward parameter: {0}")]
    BadParameter(String),
    #[error("feature {arm} has dimension {got}, expected {expected}")]
    DimensionMismatch { arm: usize, got: usize, expected: usize },
    #[error("unknown {what} `{value}`")]
    Unknown { what: &'static str, value: String },
}

/// Reward distribution of a multi-armed instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardKind {
    Bernoulli,
    /// `Beta(ν μ, ν (1-μ))`, mean `μ`.
    Beta { concentration: f64 },
    /// `N(μ, σ_r²)`, not clipped.
    Gaussian { stddev: f64 },
}

impl RewardKind {
    pub const DEFAULT_CONCENTRATION: f64 = 4.0;
    pub const DEFAULT_STDDEV: f64 = 0.1;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Difficulty {
    /// Means uniform on `[0.25, 0.75]`.
    Easy,
    /// Means uniform on `[0.45, 0.55]`.
    Hard,
}

impl Difficulty {
    pub fn interval(self) -> (f64, f64) {
        match self {
            Difficulty::Easy => (0.25, 0.75),
            Difficulty::Hard => (0.45, 0.55),
        }
    }
}

impl FromStr for Difficulty {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "easy" => Ok(Self::Easy),
            "hard" => Ok(Self::Hard),
            other => Err(EnvError::Unknown {
                what: "difficulty",
                value: other.to_string(),
            }),
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Easy => "easy",
            Self::Hard => "hard",
        })
    }
}

/// Link from the linear predictor to the expected reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Identity,
    Logistic,
}

impl Link {
    pub fn mean(self, u: f64) -> f64 {
        match self {
            Link::Identity => u,
            Link::Logistic => sigmoid(u),
        }
    }

    pub fn derivative(self, u: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Logistic => {
                let s = sigmoid(u);
                s * (1.0 - s)
            }
        }
    }

    /// Log-partition `b` with `b' = g`.
    pub fn log_partition(self, u: f64) -> f64 {
        match self {
            Link::Identity => 0.5 * u * u,
            // ln(1 + e^u), stable for large |u|
            Link::Logistic => u.max(0.0) + (-u.abs()).exp().ln_1p(),
        }
    }
}

impl FromStr for Link {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" | "linear" => Ok(Self::Identity),
            "logistic" => Ok(Self::Logistic),
            other => Err(EnvError::Unknown {
                what: "link",
                value: other.to_string(),
            }),
        }
    }
}

pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Common interface of all ground-truth environments.
pub trait Environment: Send + Sync {
    fn num_arms(&self) -> usize;

    fn expected_reward(&self, arm: usize) -> f64;

    fn pull<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> f64
    where
        Self: Sized;

    /// Arm with the largest expected reward; ties go to the lowest index.
    fn optimal_arm(&self) -> usize {
        let means: Vec<f64> = (0..self.num_arms()).map(|i| self.expected_reward(i)).collect();
        let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        means.iter().position(|&m| m == best).unwrap_or(0)
    }

    fn gap(&self, arm: usize) -> f64 {
        self.expected_reward(self.optimal_arm()) - self.expected_reward(arm)
    }

    fn gaps(&self) -> Vec<f64> {
        let best = self.expected_reward(self.optimal_arm());
        (0..self.num_arms()).map(|i| best - self.expected_reward(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MabInstance {
    means: Vec<f64>,
    reward: RewardKind,
}

impl MabInstance {
    pub fn new(means: Vec<f64>, reward: RewardKind) -> Result<Self, EnvError> {
        if means.len() < 2 {
            return Err(EnvError::TooFewArms(means.len()));
        }
        for (arm, &mean) in means.iter().enumerate() {
            if !(0.0..=1.0).contains(&mean) {
                return Err(EnvError::MeanOutOfRange { arm, mean });
            }
        }
        match reward {
            RewardKind::Bernoulli => {}
            RewardKind::Beta { concentration } => {
                if !(concentration > 0.0 && concentration.is_finite()) {
                    return Err(EnvError::BadParameter(format!("beta concentration {concentration}")));
                }
                if let Some((arm, &mean)) = means.iter().enumerate().find(|(_, m)| **m == 0.0 || **m == 1.0) {
                    return Err(EnvError::DegenerateBeta { arm, mean });
                }
            }
            RewardKind::Gaussian { stddev } => {
                if !(stddev > 0.0 && stddev.is_finite()) {
                    return Err(EnvError::BadParameter(format!("gaussian stddev {stddev}")));
                }
            }
        }
        Ok(Self { means, reward })
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn reward_kind(&self) -> RewardKind {
        self.reward
    }
}

impl Environment for MabInstance {
    fn num_arms(&self) -> usize {
        self.means.len()
    }

    fn expected_reward(&self, arm: usize) -> f64 {
        self.means[arm]
    }

    fn pull<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> f64 {
        let mu = self.means[arm];
        match self.reward {
            RewardKind::Bernoulli => bernoulli(mu, rng),
            RewardKind::Beta { concentration } => Beta::new(concentration * mu, concentration * (1.0 - mu))
                .expect("validated at construction")
                .sample(rng),
            RewardKind::Gaussian { stddev } => Normal::new(mu, stddev).expect("validated at construction").sample(rng),
        }
    }
}

fn bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> f64 {
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

/// Means i.i.d. uniform on the difficulty interval.
pub fn gen_mab<R: Rng + ?Sized>(
    k: usize,
    difficulty: Difficulty,
    reward: RewardKind,
    rng: &mut R,
) -> Result<MabInstance, EnvError> {
    let (lo, hi) = difficulty.interval();
    let means = (0..k).map(|_| rng.random_range(lo..=hi)).collect();
    MabInstance::new(means, reward)
}

/// How a structured instance turns the expected reward into an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructuredReward {
    /// `Bernoulli(g(⟨x, θ*⟩))`.
    Bernoulli,
    /// Deterministic `g(⟨x, θ*⟩)`.
    MeanOnly,
}

/// Rounding allowance when checking that structured means lie in `[0, 1]`.
const MEAN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredInstance {
    theta_star: Vector,
    features: Vec<Vector>,
    link: Link,
    reward: StructuredReward,
}

impl StructuredInstance {
    pub fn new(
        theta_star: Vector,
        features: Vec<Vector>,
        link: Link,
        reward: StructuredReward,
    ) -> Result<Self, EnvError> {
        if features.len() < 2 {
            return Err(EnvError::TooFewArms(features.len()));
        }
        let d = theta_star.len();
        for (arm, x) in features.iter().enumerate() {
            if x.len() != d {
                return Err(EnvError::DimensionMismatch {
                    arm,
                    got: x.len(),
                    expected: d,
                });
            }
        }
        let inst = Self {
            theta_star,
            features,
            link,
            reward,
        };
        for arm in 0..inst.features.len() {
            let mean = inst.link.mean(inst.features[arm].dot(&inst.theta_star));
            if !(-MEAN_SLACK..=1.0 + MEAN_SLACK).contains(&mean) {
                return Err(EnvError::MeanOutOfRange { arm, mean });
            }
        }
        Ok(inst)
    }

    pub fn theta_star(&self) -> &Vector {
        &self.theta_star
    }

    pub fn features(&self) -> &[Vector] {
        &self.features
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn reward_mode(&self) -> StructuredReward {
        self.reward
    }

    pub fn with_reward_mode(mut self, reward: StructuredReward) -> Self {
        self.reward = reward;
        self
    }
}

impl Environment for StructuredInstance {
    fn num_arms(&self) -> usize {
        self.features.len()
    }

    fn expected_reward(&self, arm: usize) -> f64 {
        self.link.mean(self.features[arm].dot(&self.theta_star)).clamp(0.0, 1.0)
    }

    fn pull<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> f64 {
        let mean = self.expected_reward(arm);
        match self.reward {
            StructuredReward::Bernoulli => bernoulli(mean, rng),
            StructuredReward::MeanOnly => mean,
        }
    }
}

/// Uniform direction of norm `1/√2` in `d-1` dimensions, followed by `1/√2`.
fn half_sphere_feature<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vector {
    let half = std::f64::consts::FRAC_1_SQRT_2;
    loop {
        let g: Vec<f64> = (0..d - 1).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-300 {
            let mut x: Vec<f64> = g.iter().map(|v| v / norm * half).collect();
            x.push(half);
            return Vector::from_vec(x);
        }
    }
}

/// Random structured instance: `θ*` and every feature have unit norm,
/// so `⟨x, θ*⟩ ∈ [0, 1]`.
pub fn gen_structured<R: Rng + ?Sized>(
    k: usize,
    d: usize,
    link: Link,
    rng: &mut R,
) -> Result<StructuredInstance, EnvError> {
    if d < 2 {
        return Err(EnvError::DimensionTooSmall(d));
    }
    let theta_star = half_sphere_feature(d, rng);
    let features = (0..k).map(|_| half_sphere_feature(d, rng)).collect();
    StructuredInstance::new(theta_star, features, link, StructuredReward::Bernoulli)
}

/// Either kind of environment, as produced by the harness.
#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Mab(MabInstance),
    Structured(StructuredInstance),
}

impl Environment for Instance {
    fn num_arms(&self) -> usize {
        match self {
            Instance::Mab(m) => m.num_arms(),
            Instance::Structured(s) => s.num_arms(),
        }
    }

    fn expected_reward(&self, arm: usize) -> f64 {
        match self {
            Instance::Mab(m) => m.expected_reward(arm),
            Instance::Structured(s) => s.expected_reward(arm),
        }
    }

    fn pull<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> f64 {
        match self {
            Instance::Mab(m) => m.pull(arm, rng),
            Instance::Structured(s) => s.pull(arm, rng),
        }
    }
}

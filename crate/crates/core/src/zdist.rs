//! Discrete sampling distribution for the randomized confidence multiplier.
//!
//! A [`ZDist`] is supported on `M` equally spaced points `L = α_1 < … < α_M = U`.
//! RandUCB draws `Z ~ ZDist` each round and uses it in place of UCB's fixed
//! width multiplier.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ZDistError {
    #[error("support size M must be at least {min}, got {got}")]
    SupportTooSmall { min: usize, got: usize },
    #[error("sigma must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("eps must lie in {range}, got {got}")]
    BadEps { range: &'static str, got: f64 },
    #[error("lower bound {lower} exceeds upper bound {upper}")]
    Inverted { lower: f64, upper: f64 },
    #[error("a single support point needs L = U (got L = {lower}, U = {upper})")]
    DegenerateGrid { lower: f64, upper: f64 },
    #[error("horizon must be at least 2, got {0}")]
    ShortHorizon(u64),
    #[error("non-finite parameter {0}")]
    NonFinite(&'static str),
    #[error("unknown distribution kind `{0}`")]
    UnknownKind(String),
}

/// Immutable discrete distribution on an equally spaced grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ZDist {
    alphas: Vec<f64>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
    lower: f64,
    upper: f64,
}

fn grid(lower: f64, upper: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![lower];
    }
    let step = (upper - lower) / (m - 1) as f64;
    let mut alphas: Vec<f64> = (0..m).map(|i| lower + i as f64 * step).collect();
    alphas[m - 1] = upper;
    alphas
}

fn check_finite(value: f64, name: &'static str) -> Result<(), ZDistError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ZDistError::NonFinite(name))
    }
}

impl ZDist {
    fn from_parts(lower: f64, upper: f64, alphas: Vec<f64>, probs: Vec<f64>) -> Self {
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self {
            alphas,
            probs,
            cumulative,
            lower,
            upper,
        }
    }

    /// Truncated, discretized Gaussian with an `eps` atom on the top point.
    ///
    /// The top atom gets exactly `eps`; the remaining `M-1` points share
    /// `1-eps` in proportion to `exp(-α²/2σ²)`.
    pub fn gaussian(lower: f64, upper: f64, m: usize, eps: f64, sigma: f64) -> Result<Self, ZDistError> {
        check_finite(lower, "L")?;
        check_finite(upper, "U")?;
        if m < 1 {
            return Err(ZDistError::SupportTooSmall { min: 1, got: m });
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(ZDistError::BadSigma(sigma));
        }
        if !(0.0..1.0).contains(&eps) {
            return Err(ZDistError::BadEps { range: "[0, 1)", got: eps });
        }
        if lower > upper {
            return Err(ZDistError::Inverted { lower, upper });
        }
        if m == 1 {
            if lower != upper {
                return Err(ZDistError::DegenerateGrid { lower, upper });
            }
            return Ok(Self::from_parts(lower, upper, vec![lower], vec![1.0]));
        }
        let alphas = grid(lower, upper, m);
        // Shift log-weights by their maximum so far-from-zero grids do not underflow.
        let log_w: Vec<f64> = alphas[..m - 1]
            .iter()
            .map(|a| -a * a / (2.0 * sigma * sigma))
            .collect();
        let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut probs: Vec<f64> = w.iter().map(|wi| (1.0 - eps) * wi / total).collect();
        probs.push(eps);
        Ok(Self::from_parts(lower, upper, alphas, probs))
    }

    /// Uniform weights on `M ≥ 2` equally spaced points.
    pub fn uniform(lower: f64, upper: f64, m: usize) -> Result<Self, ZDistError> {
        check_finite(lower, "L")?;
        check_finite(upper, "U")?;
        if m < 2 {
            return Err(ZDistError::SupportTooSmall { min: 2, got: m });
        }
        if lower >= upper {
            return Err(ZDistError::Inverted { lower, upper });
        }
        let probs = vec![1.0 / m as f64; m];
        Ok(Self::from_parts(lower, upper, grid(lower, upper, m), probs))
    }

    /// Point mass at `beta`: RandUCB with this distribution is plain UCB.
    pub fn point(beta: f64) -> Result<Self, ZDistError> {
        check_finite(beta, "beta")?;
        Ok(Self::from_parts(beta, beta, vec![beta], vec![1.0]))
    }

    /// `0` with probability `1-eps`, `2√(ln T)` with probability `eps`
    /// (the adaptive ε-greedy instantiation).
    pub fn two_point(eps: f64, horizon: u64) -> Result<Self, ZDistError> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(ZDistError::BadEps { range: "(0, 1)", got: eps });
        }
        if horizon < 2 {
            return Err(ZDistError::ShortHorizon(horizon));
        }
        let top = 2.0 * (horizon as f64).ln().sqrt();
        Ok(Self::two_point_at(eps, top))
    }

    fn two_point_at(eps: f64, top: f64) -> Self {
        Self::from_parts(0.0, top, vec![0.0, top], vec![1.0 - eps, eps])
    }

    /// The default MAB distribution: Gaussian, `L = 0`, `U = 2√(ln T)`,
    /// `M = 20`, `ε = 1e-7`, `σ = 1/8`.
    pub fn default_mab(horizon: u64) -> Self {
        let upper = 2.0 * (horizon.max(2) as f64).ln().sqrt();
        Self::gaussian(0.0, upper, 20, 1e-7, 0.125).expect("default parameters are valid")
    }

    /// The default MAB distribution stretched to `[0, upper]`: same
    /// probabilities, with `σ` scaled along with the grid.
    pub fn default_shape(horizon: u64, upper: f64) -> Self {
        let base = 2.0 * (horizon.max(2) as f64).ln().sqrt();
        Self::gaussian(0.0, upper, 20, 1e-7, 0.125 * upper / base).expect("default parameters are valid")
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Index of a support point drawn by inverse CDF from one uniform.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.alphas.len() - 1)
    }

    /// One draw of `Z`; consumes exactly one uniform from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.alphas[self.sample_index(rng)]
    }

    /// One draw with the support scaled so that `U` maps to `new_upper`.
    ///
    /// Probabilities are unchanged; the grid is stretched by `new_upper / U`.
    pub fn sample_scaled<R: Rng + ?Sized>(&self, rng: &mut R, new_upper: f64) -> f64 {
        let alpha = self.sample(rng);
        if self.upper == 0.0 {
            alpha
        } else {
            alpha / self.upper * new_upper
        }
    }

    /// `P(Z > c)`.
    pub fn tail_prob(&self, c: f64) -> f64 {
        self.alphas
            .iter()
            .zip(&self.probs)
            .filter(|(a, _)| **a > c)
            .fold(0.0, |acc, (_, p)| acc + p)
    }

    /// `P(|Z| > c)`.
    pub fn abs_tail_prob(&self, c: f64) -> f64 {
        self.alphas
            .iter()
            .zip(&self.probs)
            .filter(|(a, _)| a.abs() > c)
            .fold(0.0, |acc, (_, p)| acc + p)
    }
}

/// Which constructor a [`ZDistSpec`] routes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZDistKind {
    Gaussian,
    Uniform,
    Point,
    TwoPoint,
}

impl FromStr for ZDistKind {
    type Err = ZDistError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "uniform" => Ok(Self::Uniform),
            "point" => Ok(Self::Point),
            "two_point" => Ok(Self::TwoPoint),
            other => Err(ZDistError::UnknownKind(other.to_string())),
        }
    }
}

impl fmt::Display for ZDistKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gaussian => "gaussian",
            Self::Uniform => "uniform",
            Self::Point => "point",
            Self::TwoPoint => "two_point",
        })
    }
}

/// Declarative description `{kind, L, U, M, eps, sigma}` as read from a
/// config file.
///
/// For `point`, `U` is the atom. For `two_point`, `U` is the upper atom
/// (the horizon-based constructor is [`ZDist::two_point`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZDistSpec {
    pub kind: ZDistKind,
    pub lower: f64,
    pub upper: f64,
    pub m: usize,
    pub eps: f64,
    pub sigma: f64,
}

impl ZDistSpec {
    /// The default MAB spec for horizon `T`.
    pub fn default_for(horizon: u64) -> Self {
        Self {
            kind: ZDistKind::Gaussian,
            lower: 0.0,
            upper: 2.0 * (horizon.max(2) as f64).ln().sqrt(),
            m: 20,
            eps: 1e-7,
            sigma: 0.125,
        }
    }

    pub fn build(&self) -> Result<ZDist, ZDistError> {
        match self.kind {
            ZDistKind::Gaussian => ZDist::gaussian(self.lower, self.upper, self.m, self.eps, self.sigma),
            ZDistKind::Uniform => ZDist::uniform(self.lower, self.upper, self.m),
            ZDistKind::Point => ZDist::point(self.upper),
            ZDistKind::TwoPoint => {
                if !(self.eps > 0.0 && self.eps < 1.0) {
                    return Err(ZDistError::BadEps { range: "(0, 1)", got: self.eps });
                }
                check_finite(self.upper, "U")?;
                Ok(ZDist::two_point_at(self.eps, self.upper))
            }
        }
    }
}

impl fmt::Display for ZDistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "kind={} L={} U={} M={} eps={} sigma={}",
            self.kind, self.lower, self.upper, self.m, self.eps, self.sigma
        )
    }
}

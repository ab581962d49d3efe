//! Closed-form regret bounds for RandUCB.
//!
//! Every evaluator returns a [`BoundReport`] or [`BoundError::Inapplicable`]
//! when the theorem's preconditions fail for the supplied distribution.

use std::fmt;

use thiserror::Error;

use crate::zdist::ZDist;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("bound not applicable: {0}")]
    Inapplicable(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Components of an evaluated bound. Components a theorem does not use are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub value: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// `P(Z > c₁)` (`P(Z > √𝓛 c₁)` for generalized linear bandits).
    pub tail_hi: f64,
    /// `P(|Z| > c₂)`.
    pub tail_abs: f64,
    /// Additive terms.
    pub extra: f64,
    /// The cruder `M / p_M` variant of the instance-dependent bound.
    pub auxiliary: Option<f64>,
}

impl BoundReport {
    pub const CSV_HEADER: &'static str = "value,c1,c2,c3,tail_hi,tail_abs,extra,auxiliary";

    pub fn csv_row(&self) -> String {
        let aux = self.auxiliary.map(|v| format!("{v:.9e}")).unwrap_or_default();
        format!(
            "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{}",
            self.value, self.c1, self.c2, self.c3, self.tail_hi, self.tail_abs, self.extra, aux
        )
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "value={}", self.value)?;
        writeln!(f, "c1={}", self.c1)?;
        writeln!(f, "c2={}", self.c2)?;
        writeln!(f, "c3={}", self.c3)?;
        writeln!(f, "tail_hi={}", self.tail_hi)?;
        writeln!(f, "tail_abs={}", self.tail_abs)?;
        write!(f, "extra={}", self.extra)?;
        if let Some(aux) = self.auxiliary {
            write!(f, "\nauxiliary={aux}")?;
        }
        Ok(())
    }
}

/// Largest `|Z|`, the default `c₂`.
pub fn default_c2(z: &ZDist) -> f64 {
    z.lower().abs().max(z.upper().abs())
}

/// `(c₁ + c₂)(1 + 2/(P(Z>c₁) − P(|Z|>c₂))) √(c₃ T) + T P(|Z|>c₂) + extra`.
fn minimax_shape(c1: f64, c2: f64, c3: f64, horizon: u64, z: &ZDist, extra: f64) -> Result<BoundReport, BoundError> {
    if !(c2 > c1) {
        return Err(BoundError::Inapplicable(format!("need c2 > c1, got c2={c2}, c1={c1}")));
    }
    let tail_hi = z.tail_prob(c1);
    let tail_abs = z.abs_tail_prob(c2);
    let denom = tail_hi - tail_abs;
    if !(denom > 0.0) {
        return Err(BoundError::Inapplicable(format!(
            "P(Z > c1) - P(|Z| > c2) = {denom} is not positive"
        )));
    }
    let t = horizon as f64;
    let value = (c1 + c2) * (1.0 + 2.0 / denom) * (c3 * t).sqrt() + t * tail_abs + extra;
    Ok(BoundReport {
        value,
        c1,
        c2,
        c3,
        tail_hi,
        tail_abs,
        extra,
        auxiliary: None,
    })
}

/// Gap-free bound for coupled RandUCB on `K`-armed bandits.
pub fn thm1_bound(k: usize, horizon: u64, z: &ZDist, c2: Option<f64>) -> Result<BoundReport, BoundError> {
    if k == 0 {
        return Err(BoundError::InvalidInput("need K >= 1".into()));
    }
    let (kf, t) = (k as f64, horizon as f64);
    let extra = kf + 1.0;
    if horizon == 0 {
        return Ok(zero_horizon(extra));
    }
    let c1 = 1.0 + (kf * t * t).ln().sqrt();
    let c3 = 2.0 * kf * (1.0 + t / kf).ln();
    minimax_shape(c1, c2.unwrap_or_else(|| default_c2(z)), c3, horizon, z, extra)
}

/// Gap-free bound for RandUCB on `d`-dimensional linear bandits.
pub fn thm3_bound(d: usize, horizon: u64, lambda: f64, z: &ZDist, c2: Option<f64>) -> Result<BoundReport, BoundError> {
    if d == 0 || !(lambda > 0.0) {
        return Err(BoundError::InvalidInput("need d >= 1 and lambda > 0".into()));
    }
    if horizon == 0 {
        return Ok(zero_horizon(1.0));
    }
    let c1 = crate::linear::theory_c1(d, horizon, lambda);
    let (df, t) = (d as f64, horizon as f64);
    let c3 = 2.0 * df * (1.0 + t / (df * lambda)).ln();
    minimax_shape(c1, c2.unwrap_or_else(|| default_c2(z)), c3, horizon, z, 1.0)
}

fn zero_horizon(extra: f64) -> BoundReport {
    BoundReport {
        value: extra,
        c1: 0.0,
        c2: 0.0,
        c3: 0.0,
        tail_hi: 0.0,
        tail_abs: 0.0,
        extra,
        auxiliary: None,
    }
}

/// Number of initialization rounds `d + max{(d² ln(T/d) + 2d ln T)/(μ²ρ), d/ρ}`.
pub fn glb_tau(d: usize, horizon: u64, mu: f64, rho: f64) -> f64 {
    let (d, t) = (d as f64, horizon as f64);
    d + ((d * d * (t / d).ln() + 2.0 * d * t.ln()) / (mu * mu * rho)).max(d / rho)
}

/// Gap-free bound for RandUCB on generalized linear bandits.
///
/// `extra` holds `τ` plus the two `1/T` failure probabilities times `T`.
pub fn thm4_bound(
    d: usize,
    horizon: u64,
    mu: f64,
    lipschitz: f64,
    rho: f64,
    z: &ZDist,
    c2: Option<f64>,
) -> Result<BoundReport, BoundError> {
    if d == 0 || horizon < d as u64 || !(mu > 0.0) || !(lipschitz > 0.0) || !(rho > 0.0) {
        return Err(BoundError::InvalidInput(
            "need T >= d >= 1 and positive mu, lipschitz, rho".into(),
        ));
    }
    let (df, t) = (d as f64, horizon as f64);
    let c1 = (df * (t / df).ln() + 2.0 * t.ln()).sqrt() / (2.0 * mu);
    let c2 = c2.unwrap_or_else(|| default_c2(z));
    let c3 = 2.0 * df * (1.0 + t / df).ln();
    if !(c2 > c1) {
        return Err(BoundError::Inapplicable(format!("need c2 > c1, got c2={c2}, c1={c1}")));
    }
    let tail_hi = z.tail_prob(lipschitz.sqrt() * c1);
    let tail_abs = z.abs_tail_prob(c2);
    let denom = tail_hi - tail_abs;
    if !(denom > 0.0) {
        return Err(BoundError::Inapplicable(format!(
            "P(Z > sqrt(L) c1) - P(|Z| > c2) = {denom} is not positive"
        )));
    }
    let extra = glb_tau(d, horizon, mu, rho) + 2.0;
    let value = (c1 + c2 / mu.sqrt()) * (1.0 + 2.0 / denom) * lipschitz * (c3 * t).sqrt() + t * tail_abs + extra;
    Ok(BoundReport {
        value,
        c1,
        c2,
        c3,
        tail_hi,
        tail_abs,
        extra,
        auxiliary: None,
    })
}

/// Instance-dependent bound for uncoupled RandUCB on `K`-armed bandits.
///
/// `auxiliary` holds the cruder form with the ratio sum replaced by
/// `(M − 1)/p_M`.
pub fn thm6_bound(gaps: &[f64], z: &ZDist, horizon: u64, k: usize) -> Result<BoundReport, BoundError> {
    if gaps.len() != k {
        return Err(BoundError::InvalidInput(format!("{} gaps for K = {k}", gaps.len())));
    }
    if gaps.iter().any(|g| !(*g >= 0.0)) || !gaps.contains(&0.0) {
        return Err(BoundError::InvalidInput("gaps must be nonnegative with at least one zero".into()));
    }
    let alphas = z.alphas();
    let probs = z.probs();
    let m = alphas.len();
    if alphas[0] < 0.0 {
        return Err(BoundError::Inapplicable("support must be nonnegative".into()));
    }
    let t = horizon as f64;
    let p_m = probs[m - 1];
    if !(p_m * t > 1.0) {
        return Err(BoundError::Inapplicable(format!("p_M = {p_m} does not exceed 1/T")));
    }
    // suffix[n] = p_{n+1} + ... + p_M (zero-based: probs[n..])
    let mut suffix = vec![0.0; m + 1];
    for n in (0..m).rev() {
        suffix[n] = suffix[n + 1] + probs[n];
    }
    let mut ratio_sum = 0.0;
    let mut prefix = 0.0;
    for n in 0..m - 1 {
        prefix += probs[n];
        ratio_sum += prefix / suffix[n + 1] * (-2.0 * alphas[n] * alphas[n]).exp();
    }
    let a_m = alphas[m - 1];
    let tail = t * (-2.0 * a_m * a_m).exp() + 4.0 + 3.0 * a_m * a_m;
    let gap_sum: f64 = gaps.iter().filter(|&&g| g > 0.0).map(|g| 6.0 / g).sum();
    let kf = k as f64;
    let value = kf + (ratio_sum + tail) * gap_sum;
    let auxiliary = kf + ((m - 1) as f64 / p_m + tail) * gap_sum;
    Ok(BoundReport {
        value,
        c1: 0.0,
        c2: 0.0,
        c3: 0.0,
        tail_hi: 0.0,
        tail_abs: 0.0,
        extra: kf,
        auxiliary: Some(auxiliary),
    })
}

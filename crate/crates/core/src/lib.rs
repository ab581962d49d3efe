//! Randomized upper-confidence-bound exploration for stochastic bandits.
//!
//! The crate is organised by bandit setting:
//!
//! - [`zdist`]: the discrete sampling distribution that replaces the fixed
//!   confidence multiplier of UCB-style algorithms.
//! - [`envs`]: ground-truth environments and the randomized instance generators.
//! - [`mab`]: multi-armed bandit policies (RandUCB and its variants, UCB1,
//!   KL-UCB, Bernoulli/Gaussian/optimistic Thompson sampling, ε-greedy).
//! - [`linear`]: incremental ridge regression and linear bandit policies.
//! - [`glb`]: logistic (generalized linear) bandits: Newton MLE, basis
//!   selection, forced initialization and the GLM policies.
//! - [`bounds`]: closed-form regret-bound evaluators.
//! - [`harness`]: declarative experiments, seeded replication, CSV output and
//!   the command-line front end.
//!
//! Every policy implements [`Policy`], which is all the harness needs to
//! drive it.

pub mod bounds;
pub mod envs;
pub mod glb;
pub mod harness;
pub mod linalg;
pub mod linear;
pub mod mab;
pub mod rng;
pub mod zdist;

use rand::RngCore;

/// A bandit policy over a fixed, finite set of arms.
///
/// `select` and `update` alternate: the harness asks for an arm, pulls it,
/// and reports the realized reward back.
pub trait Policy: Send {
    fn select(&mut self, rng: &mut dyn RngCore) -> usize;

    fn update(&mut self, arm: usize, reward: f64, rng: &mut dyn RngCore);
}

/// Relative slack under which two index values are treated as tied.
///
/// Indices that are algebraically equal but computed through different
/// routes (e.g. a diagonal ridge inverse versus a running mean) can differ in
/// the last few ulps; ties always resolve to the lowest index.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Index of the maximum, resolving ties (within [`TIE_TOLERANCE`]) to the
/// lowest index. Returns 0 for an empty slice.
pub fn argmax(values: &[f64]) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        // +inf (or all -inf): the first value attaining it wins.
        return values.iter().position(|&v| v == best).unwrap_or(0);
    }
    let slack = TIE_TOLERANCE * best.abs().max(1.0);
    values.iter().position(|&v| v >= best - slack).unwrap_or(0)
}

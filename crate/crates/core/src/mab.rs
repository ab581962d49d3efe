//! Multi-armed bandit policies.
//!
//! Index policies share [`MabState`] (pull counts and reward sums). All
//! argmax operations resolve ties to the lowest arm index.

use rand::{Rng, RngCore};
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::zdist::ZDist;
use crate::{argmax, Policy};

/// Pull counts `s_i` and reward sums `Y_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MabState {
    counts: Vec<u64>,
    sums: Vec<f64>,
    pulls: u64,
}

impl MabState {
    pub fn new(k: usize) -> Self {
        Self {
            counts: vec![0; k],
            sums: vec![0.0; k],
            pulls: 0,
        }
    }

    /// State with given counts and sums (the round is `Σ counts + 1`).
    pub fn from_parts(counts: Vec<u64>, sums: Vec<f64>) -> Self {
        assert_eq!(counts.len(), sums.len());
        let pulls = counts.iter().sum();
        Self { counts, sums, pulls }
    }

    pub fn record(&mut self, arm: usize, reward: f64) {
        self.counts[arm] += 1;
        self.sums[arm] += reward;
        self.pulls += 1;
    }

    pub fn num_arms(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    /// Current (1-based) round: one more than the number of recorded pulls.
    pub fn round(&self) -> u64 {
        self.pulls + 1
    }

    /// `Y_i / s_i`, or 0 for an arm never pulled.
    pub fn mean(&self, arm: usize) -> f64 {
        match self.counts[arm] {
            0 => 0.0,
            s => self.sums[arm] / s as f64,
        }
    }

    pub fn first_unpulled(&self) -> Option<usize> {
        self.counts.iter().position(|&s| s == 0)
    }

    pub fn greedy_arm(&self) -> usize {
        let means: Vec<f64> = (0..self.num_arms()).map(|i| self.mean(i)).collect();
        argmax(&means)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coupling {
    /// One `Z_t` shared by all arms.
    #[default]
    Coupled,
    /// An independent `Z_{i,t}` per arm.
    Uncoupled,
}

/// How the RandUCB index is formed from `(s_i, Y_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Bonus {
    /// `Y_i/s_i + Z/√s_i`, after pulling every arm once.
    #[default]
    Standard,
    /// `Y_i/(s_i+1) + Z/√(s_i+1)`: the one-hot ridge (λ = 1) view. No forced
    /// initialization is needed, so this mode never pre-pulls arms.
    PlusOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RandUcbMode {
    pub coupling: Coupling,
    pub bonus: Bonus,
}

fn index_parts(state: &MabState, arm: usize, bonus: Bonus) -> (f64, f64) {
    let s = state.counts[arm] as f64;
    match bonus {
        Bonus::Standard => (state.sums[arm] / s, (1.0 / s).sqrt()),
        Bonus::PlusOne => (state.sums[arm] / (s + 1.0), (1.0 / (s + 1.0)).sqrt()),
    }
}

/// RandUCB arm choice together with the shared `Z_t` that produced it
/// (`None` for forced initialization pulls and for the uncoupled variant).
pub fn randucb_mab_choose_with_z<R: Rng + ?Sized>(
    state: &MabState,
    z: &ZDist,
    mode: RandUcbMode,
    rng: &mut R,
) -> (usize, Option<f64>) {
    if mode.bonus == Bonus::Standard {
        if let Some(arm) = state.first_unpulled() {
            return (arm, None);
        }
    }
    let k = state.num_arms();
    match mode.coupling {
        Coupling::Coupled => {
            let zt = z.sample(rng);
            let values: Vec<f64> = (0..k)
                .map(|i| {
                    let (mean, width) = index_parts(state, i, mode.bonus);
                    mean + zt * width
                })
                .collect();
            (argmax(&values), Some(zt))
        }
        Coupling::Uncoupled => {
            let values: Vec<f64> = (0..k)
                .map(|i| {
                    let (mean, width) = index_parts(state, i, mode.bonus);
                    mean + z.sample(rng) * width
                })
                .collect();
            (argmax(&values), None)
        }
    }
}

pub fn randucb_mab_choose<R: Rng + ?Sized>(state: &MabState, z: &ZDist, mode: RandUcbMode, rng: &mut R) -> usize {
    randucb_mab_choose_with_z(state, z, mode, rng).0
}

/// UCB1 with a fixed width multiplier: `μ̂_i + β √(1/s_i)`.
pub fn ucb1_choose(state: &MabState, beta: f64) -> usize {
    if let Some(arm) = state.first_unpulled() {
        return arm;
    }
    let values: Vec<f64> = (0..state.num_arms())
        .map(|i| {
            let (mean, width) = index_parts(state, i, Bonus::Standard);
            mean + beta * width
        })
        .collect();
    argmax(&values)
}

/// The UCB1 multiplier `√(2 ln T)`.
pub fn ucb1_beta(horizon: u64) -> f64 {
    (2.0 * (horizon as f64).ln()).sqrt()
}

fn xlogx_over(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / q).ln()
    }
}

/// Bernoulli Kullback–Leibler divergence `KL(p, q)`.
pub fn kl_bernoulli(p: f64, q: f64) -> f64 {
    if (p == 0.0 && q == 0.0) || (p == 1.0 && q == 1.0) {
        return 0.0;
    }
    if (q <= 0.0 && p > 0.0) || (q >= 1.0 && p < 1.0) {
        return f64::INFINITY;
    }
    xlogx_over(p, q) + xlogx_over(1.0 - p, 1.0 - q)
}

const KL_BISECTION_STEPS: usize = 60;
const KL_TOLERANCE: f64 = 1e-9;

/// Largest `q ∈ [mean, 1]` with `count · KL(mean, q) ≤ budget`, by bisection.
pub fn klucb_index(mean: f64, count: u64, budget: f64) -> f64 {
    let mean = mean.clamp(0.0, 1.0);
    if budget <= 0.0 || mean >= 1.0 {
        return mean;
    }
    let n = count as f64;
    let (mut lo, mut hi) = (mean, 1.0);
    for _ in 0..KL_BISECTION_STEPS {
        if hi - lo < KL_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if n * kl_bernoulli(mean, mid) <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// KL-UCB with exploration budget `ln t`.
pub fn klucb_choose(state: &MabState, t: u64) -> usize {
    if let Some(arm) = state.first_unpulled() {
        return arm;
    }
    let budget = (t.max(1) as f64).ln();
    let values: Vec<f64> = (0..state.num_arms())
        .map(|i| klucb_index(state.mean(i), state.counts[i], budget))
        .collect();
    argmax(&values)
}

/// Beta posteriors `Beta(1 + S_i, 1 + F_i)` for Bernoulli Thompson sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaPosteriors {
    successes: Vec<f64>,
    failures: Vec<f64>,
}

impl BetaPosteriors {
    pub fn new(k: usize) -> Self {
        Self {
            successes: vec![0.0; k],
            failures: vec![0.0; k],
        }
    }

    pub fn from_counts(successes: Vec<f64>, failures: Vec<f64>) -> Self {
        assert_eq!(successes.len(), failures.len());
        Self { successes, failures }
    }

    pub fn successes(&self) -> &[f64] {
        &self.successes
    }

    pub fn failures(&self) -> &[f64] {
        &self.failures
    }

    /// Rewards in `{0, 1}` update directly; any other `r ∈ [0, 1]` is first
    /// binarized by a `Bernoulli(r)` coin.
    pub fn update<R: Rng + ?Sized>(&mut self, arm: usize, reward: f64, rng: &mut R) {
        let success = if reward == 1.0 {
            true
        } else if reward == 0.0 {
            false
        } else {
            rng.random::<f64>() < reward.clamp(0.0, 1.0)
        };
        if success {
            self.successes[arm] += 1.0;
        } else {
            self.failures[arm] += 1.0;
        }
    }
}

pub fn bernoulli_ts_choose<R: Rng + ?Sized>(posteriors: &BetaPosteriors, rng: &mut R) -> usize {
    let samples: Vec<f64> = posteriors
        .successes
        .iter()
        .zip(&posteriors.failures)
        .map(|(s, f)| Beta::new(1.0 + s, 1.0 + f).expect("positive shape").sample(rng))
        .collect();
    argmax(&samples)
}

/// Gaussian Thompson sampling with posterior `N(μ̂_i, 1/s_i)`.
///
/// The optimistic variant reflects each draw above the mean,
/// `μ̂_i + |g_i|/√s_i`, which is the posterior conditioned on `θ_i ≥ μ̂_i`.
pub fn gaussian_ts_choose<R: Rng + ?Sized>(state: &MabState, optimistic: bool, rng: &mut R) -> usize {
    if let Some(arm) = state.first_unpulled() {
        return arm;
    }
    let samples: Vec<f64> = (0..state.num_arms())
        .map(|i| {
            let g: f64 = rng.sample(StandardNormal);
            let g = if optimistic { g.abs() } else { g };
            let (mean, width) = index_parts(state, i, Bonus::Standard);
            mean + g * width
        })
        .collect();
    argmax(&samples)
}

/// With probability `eps_t` (clamped to `[0, 1]`) a uniform arm, else greedy.
pub fn eps_greedy_choose<R: Rng + ?Sized>(state: &MabState, eps_t: f64, rng: &mut R) -> usize {
    explore_or_exploit(state.num_arms(), eps_t, || state.greedy_arm(), rng)
}

/// Shared ε-greedy step: one uniform decides, a second picks the random arm.
pub fn explore_or_exploit<R, F>(k: usize, eps_t: f64, greedy: F, rng: &mut R) -> usize
where
    R: Rng + ?Sized,
    F: FnOnce() -> usize,
{
    let eps_t = if eps_t.is_nan() { 0.0 } else { eps_t.clamp(0.0, 1.0) };
    if rng.random::<f64>() < eps_t {
        rng.random_range(0..k)
    } else {
        greedy()
    }
}

/// Annealed exploration rate `ε √T / (2 √t)`.
pub fn annealed_eps(eps: f64, horizon: u64, t: u64) -> f64 {
    eps * (horizon as f64).sqrt() / (2.0 * (t.max(1) as f64).sqrt())
}

/// RandUCB for multi-armed bandits.
#[derive(Debug, Clone)]
pub struct RandUcb {
    state: MabState,
    z: ZDist,
    mode: RandUcbMode,
}

impl RandUcb {
    pub fn new(k: usize, z: ZDist, mode: RandUcbMode) -> Self {
        Self {
            state: MabState::new(k),
            z,
            mode,
        }
    }

    pub fn state(&self) -> &MabState {
        &self.state
    }

    pub fn zdist(&self) -> &ZDist {
        &self.z
    }

    pub fn select_with_z(&mut self, rng: &mut dyn RngCore) -> (usize, Option<f64>) {
        randucb_mab_choose_with_z(&self.state, &self.z, self.mode, rng)
    }
}

impl Policy for RandUcb {
    fn select(&mut self, rng: &mut dyn RngCore) -> usize {
        randucb_mab_choose(&self.state, &self.z, self.mode, rng)
    }

    fn update(&mut self, arm: usize, reward: f64, _rng: &mut dyn RngCore) {
        self.state.record(arm, reward);
    }
}

#[derive(Debug, Clone)]
pub struct Ucb1 {
    state: MabState,
    beta: f64,
}

impl Ucb1 {
    pub fn new(k: usize, beta: f64) -> Self {
        Self {
            state: MabState::new(k),
            beta,
        }
    }

    pub fn state(&self) -> &MabState {
        &self.state
    }
}

impl Policy for Ucb1 {
    fn select(&mut self, _rng: &mut dyn RngCore) -> usize {
        ucb1_choose(&self.state, self.beta)
    }

    fn update(&mut self, arm: usize, reward: f64, _rng: &mut dyn RngCore) {
        self.state.record(arm, reward);
    }
}

#[derive(Debug, Clone)]
pub struct KlUcb {
    state: MabState,
}

impl KlUcb {
    pub fn new(k: usize) -> Self {
        Self { state: MabState::new(k) }
    }
}

impl Policy for KlUcb {
    fn select(&mut self, _rng: &mut dyn RngCore) -> usize {
        klucb_choose(&self.state, self.state.round())
    }

    fn update(&mut self, arm: usize, reward: f64, _rng: &mut dyn RngCore) {
        self.state.record(arm, reward);
    }
}

#[derive(Debug, Clone)]
pub struct BernoulliTs {
    posteriors: BetaPosteriors,
}

impl BernoulliTs {
    pub fn new(k: usize) -> Self {
        Self {
            posteriors: BetaPosteriors::new(k),
        }
    }
}

impl Policy for BernoulliTs {
    fn select(&mut self, rng: &mut dyn RngCore) -> usize {
        bernoulli_ts_choose(&self.posteriors, rng)
    }

    fn update(&mut self, arm: usize, reward: f64, rng: &mut dyn RngCore) {
        self.posteriors.update(arm, reward, rng);
    }
}

/// Gaussian Thompson sampling; `optimistic` selects OTS.
#[derive(Debug, Clone)]
pub struct GaussianTs {
    state: MabState,
    optimistic: bool,
}

impl GaussianTs {
    pub fn new(k: usize, optimistic: bool) -> Self {
        Self {
            state: MabState::new(k),
            optimistic,
        }
    }
}

impl Policy for GaussianTs {
    fn select(&mut self, rng: &mut dyn RngCore) -> usize {
        gaussian_ts_choose(&self.state, self.optimistic, rng)
    }

    fn update(&mut self, arm: usize, reward: f64, _rng: &mut dyn RngCore) {
        self.state.record(arm, reward);
    }
}

/// ε-greedy with the annealed rate `ε √T / (2 √t)`.
#[derive(Debug, Clone)]
pub struct EpsGreedy {
    state: MabState,
    eps: f64,
    horizon: u64,
}

impl EpsGreedy {
    pub fn new(k: usize, eps: f64, horizon: u64) -> Self {
        Self {
            state: MabState::new(k),
            eps,
            horizon,
        }
    }
}

impl Policy for EpsGreedy {
    fn select(&mut self, rng: &mut dyn RngCore) -> usize {
        let eps_t = annealed_eps(self.eps, self.horizon, self.state.round());
        eps_greedy_choose(&self.state, eps_t, rng)
    }

    fn update(&mut self, arm: usize, reward: f64, _rng: &mut dyn RngCore) {
        self.state.record(arm, reward);
    }
}

/// Uniformly random arm every round.
#[derive(Debug, Clone)]
pub struct UniformRandom {
    k: usize,
}

impl UniformRandom {
    pub fn new(k: usize) -> Self {
        Self { k }
    }
}

impl Policy for UniformRandom {
    fn select(&mut self, rng: &mut dyn RngCore) -> usize {
        rng.random_range(0..self.k)
    }

    fn update(&mut self, _arm: usize, _reward: f64, _rng: &mut dyn RngCore) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn three_sigma(count: usize, n: usize, p: f64) -> bool {
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        (count as f64 - n as f64 * p).abs() <= 3.0 * sd
    }

    #[test]
    fn first_round_pulls_arm_zero() {
        let state = MabState::new(4);
        let z = ZDist::default_mab(1000);
        let mut rng = seeded(0);
        assert_eq!(randucb_mab_choose(&state, &z, RandUcbMode::default(), &mut rng), 0);
        assert_eq!(ucb1_choose(&state, 1.0), 0);
        assert_eq!(klucb_choose(&state, 1), 0);
        assert_eq!(gaussian_ts_choose(&state, true, &mut rng), 0);
    }

    #[test]
    fn zero_draw_is_greedy() {
        let state = MabState::from_parts(vec![100, 100], vec![90.0, 10.0]);
        let z = ZDist::point(0.0).unwrap();
        let (arm, zt) = randucb_mab_choose_with_z(&state, &z, RandUcbMode::default(), &mut seeded(1));
        assert_eq!((arm, zt), (0, Some(0.0)));
    }

    #[test]
    fn point_distribution_matches_ucb1_index() {
        let state = MabState::from_parts(vec![3, 10, 1], vec![2.0, 7.0, 0.0]);
        for beta in [0.0, 0.3, 1.0, 3.0] {
            let z = ZDist::point(beta).unwrap();
            let arm = randucb_mab_choose(&state, &z, RandUcbMode::default(), &mut seeded(2));
            assert_eq!(arm, ucb1_choose(&state, beta));
        }
    }

    #[test]
    fn ucb1_cases() {
        let state = MabState::from_parts(vec![5, 50], vec![2.0, 30.0]);
        assert_eq!(ucb1_choose(&state, 0.0), 1);
        let equal = MabState::from_parts(vec![40, 4], vec![20.0, 2.0]);
        assert_eq!(ucb1_choose(&equal, 0.5), 1);
        assert_abs_diff_eq!(ucb1_beta(20_000), (2.0 * 20_000f64.ln()).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn plus_one_mode_skips_initialization() {
        let state = MabState::new(3);
        let z = ZDist::point(1.0).unwrap();
        let mode = RandUcbMode {
            coupling: Coupling::Coupled,
            bonus: Bonus::PlusOne,
        };
        let (arm, zt) = randucb_mab_choose_with_z(&state, &z, mode, &mut seeded(0));
        assert_eq!((arm, zt), (0, Some(1.0)));
        let state = MabState::from_parts(vec![1, 0, 0], vec![1.0, 0.0, 0.0]);
        // arm 0: 1/2 + 1/√2 ≈ 1.207 beats 1.0
        assert_eq!(randucb_mab_choose(&state, &z, mode, &mut seeded(0)), 0);
        let state = MabState::from_parts(vec![1, 0, 0], vec![0.0, 0.0, 0.0]);
        assert_eq!(randucb_mab_choose(&state, &z, mode, &mut seeded(0)), 1);
    }

    #[test]
    fn kl_divergence_edges() {
        assert_eq!(kl_bernoulli(0.0, 0.0), 0.0);
        assert_eq!(kl_bernoulli(1.0, 1.0), 0.0);
        assert_eq!(kl_bernoulli(1.0, 0.5), 2f64.ln());
        assert_eq!(kl_bernoulli(0.5, 1.0), f64::INFINITY);
        assert_abs_diff_eq!(kl_bernoulli(0.0, 0.5), 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn klucb_index_cases() {
        assert_eq!(klucb_index(1.0, 10, 3.0), 1.0);
        assert_eq!(klucb_index(0.3, 10, 0.0), 0.3);
        // q* from a scalar root finder on 10·KL(0.5, q) = ln 10
        let q = klucb_index(0.5, 10, 10f64.ln());
        assert_abs_diff_eq!(q, 0.8037444055121866, epsilon = 1e-9);
        // bisection oracle on the monotone map q ↦ KL(0.5, q)
        assert!(10.0 * kl_bernoulli(0.5, q) <= 10f64.ln());
        assert!(10.0 * kl_bernoulli(0.5, q + 2e-9) > 10f64.ln());
    }

    #[test]
    fn klucb_round_one_is_mean() {
        let state = MabState::from_parts(vec![2, 2], vec![1.0, 2.0]);
        assert_eq!(klucb_choose(&state, 1), 1);
    }

    #[test]
    fn bts_uniform_prior_is_fair() {
        let post = BetaPosteriors::new(4);
        let mut rng = seeded(3);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[bernoulli_ts_choose(&post, &mut rng)] += 1;
        }
        for c in counts {
            assert!(three_sigma(c, n, 0.25), "{counts:?}");
        }
    }

    #[test]
    fn bts_concentrated_arm_dominates() {
        let post = BetaPosteriors::from_counts(vec![1e6, 0.0, 0.0], vec![0.0, 0.0, 0.0]);
        let mut rng = seeded(4);
        let n = 10_000;
        let hits = (0..n).filter(|_| bernoulli_ts_choose(&post, &mut rng) == 0).count();
        assert!(hits as f64 / n as f64 > 0.99);
    }

    #[test]
    fn bts_update_increments() {
        let mut post = BetaPosteriors::new(2);
        let mut rng = seeded(5);
        post.update(1, 1.0, &mut rng);
        assert_eq!(post.successes(), &[0.0, 1.0]);
        assert_eq!(post.failures(), &[0.0, 0.0]);
        post.update(1, 0.0, &mut rng);
        assert_eq!(post.failures(), &[0.0, 1.0]);
        post.update(0, 0.4, &mut rng);
        assert_eq!(post.successes()[0] + post.failures()[0], 1.0);
    }

    #[test]
    fn ots_samples_lie_above_mean() {
        // arm 0 is uncertain around 0.5, arm 1 is pinned at 0.4: an optimistic
        // draw for arm 0 is never below 0.5, a plain draw often is.
        let state = MabState::from_parts(vec![1, 1_000_000_000_000], vec![0.5, 0.4e12]);
        let mut rng = seeded(6);
        assert!((0..10_000).all(|_| gaussian_ts_choose(&state, true, &mut rng) == 0));
        let plain = (0..10_000).filter(|_| gaussian_ts_choose(&state, false, &mut rng) == 1).count();
        assert!(plain > 3000, "{plain}");
    }

    #[test]
    fn gts_concentrates_on_greedy() {
        let state = MabState::from_parts(vec![1_000_000_000, 1_000_000_000], vec![0.6e9, 0.5e9]);
        let mut rng = seeded(8);
        let n = 10_000;
        let hits = (0..n).filter(|_| gaussian_ts_choose(&state, false, &mut rng) == 0).count();
        assert!(hits as f64 / n as f64 > 0.999);
    }

    #[test]
    fn gts_identical_arms_split_evenly() {
        let state = MabState::from_parts(vec![10, 10], vec![5.0, 5.0]);
        let mut rng = seeded(9);
        let n = 100_000;
        let zeros = (0..n).filter(|_| gaussian_ts_choose(&state, false, &mut rng) == 0).count();
        assert!(three_sigma(zeros, n, 0.5), "{zeros}");
    }

    #[test]
    fn eps_greedy_extremes() {
        let state = MabState::from_parts(vec![5, 5, 5], vec![1.0, 4.0, 2.0]);
        let mut rng = seeded(10);
        assert!((0..1000).all(|_| eps_greedy_choose(&state, 0.0, &mut rng) == 1));
        assert!((0..1000).all(|_| eps_greedy_choose(&state, -3.0, &mut rng) == 1));
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[eps_greedy_choose(&state, 1.0, &mut rng)] += 1;
        }
        for c in counts {
            assert!(three_sigma(c, n, 1.0 / 3.0), "{counts:?}");
        }
        assert_abs_diff_eq!(annealed_eps(0.05, 20_000, 20_000), 0.025, epsilon = 1e-15);
    }

    #[test]
    fn forced_initialization_covers_all_arms() {
        let k = 6;
        let z = ZDist::default_mab(100);
        let mut policies: Vec<Box<dyn Policy>> = vec![
            Box::new(RandUcb::new(k, z.clone(), RandUcbMode::default())),
            Box::new(RandUcb::new(
                k,
                z,
                RandUcbMode {
                    coupling: Coupling::Uncoupled,
                    bonus: Bonus::Standard,
                },
            )),
            Box::new(Ucb1::new(k, 1.0)),
            Box::new(KlUcb::new(k)),
            Box::new(GaussianTs::new(k, false)),
            Box::new(GaussianTs::new(k, true)),
        ];
        let mut rng = seeded(11);
        for p in policies.iter_mut() {
            let mut seen = vec![false; k];
            for _ in 0..k {
                let arm = p.select(&mut rng);
                seen[arm] = true;
                p.update(arm, 0.5, &mut rng);
            }
            assert!(seen.iter().all(|s| *s));
        }
    }

    fn arb_state() -> impl Strategy<Value = MabState> {
        prop::collection::vec((1u64..200, 0.0f64..1.0), 2..12).prop_map(|arms| {
            let counts = arms.iter().map(|(s, _)| *s).collect();
            let sums = arms.iter().map(|(s, m)| *s as f64 * m).collect();
            MabState::from_parts(counts, sums)
        })
    }

    fn shifted(state: &MabState, c: f64) -> MabState {
        let sums = state
            .sums()
            .iter()
            .zip(state.counts())
            .map(|(y, s)| y + c * *s as f64)
            .collect();
        MabState::from_parts(state.counts().to_vec(), sums)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn argmax_is_shift_invariant(state in arb_state(), c in -0.5f64..0.5, seed in 0u64..1000) {
            let moved = shifted(&state, c);
            let z = ZDist::default_mab(5000);
            for coupling in [Coupling::Coupled, Coupling::Uncoupled] {
                let mode = RandUcbMode { coupling, bonus: Bonus::Standard };
                prop_assert_eq!(
                    randucb_mab_choose(&state, &z, mode, &mut seeded(seed)),
                    randucb_mab_choose(&moved, &z, mode, &mut seeded(seed))
                );
            }
            prop_assert_eq!(ucb1_choose(&state, 1.3), ucb1_choose(&moved, 1.3));
            for optimistic in [false, true] {
                prop_assert_eq!(
                    gaussian_ts_choose(&state, optimistic, &mut seeded(seed)),
                    gaussian_ts_choose(&moved, optimistic, &mut seeded(seed))
                );
            }
            prop_assert_eq!(
                eps_greedy_choose(&state, 0.3, &mut seeded(seed)),
                eps_greedy_choose(&moved, 0.3, &mut seeded(seed))
            );
        }
    }
}

//! Generalized linear bandits with a logistic (or identity) link.
//!
//! The maximum-likelihood estimate is found by damped Newton iterations on
//! per-arm aggregates: since arms have fixed features, `(pulls, reward sum)`
//! per arm is a sufficient statistic for the likelihood.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::envs::Link;
use crate::linalg::{self, Matrix, Vector};
use crate::zdist::ZDist;
use crate::{argmax, Policy};

pub const GRAD_TOL: f64 = 1e-8;
pub const MAX_NEWTON_ITERS: usize = 100;
/// Newton iterations per round once initialization is over.
pub const WARM_NEWTON_ITERS: usize = 5;
pub const MAX_HALVINGS: usize = 20;
pub const DEFAULT_TAU0_CAP: u64 = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GlbError {
    #[error("features do not span R^{0}")]
    RankDeficient(usize),
    #[error("Hessian is singular")]
    SingularHessian,
    #[error("Newton iterations did not converge (gradient norm {0})")]
    NotConverged(f64),
    #[error("non-finite value in the likelihood")]
    NonFinite,
    #[error("need at least one arm")]
    NoArms,
    #[error("invalid {what}: {value}")]
    BadParameter { what: &'static str, value: String },
}

/// Link function with its derivative bounds `μ ≤ g′ ≤ 𝓛`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSpec {
    pub kind: Link,
    pub lipschitz: f64,
    pub mu_floor: f64,
}

impl LinkSpec {
    /// Logistic link with `μ = g′(2)`, valid for `|⟨x, θ⟩| ≤ 2`.
    pub fn logistic() -> Self {
        Self {
            kind: Link::Logistic,
            lipschitz: 0.25,
            mu_floor: Link::Logistic.derivative(2.0),
        }
    }

    pub fn identity() -> Self {
        Self {
            kind: Link::Identity,
            lipschitz: 1.0,
            mu_floor: 1.0,
        }
    }

    pub fn for_link(kind: Link) -> Self {
        match kind {
            Link::Logistic => Self::logistic(),
            Link::Identity => Self::identity(),
        }
    }

    pub fn with_mu(self, mu_floor: f64) -> Self {
        Self { mu_floor, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub x: Vector,
    pub y: f64,
}

/// Result of a Newton solve.
#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub theta: Vector,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Log-likelihood before the first and after each accepted step.
    pub loglik_trace: Vec<f64>,
}

/// Rows of the likelihood: feature, number of observations, sum of labels.
#[derive(Debug, Clone, Copy)]
struct Row<'a> {
    x: &'a Vector,
    n: f64,
    s: f64,
}

fn loglik(link: Link, rows: &[Row], theta: &Vector) -> f64 {
    rows.iter()
        .map(|r| {
            let u = r.x.dot(theta);
            r.s * u - r.n * link.log_partition(u)
        })
        .sum()
}

fn gradient(link: Link, rows: &[Row], theta: &Vector) -> Vector {
    let mut g = Vector::zeros(theta.len());
    for r in rows {
        let u = r.x.dot(theta);
        g.axpy(r.s - r.n * link.mean(u), r.x, 1.0);
    }
    g
}

fn hessian(link: Link, rows: &[Row], theta: &Vector) -> Matrix {
    let d = theta.len();
    let mut h = Matrix::zeros(d, d);
    for r in rows {
        let w = r.n * link.derivative(r.x.dot(theta));
        h.ger(w, r.x, r.x, 1.0);
    }
    h
}

/// Changes this small are below the resolution of the summed likelihood.
fn loglik_slack(ll: f64) -> f64 {
    1e-13 * ll.abs().max(1.0)
}

fn newton(link: Link, rows: &[Row], warm: &Vector, max_iter: usize) -> Result<MleFit, GlbError> {
    let mut theta = warm.clone();
    let mut ll = loglik(link, rows, &theta);
    if !ll.is_finite() {
        return Err(GlbError::NonFinite);
    }
    let mut trace = vec![ll];
    let mut grad = gradient(link, rows, &theta);
    let mut iterations = 0;
    while grad.norm() > GRAD_TOL && iterations < max_iter {
        let h = hessian(link, rows, &theta);
        let step = linalg::cholesky(&h).ok_or(GlbError::SingularHessian)?.solve(&grad);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate = &theta + &step * scale;
            let cand_ll = loglik(link, rows, &candidate);
            if cand_ll.is_finite() && cand_ll >= ll - loglik_slack(ll) {
                accepted = Some((candidate, cand_ll));
                break;
            }
            scale *= 0.5;
        }
        iterations += 1;
        let Some((candidate, cand_ll)) = accepted else {
            break;
        };
        theta = candidate;
        ll = cand_ll;
        trace.push(ll);
        grad = gradient(link, rows, &theta);
    }
    let grad_norm = grad.norm();
    Ok(MleFit {
        theta,
        converged: grad_norm <= GRAD_TOL,
        iterations,
        grad_norm,
        loglik_trace: trace,
    })
}

fn observation_rows(history: &[Observation]) -> Vec<Row<'_>> {
    history
        .iter()
        .map(|o| Row {
            x: &o.x,
            n: 1.0,
            s: o.y,
        })
        .collect()
}

/// Damped Newton solve of `max_θ Σ [y⟨x, θ⟩ − b(⟨x, θ⟩)]` with full diagnostics.
pub fn mle_fit(link: Link, history: &[Observation], warm_start: &Vector, max_iter: usize) -> Result<MleFit, GlbError> {
    newton(link, &observation_rows(history), warm_start, max_iter)
}

/// Logistic maximum-likelihood estimate; errors if the solve does not converge.
pub fn logistic_mle(history: &[Observation], warm_start: &Vector) -> Result<Vector, GlbError> {
    let fit = mle_fit(Link::Logistic, history, warm_start, MAX_NEWTON_ITERS)?;
    if fit.converged {
        Ok(fit.theta)
    } else {
        Err(GlbError::NotConverged(fit.grad_norm))
    }
}

pub fn log_likelihood(link: Link, history: &[Observation], theta: &Vector) -> f64 {
    loglik(link, &observation_rows(history), theta)
}

pub fn log_likelihood_gradient(link: Link, history: &[Observation], theta: &Vector) -> Vector {
    gradient(link, &observation_rows(history), theta)
}

/// `H(θ) = Σ g′(⟨x, θ⟩) x xᵀ`; zero for an empty history.
pub fn compute_hessian(link: Link, history: &[Observation], theta: &Vector) -> Matrix {
    hessian(link, &observation_rows(history), theta)
}

/// Greedy maximum-determinant choice of `d` spanning arms.
///
/// Each step takes the arm with the largest component orthogonal to the
/// arms already chosen (lowest index on ties). Returns the indices and the
/// smallest eigenvalue `ρ` of `Σ v vᵀ`.
pub fn select_basis(features: &[Vector]) -> Result<(Vec<usize>, f64), GlbError> {
    let d = features.first().ok_or(GlbError::NoArms)?.len();
    let scale = features.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let mut residuals: Vec<Vector> = features.to_vec();
    let mut chosen = Vec::with_capacity(d);
    for _ in 0..d {
        let norms: Vec<f64> = residuals.iter().map(|r| r.norm()).collect();
        let best = argmax(&norms);
        if norms[best] <= 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(GlbError::RankDeficient(d));
        }
        chosen.push(best);
        let q = &residuals[best] / norms[best];
        for r in residuals.iter_mut() {
            let c = r.dot(&q);
            r.axpy(-c, &q, 1.0);
        }
    }
    let mut gram = Matrix::zeros(d, d);
    for &i in &chosen {
        gram += linalg::outer(&features[i]);
    }
    let rho = linalg::min_eigenvalue(&gram);
    if rho <= 0.0 {
        return Err(GlbError::RankDeficient(d));
    }
    Ok((chosen, rho))
}

/// Forced pulls: the basis repeated `tau0` times, then once more.
pub fn init_phase(basis: &[usize], tau0: u64) -> Vec<usize> {
    (0..=tau0).flat_map(|_| basis.iter().copied()).collect()
}

/// How many times each basis arm is pulled before the final sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tau0Mode {
    /// `max{(d ln(T/d) + 2 ln T)/(μ²ρ), 1/ρ}`, rounded up.
    Theory,
    /// `ceil(d ln T / (100 μ² ρ))`, at most `cap`.
    Capped { cap: u64 },
}

impl Default for Tau0Mode {
    fn default() -> Self {
        Tau0Mode::Capped { cap: DEFAULT_TAU0_CAP }
    }
}

impl FromStr for Tau0Mode {
    type Err = GlbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "theory" => Ok(Tau0Mode::Theory),
            "capped" => Ok(Tau0Mode::default()),
            other => Err(GlbError::BadParameter {
                what: "tau0_mode",
                value: other.to_string(),
            }),
        }
    }
}

impl fmt::Display for Tau0Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tau0Mode::Theory => write!(f, "theory"),
            Tau0Mode::Capped { .. } => write!(f, "capped"),
        }
    }
}

pub fn tau0_theory(d: usize, horizon: u64, mu: f64, rho: f64) -> u64 {
    let (d, t) = (d as f64, horizon as f64);
    let v = ((d * (t / d).ln() + 2.0 * t.ln()) / (mu * mu * rho)).max(1.0 / rho);
    v.ceil().max(0.0) as u64
}

pub fn tau0_capped(d: usize, horizon: u64, mu: f64, rho: f64, cap: u64) -> u64 {
    let v = (d as f64 * (horizon as f64).ln() / (mu * mu * rho * 100.0)).ceil();
    (v.max(0.0) as u64).min(cap)
}

impl Tau0Mode {
    pub fn tau0(self, d: usize, horizon: u64, mu: f64, rho: f64) -> u64 {
        match self {
            Tau0Mode::Theory => tau0_theory(d, horizon, mu, rho),
            Tau0Mode::Capped { cap } => tau0_capped(d, horizon, mu, rho, cap),
        }
    }
}

/// Exploration constant `(1/μ) √((d/2) ln(1 + 2T/d) + ln T)` of UCB-GLM.
pub fn ucbglm_width(d: usize, horizon: u64, mu: f64) -> f64 {
    let (d, t) = (d as f64, horizon as f64);
    ((d / 2.0) * (1.0 + 2.0 * t / d).ln() + t.ln()).sqrt() / mu
}

/// The default sampling distribution stretched to `[0, U]` with `U` from
/// [`ucbglm_width`].
pub fn default_zdist(d: usize, horizon: u64, mu: f64) -> ZDist {
    ZDist::default_shape(horizon, ucbglm_width(d, horizon, mu))
}

/// Per-run state of a generalized linear bandit policy.
#[derive(Debug, Clone)]
pub struct GlbState {
    features: Arc<[Vector]>,
    link: LinkSpec,
    counts: Vec<f64>,
    sums: Vec<f64>,
    theta_hat: Vector,
    gram: Matrix,
    gram_inv: Option<Matrix>,
    schedule: Vec<usize>,
    rho: f64,
    t: u64,
    initialized: bool,
    last_fit_converged: bool,
}

impl GlbState {
    pub fn new(features: Arc<[Vector]>, link: LinkSpec, tau0_mode: Tau0Mode, horizon: u64) -> Result<Self, GlbError> {
        let (basis, rho) = select_basis(&features)?;
        let d = features[0].len();
        let tau0 = tau0_mode.tau0(d, horizon, link.mu_floor, rho);
        Ok(Self::with_schedule(features, link, init_phase(&basis, tau0), rho))
    }

    pub fn with_schedule(features: Arc<[Vector]>, link: LinkSpec, schedule: Vec<usize>, rho: f64) -> Self {
        let k = features.len();
        let d = features.first().map_or(0, |x| x.len());
        Self {
            features,
            link,
            counts: vec![0.0; k],
            sums: vec![0.0; k],
            theta_hat: Vector::zeros(d),
            gram: Matrix::zeros(d, d),
            gram_inv: None,
            schedule,
            rho,
            t: 0,
            initialized: false,
            last_fit_converged: false,
        }
    }

    pub fn features(&self) -> &[Vector] {
        &self.features
    }

    pub fn link(&self) -> LinkSpec {
        self.link
    }

    pub fn theta_hat(&self) -> &Vector {
        &self.theta_hat
    }

    /// Unregularized `M_t = Σ X Xᵀ`.
    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn schedule(&self) -> &[usize] {
        &self.schedule
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Observations so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn initialized(&self) -> bool {
        self.initialized
    }

    pub fn last_fit_converged(&self) -> bool {
        self.last_fit_converged
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    /// The next forced pull while initialization is in progress.
    pub fn forced_arm(&self) -> Option<usize> {
        self.schedule.get(self.t as usize).copied()
    }

    fn rows(&self) -> Vec<Row<'_>> {
        self.features
            .iter()
            .zip(self.counts.iter().zip(&self.sums))
            .filter(|(_, (&n, _))| n > 0.0)
            .map(|(x, (&n, &s))| Row { x, n, s })
            .collect()
    }

    /// `H_t = Σ g′(⟨X, θ̂⟩) X Xᵀ`.
    pub fn hessian(&self) -> Matrix {
        hessian(self.link.kind, &self.rows(), &self.theta_hat)
    }

    pub fn log_likelihood_gradient(&self) -> Vector {
        gradient(self.link.kind, &self.rows(), &self.theta_hat)
    }

    /// `‖x‖_{M_t⁻¹}`; infinite before `M_t` is invertible.
    pub fn norm_minv(&self, x: &Vector) -> f64 {
        match &self.gram_inv {
            Some(inv) => linalg::quad_norm(inv, x),
            None => f64::INFINITY,
        }
    }

    /// Records `(arm, y)` and refits once initialization is complete.
    ///
    /// A warm-started iterate that improves the likelihood is kept even if it
    /// has not met the gradient tolerance; a failed solve keeps the previous
    /// estimate.
    pub fn update(&mut self, arm: usize, y: f64) {
        assert!(y.is_finite(), "non-finite reward");
        let x = &self.features[arm];
        self.counts[arm] += 1.0;
        self.sums[arm] += y;
        self.gram.ger(1.0, x, x, 1.0);
        self.t += 1;
        let max_iter = if self.initialized {
            WARM_NEWTON_ITERS
        } else if self.t as usize >= self.schedule.len() {
            self.initialized = true;
            MAX_NEWTON_ITERS
        } else {
            return;
        };
        self.gram_inv = linalg::inverse_and_logdet(&self.gram).map(|(inv, _)| inv);
        match newton(self.link.kind, &self.rows(), &self.theta_hat, max_iter) {
            Ok(fit) => {
                self.last_fit_converged = fit.converged;
                self.theta_hat = fit.theta;
            }
            Err(_) => self.last_fit_converged = false,
        }
    }
}

fn index_values(state: &GlbState, width: f64) -> Vec<f64> {
    state
        .features()
        .iter()
        .map(|x| x.dot(state.theta_hat()) + width * state.norm_minv(x))
        .collect()
}

/// RandUCBLog: `argmax ⟨θ̂, x⟩ + Z ‖x‖_{M_t⁻¹}`.
pub fn randucblog_choose<R: Rng + ?Sized>(state: &GlbState, z: &ZDist, rng: &mut R) -> usize {
    let zt = z.sample(rng);
    argmax(&index_values(state, zt))
}

pub fn ucbglm_choose(state: &GlbState, beta: f64) -> usize {
    argmax(&index_values(state, beta))
}

/// GLM-TS: `θ̃ ~ N(θ̂, scale² H_t⁻¹)`, then `argmax ⟨θ̃, x⟩`.
pub fn glmts_choose<R: Rng + ?Sized>(state: &GlbState, scale: f64, rng: &mut R) -> usize {
    let theta = if scale == 0.0 {
        state.theta_hat().clone()
    } else {
        match linalg::inverse_and_logdet(&state.hessian()).and_then(|(inv, _)| linalg::cholesky(&inv)) {
            Some(chol) => linalg::gaussian_sample(state.theta_hat(), &chol.l(), scale, rng),
            None => state.theta_hat().clone(),
        }
    };
    let values: Vec<f64> = state.features().iter().map(|x| x.dot(&theta)).collect();
    argmax(&values)
}

#[derive(Debug, Clone)]
pub struct RandUcbLog {
    state: GlbState,
    z: ZDist,
}

impl RandUcbLog {
    pub fn new(state: GlbState, z: ZDist) -> Self {
        Self { state, z }
    }

    pub fn state(&self) -> &GlbState {
        &self.state
    }
}

impl Policy for RandUcbLog {
    fn select(&mut self, rng: &mut dyn RngCore) -> usize {
        match self.state.forced_arm() {
            Some(arm) => arm,
            None => randucblog_choose(&self.state, &self.z, rng),
        }
    }

    fn update(&mut self, arm: usize, reward: f64, _rng: &mut dyn RngCore) {
        self.state.update(arm, reward);
    }
}

#[derive(Debug, Clone)]
pub struct UcbGlm {
    state: GlbState,
    beta: f64,
}

impl UcbGlm {
    pub fn new(state: GlbState, beta: f64) -> Self {
        Self { state, beta }
    }

    pub fn state(&self) -> &GlbState {
        &self.state
    }
}

impl Policy for UcbGlm {
    fn select(&mut self, _rng: &mut dyn RngCore) -> usize {
        match self.state.forced_arm() {
            Some(arm) => arm,
            None => ucbglm_choose(&self.state, self.beta),
        }
    }

    fn update(&mut self, arm: usize, reward: f64, _rng: &mut dyn RngCore) {
        self.state.update(arm, reward);
    }
}

#[derive(Debug, Clone)]
pub struct GlmTs {
    state: GlbState,
    scale: f64,
}

impl GlmTs {
    pub fn new(state: GlbState, scale: f64) -> Self {
        Self { state, scale }
    }

    pub fn state(&self) -> &GlbState {
        &self.state
    }
}

impl Policy for GlmTs {
    fn select(&mut self, rng: &mut dyn RngCore) -> usize {
        match self.state.forced_arm() {
            Some(arm) => arm,
            None => glmts_choose(&self.state, self.scale, rng),
        }
    }

    fn update(&mut self, arm: usize, reward: f64, _rng: &mut dyn RngCore) {
        self.state.update(arm, reward);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{gen_structured, sigmoid, Environment};
    use crate::rng::seeded;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};
    use rand::SeedableRng;

    fn unit(d: usize, i: usize) -> Vector {
        let mut v = Vector::zeros(d);
        v[i] = 1.0;
        v
    }

    fn random_ball<R: Rng>(d: usize, rng: &mut R) -> Vector {
        let g = linalg::standard_normal_vector(d, rng);
        g.normalize() * rng.random::<f64>()
    }

    fn random_dataset<R: Rng>(n: usize, d: usize, rng: &mut R) -> Vec<Observation> {
        let theta = random_ball(d, rng) * 2.0;
        (0..n)
            .map(|_| {
                let x = random_ball(d, rng);
                let p = sigmoid(x.dot(&theta));
                let y = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
                Observation { x, y }
            })
            .collect()
    }

    fn min_eig(a: &Matrix) -> f64 {
        linalg::min_eigenvalue(a)
    }

    #[test]
    fn g_prime_two() {
        assert_abs_diff_eq!(LinkSpec::logistic().mu_floor, 0.10499358540350662, epsilon = 1e-15);
        assert_eq!(LinkSpec::logistic().lipschitz, 0.25);
    }

    #[test]
    fn balanced_labels_give_zero_predictor() {
        let x = Vector::from_row_slice(&[0.8]);
        let history: Vec<Observation> = (0..5)
            .flat_map(|_| [Observation { x: x.clone(), y: 1.0 }, Observation { x: x.clone(), y: 0.0 }])
            .collect();
        let theta = logistic_mle(&history, &Vector::from_row_slice(&[1.5])).unwrap();
        assert_abs_diff_eq!(x.dot(&theta), 0.0, epsilon = 1e-9);
        assert!(log_likelihood_gradient(Link::Logistic, &history, &theta).norm() <= 1e-8);

        let xs = [Vector::from_row_slice(&[0.6, 0.2]), Vector::from_row_slice(&[-0.1, 0.9])];
        let history: Vec<Observation> = xs
            .iter()
            .flat_map(|x| [Observation { x: x.clone(), y: 1.0 }, Observation { x: x.clone(), y: 0.0 }])
            .collect();
        let theta = logistic_mle(&history, &Vector::from_row_slice(&[0.5, -0.5])).unwrap();
        for x in &xs {
            assert_abs_diff_eq!(x.dot(&theta), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn half_labels_give_zero() {
        let history: Vec<Observation> = (0..3).map(|i| Observation { x: unit(3, i), y: 0.5 }).collect();
        let theta = logistic_mle(&history, &Vector::zeros(3)).unwrap();
        assert_eq!(theta, Vector::zeros(3));
        let theta = logistic_mle(&history, &Vector::from_row_slice(&[1.0, -1.0, 0.5])).unwrap();
        assert!(theta.amax() <= 1e-9);
    }

    #[test]
    fn random_mle_is_a_local_maximum() {
        let mut rng = seeded(11);
        for _ in 0..10 {
            let history = random_dataset(200, 3, &mut rng);
            let theta = logistic_mle(&history, &Vector::zeros(3)).unwrap();
            assert!(log_likelihood_gradient(Link::Logistic, &history, &theta).norm() <= 1e-6);
            let best = log_likelihood(Link::Logistic, &history, &theta);
            for _ in 0..20 {
                let dir = linalg::standard_normal_vector(3, &mut rng).normalize() * 1e-3;
                assert!(best >= log_likelihood(Link::Logistic, &history, &(&theta + dir)));
            }
        }
    }

    #[test]
    fn newton_steps_never_decrease_likelihood() {
        let mut rng = seeded(12);
        for _ in 0..20 {
            let history = random_dataset(60, 4, &mut rng);
            let warm = linalg::standard_normal_vector(4, &mut rng) * 3.0;
            let fit = mle_fit(Link::Logistic, &history, &warm, MAX_NEWTON_ITERS).unwrap();
            for w in fit.loglik_trace.windows(2) {
                assert!(w[1] >= w[0] - loglik_slack(w[0]));
            }
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = seeded(13);
        for _ in 0..20 {
            let history = random_dataset(40, 3, &mut rng);
            let theta = linalg::standard_normal_vector(3, &mut rng);
            let g = log_likelihood_gradient(Link::Logistic, &history, &theta);
            let h = 1e-5;
            for j in 0..3 {
                let mut plus = theta.clone();
                let mut minus = theta.clone();
                plus[j] += h;
                minus[j] -= h;
                let fd = (log_likelihood(Link::Logistic, &history, &plus) - log_likelihood(Link::Logistic, &history, &minus))
                    / (2.0 * h);
                assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1.0), "{fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn identity_link_mle_is_least_squares() {
        let mut rng = seeded(14);
        let history = random_dataset(50, 3, &mut rng);
        let fit = mle_fit(Link::Identity, &history, &Vector::zeros(3), MAX_NEWTON_ITERS).unwrap();
        let mut gram = Matrix::zeros(3, 3);
        let mut b = Vector::zeros(3);
        for o in &history {
            gram += linalg::outer(&o.x);
            b += &o.x * o.y;
        }
        let ls = gram.lu().solve(&b).unwrap();
        assert!((fit.theta - ls).amax() <= 1e-9);
        assert!(fit.iterations <= 2);
    }

    #[test]
    fn hessian_at_zero_and_empty() {
        let mut rng = seeded(15);
        let history = random_dataset(30, 4, &mut rng);
        let h = compute_hessian(Link::Logistic, &history, &Vector::zeros(4));
        let m = history.iter().fold(Matrix::zeros(4, 4), |acc, o| acc + linalg::outer(&o.x));
        assert!(linalg::max_abs_diff(&h, &(m * 0.25)) <= 1e-14);
        assert_eq!(compute_hessian(Link::Logistic, &[], &Vector::zeros(4)), Matrix::zeros(4, 4));
    }

    #[test]
    fn hessian_is_sandwiched_by_gram() {
        let mut rng = seeded(16);
        let spec = LinkSpec::logistic();
        for _ in 0..20 {
            let history = random_dataset(30, 4, &mut rng);
            let theta = random_ball(4, &mut rng) * 2.0;
            let h = compute_hessian(Link::Logistic, &history, &theta);
            let m = history.iter().fold(Matrix::zeros(4, 4), |acc, o| acc + linalg::outer(&o.x));
            assert!(min_eig(&(&h - &m * spec.mu_floor)) >= -1e-12);
            assert!(min_eig(&(&m * spec.lipschitz - &h)) >= -1e-12);
        }
    }

    #[test]
    fn basis_of_one_hot_features() {
        let features: Vec<Vector> = (0..4).map(|i| unit(4, i)).collect();
        let (basis, rho) = select_basis(&features).unwrap();
        let mut sorted = basis.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
        assert_abs_diff_eq!(rho, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn basis_skips_duplicates() {
        let mut rng = seeded(17);
        let base: Vec<Vector> = (0..3).map(|_| random_ball(3, &mut rng)).collect();
        let features: Vec<Vector> = base.iter().chain(base.iter()).cloned().collect();
        let (basis, rho) = select_basis(&features).unwrap();
        let rows: Vec<&Vector> = basis.iter().map(|&i| &features[i]).collect();
        for i in 0..3 {
            for j in i + 1..3 {
                assert_ne!(rows[i], rows[j]);
            }
        }
        assert!(rho > 0.0);
    }

    #[test]
    fn basis_rejects_rank_deficiency() {
        let features = vec![unit(3, 0), unit(3, 1), unit(3, 0) * 0.5];
        assert_eq!(select_basis(&features), Err(GlbError::RankDeficient(3)));
    }

    #[test]
    fn basis_rho_matches_eigenvalue() {
        let mut rng = seeded(18);
        let inst = gen_structured(50, 5, Link::Logistic, &mut rng).unwrap();
        let (basis, rho) = select_basis(inst.features()).unwrap();
        assert_eq!(basis.len(), 5);
        let gram = basis
            .iter()
            .fold(Matrix::zeros(5, 5), |acc, &i| acc + linalg::outer(&inst.features()[i]));
        let direct = nalgebra::SymmetricEigen::new(gram).eigenvalues.min();
        assert_abs_diff_eq!(rho, direct, epsilon = 1e-10);
    }

    #[test]
    fn init_schedule_shape_and_gram() {
        assert_eq!(init_phase(&[2, 0, 1], 1), vec![2, 0, 1, 2, 0, 1]);
        let mut rng = seeded(19);
        let inst = gen_structured(30, 4, Link::Logistic, &mut rng).unwrap();
        let features: Arc<[Vector]> = inst.features().to_vec().into();
        let (basis, rho) = select_basis(&features).unwrap();
        let tau0 = 3;
        let schedule = init_phase(&basis, tau0);
        assert_eq!(schedule.len(), 4 * (tau0 as usize + 1));
        let mut state = GlbState::with_schedule(features.clone(), LinkSpec::logistic(), schedule, rho);
        while let Some(arm) = state.forced_arm() {
            assert!(!state.initialized());
            state.update(arm, inst.pull(arm, &mut rng));
        }
        assert!(state.initialized());
        assert!(min_eig(state.gram()) >= (tau0 + 1) as f64 * rho - 1e-10);
        assert!(linalg::cholesky(&state.hessian()).is_some());
    }

    #[test]
    fn norms_bounded_after_long_init() {
        let mut rng = seeded(20);
        let inst = gen_structured(30, 3, Link::Logistic, &mut rng).unwrap();
        let features: Arc<[Vector]> = inst.features().to_vec().into();
        let (basis, rho) = select_basis(&features).unwrap();
        let tau0 = (1.0 / rho).ceil() as u64;
        let mut state = GlbState::with_schedule(features.clone(), LinkSpec::logistic(), init_phase(&basis, tau0), rho);
        while let Some(arm) = state.forced_arm() {
            state.update(arm, inst.pull(arm, &mut rng));
        }
        for x in features.iter() {
            assert!(state.norm_minv(x) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn theory_tau_matches_formula() {
        let (d, t, mu) = (5usize, 5000u64, 0.105);
        let mut rng = seeded(21);
        let inst = gen_structured(50, d, Link::Logistic, &mut rng).unwrap();
        let (basis, rho) = select_basis(inst.features()).unwrap();
        let tau0 = Tau0Mode::Theory.tau0(d, t, mu, rho);
        let rounds = init_phase(&basis, tau0).len() as f64;
        let (df, tf) = (d as f64, t as f64);
        let tau = df + ((df * df * (tf / df).ln() + 2.0 * df * tf.ln()) / (mu * mu * rho)).max(df / rho);
        assert!(rounds >= tau - 1e-9 && rounds < tau + df, "{rounds} vs {tau}");
    }

    #[test]
    fn capped_tau0() {
        assert_eq!(tau0_capped(5, 5000, 0.105, 1e-3, 50), 50);
        let expected = (5.0 * 5000f64.ln() / (0.105 * 0.105 * 100.0)).ceil() as u64;
        assert_eq!(tau0_capped(5, 5000, 0.105, 1.0, 50), expected);
        assert_eq!(Tau0Mode::default(), Tau0Mode::Capped { cap: 50 });
    }

    #[test]
    fn ucbglm_width_value() {
        assert_abs_diff_eq!(ucbglm_width(5, 5000, 0.105), 49.96207089988859, epsilon = 1e-10);
    }

    fn initialized_state(seed: u64) -> (GlbState, crate::envs::StructuredInstance, crate::rng::Stream) {
        let mut rng = seeded(seed);
        let inst = gen_structured(20, 3, Link::Logistic, &mut rng).unwrap();
        let features: Arc<[Vector]> = inst.features().to_vec().into();
        let mut state = GlbState::new(features, LinkSpec::logistic(), Tau0Mode::Capped { cap: 5 }, 1000).unwrap();
        while let Some(arm) = state.forced_arm() {
            state.update(arm, inst.pull(arm, &mut rng));
        }
        (state, inst, rng)
    }

    #[test]
    fn point_zdist_matches_ucbglm() {
        let (mut state, inst, mut rng) = initialized_state(22);
        for _ in 0..50 {
            for beta in [0.0, 0.3, 5.0] {
                let z = ZDist::point(beta).unwrap();
                assert_eq!(randucblog_choose(&state, &z, &mut rng), ucbglm_choose(&state, beta));
            }
            let arm = ucbglm_choose(&state, 1.0);
            state.update(arm, inst.pull(arm, &mut rng));
        }
    }

    #[test]
    fn zero_width_is_greedy() {
        let (state, _, mut rng) = initialized_state(23);
        let greedy = argmax(&state.features().iter().map(|x| x.dot(state.theta_hat())).collect::<Vec<_>>());
        assert_eq!(ucbglm_choose(&state, 0.0), greedy);
        assert_eq!(glmts_choose(&state, 0.0, &mut rng), greedy);
    }

    #[test]
    fn repeated_arm_index_decreases() {
        let (mut state, _, _) = initialized_state(24);
        let arm = 3;
        let beta = 2.0;
        let index = |s: &GlbState| s.features()[arm].dot(s.theta_hat()) + beta * s.norm_minv(&s.features()[arm]);
        let bonus = |s: &GlbState| s.norm_minv(&s.features()[arm]);
        let mut prev = bonus(&state);
        for _ in 0..20 {
            state.update(arm, 0.0);
            assert!(bonus(&state) < prev);
            prev = bonus(&state);
        }
        let before = index(&state);
        state.update(arm, 0.0);
        assert!(index(&state) < before);
    }

    #[test]
    fn glmts_sample_covariance() {
        let (state, _, mut rng) = initialized_state(25);
        let scale = 0.7;
        let inv = linalg::inverse_and_logdet(&state.hessian()).unwrap().0;
        let chol = linalg::cholesky(&inv).unwrap().l();
        let n = 100_000;
        let draws: Vec<Vector> = (0..n)
            .map(|_| linalg::gaussian_sample(state.theta_hat(), &chol, scale, &mut rng))
            .collect();
        let mean = draws.iter().fold(Vector::zeros(3), |acc, v| acc + v) / n as f64;
        let mut cov = Matrix::zeros(3, 3);
        for v in &draws {
            let c = v - &mean;
            cov += &c * c.transpose();
        }
        cov /= (n - 1) as f64;
        let target = inv * (scale * scale);
        for i in 0..3 {
            for j in 0..3 {
                let tol = 0.1 * (target[(i, i)] * target[(j, j)]).sqrt();
                assert!((cov[(i, j)] - target[(i, j)]).abs() <= tol);
            }
        }
    }

    #[test]
    fn glmts_argmax_invariant_under_link() {
        let (state, _, _) = initialized_state(26);
        for seed in 0..20 {
            let mut a = crate::rng::Stream::seed_from_u64(seed);
            let mut b = a.clone();
            let arm = glmts_choose(&state, 1.0, &mut a);
            let inv = linalg::inverse_and_logdet(&state.hessian()).unwrap().0;
            let chol = linalg::cholesky(&inv).unwrap().l();
            let theta = linalg::gaussian_sample(state.theta_hat(), &chol, 1.0, &mut b);
            let mapped: Vec<f64> = state.features().iter().map(|x| sigmoid(x.dot(&theta))).collect();
            assert_eq!(arm, argmax(&mapped));
        }
    }

    #[test]
    fn forced_schedule_drives_policies() {
        let mut rng = seeded(27);
        let inst = gen_structured(10, 3, Link::Logistic, &mut rng).unwrap();
        let features: Arc<[Vector]> = inst.features().to_vec().into();
        let state = GlbState::new(features, LinkSpec::logistic(), Tau0Mode::Capped { cap: 2 }, 500).unwrap();
        let schedule = state.schedule().to_vec();
        assert_eq!(schedule.len(), 9);
        let mut policy = UcbGlm::new(state, 1.0);
        for &expected in &schedule {
            let arm = policy.select(&mut rng);
            assert_eq!(arm, expected);
            policy.update(arm, inst.pull(arm, &mut rng), &mut rng);
        }
        assert!(policy.state().initialized());
        assert!(policy.state().log_likelihood_gradient().norm() <= 1e-6 || !policy.state().last_fit_converged());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn matrix_norm_sandwich(seed in any::<u64>(), d in 1usize..=6, n in 1usize..=12) {
            let spec = LinkSpec::logistic();
            let (mu, lip) = (spec.mu_floor, spec.lipschitz);
            let mut rng = seeded(seed);
            let mut a = Matrix::identity(d, d) * 1e-3;
            let mut b = &a * rng.random_range(mu..=lip);
            for _ in 0..n {
                let v = linalg::outer(&linalg::standard_normal_vector(d, &mut rng));
                let w = rng.random_range(mu..=lip);
                a += &v;
                b += &v * w;
            }
            let x = linalg::standard_normal_vector(d, &mut rng);
            let na = linalg::quad_norm(&a.clone().try_inverse().unwrap(), &x);
            let nb = linalg::quad_norm(&b.clone().try_inverse().unwrap(), &x);
            prop_assert!(mu.sqrt() * nb <= na * (1.0 + 1e-9));
            prop_assert!(na <= lip.sqrt() * nb * (1.0 + 1e-9));
        }
    }
}

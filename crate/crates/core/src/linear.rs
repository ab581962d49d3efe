//! Incremental ridge regression and linear bandit policies.
//!
//! [`LinState`] keeps `M_t = λI + Σ X Xᵀ` together with its inverse and
//! log-determinant under rank-one updates, so each round costs `O(K d²)`.

use std::sync::Arc;

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::linalg::{self, Matrix, Vector};
use crate::mab::explore_or_exploit;
use crate::zdist::ZDist;
use crate::{argmax, Policy};

/// Rank-one updates between full refactorizations of the Gram matrix.
pub const REFRESH_EVERY: u64 = 500;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinError {
    #[error("non-finite observation")]
    NonFinite,
    #[error("feature has dimension {got}, expected {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("feature norm {0} exceeds 1")]
    NormTooLarge(f64),
    #[error("ridge parameter must be positive, got {0}")]
    BadLambda(f64),
}

/// Sufficient statistics of ridge regression.
#[derive(Debug, Clone, PartialEq)]
pub struct LinState {
    gram: Matrix,
    gram_inv: Matrix,
    b: Vector,
    theta_hat: Vector,
    logdet: f64,
    lambda: f64,
    updates: u64,
}

impl LinState {
    pub fn new(d: usize, lambda: f64) -> Result<Self, LinError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(LinError::BadLambda(lambda));
        }
        Ok(Self {
            gram: Matrix::identity(d, d) * lambda,
            gram_inv: Matrix::identity(d, d) / lambda,
            b: Vector::zeros(d),
            theta_hat: Vector::zeros(d),
            logdet: d as f64 * lambda.ln(),
            lambda,
            updates: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn gram_inv(&self) -> &Matrix {
        &self.gram_inv
    }

    pub fn theta_hat(&self) -> &Vector {
        &self.theta_hat
    }

    /// `ln det M_t`.
    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of observations folded in.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// `‖x‖_{M⁻¹}`.
    pub fn norm_minv(&self, x: &Vector) -> f64 {
        linalg::quad_norm(&self.gram_inv, x)
    }

    /// Folds in `(x, y)`; returns the increment `ln(1 + ‖x‖²_{M⁻¹})` of the
    /// log-determinant.
    pub fn update(&mut self, x: &Vector, y: f64) -> Result<f64, LinError> {
        if x.len() != self.dim() {
            return Err(LinError::Dimension {
                got: x.len(),
                expected: self.dim(),
            });
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(LinError::NonFinite);
        }
        let norm = x.norm();
        if norm > 1.0 + 1e-9 {
            return Err(LinError::NormTooLarge(norm));
        }
        let v = &self.gram_inv * x;
        let denom = 1.0 + x.dot(&v);
        self.gram_inv -= (&v * v.transpose()) / denom;
        self.gram += linalg::outer(x);
        let step = denom.ln();
        self.logdet += step;
        self.b += x * y;
        self.updates += 1;
        if self.updates.is_multiple_of(REFRESH_EVERY) {
            self.refresh();
        }
        self.theta_hat = &self.gram_inv * &self.b;
        Ok(step)
    }

    /// Recomputes the inverse and log-determinant from the Gram matrix.
    fn refresh(&mut self) {
        let (inv, logdet) = linalg::inverse_and_logdet(&self.gram).expect("ridge Gram matrix is positive definite");
        debug_assert!(
            (logdet - self.logdet).abs() <= 1e-8 * logdet.abs().max(1.0),
            "log-determinant drifted: {} vs {}",
            self.logdet,
            logdet
        );
        debug_assert!(
            {
                let scale = self.gram.iter().fold(0.0f64, |m, v| m.max(v.abs())) / self.lambda;
                let eye = Matrix::identity(self.dim(), self.dim());
                linalg::max_abs_diff(&(&self.gram * &self.gram_inv), &eye) <= 1e-8 * scale.max(1.0)
            },
            "inverse Gram matrix drifted"
        );
        self.gram_inv = inv;
        self.logdet = logdet;
    }
}

/// Functional form of [`LinState::update`].
pub fn lin_update(mut state: LinState, x: &Vector, y: f64) -> Result<LinState, LinError> {
    state.update(x, y)?;
    Ok(state)
}

pub fn norm_minv(state: &LinState, x: &Vector) -> f64 {
    state.norm_minv(x)
}

/// Confidence width `√λ + ½ √(ln(T² λ^{-d} det M_t))`.
pub fn data_dependent_width(state: &LinState, horizon: u64) -> f64 {
    let d = state.dim() as f64;
    let arg = 2.0 * (horizon as f64).ln() + state.logdet() - d * state.lambda().ln();
    state.lambda().sqrt() + 0.5 * arg.max(0.0).sqrt()
}

/// `c₁ = √λ + ½ √(d ln(T + T²/(dλ)))`.
pub fn theory_c1(d: usize, horizon: u64, lambda: f64) -> f64 {
    let (d, t) = (d as f64, horizon as f64);
    lambda.sqrt() + 0.5 * (d * (t + t * t / (d * lambda)).ln()).sqrt()
}

/// The default sampling distribution stretched to `[0, 3c₁]`.
pub fn theory_zdist(d: usize, horizon: u64, lambda: f64) -> ZDist {
    ZDist::default_shape(horizon, 3.0 * theory_c1(d, horizon, lambda))
}

/// How RandLinUCB positions its sampling grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UMode {
    /// The supplied distribution is used as is (see [`theory_zdist`]).
    Fixed,
    /// The grid is rescaled each round to `[0, U_t]` with `U_t` the
    /// data-dependent LinUCB width.
    #[default]
    DataDependent,
}

fn index_values(state: &LinState, features: &[Vector], width: f64) -> Vec<f64> {
    let theta = state.theta_hat();
    features
        .iter()
        .map(|x| x.dot(theta) + width * state.norm_minv(x))
        .collect()
}

/// RandLinUCB choice and the `Z_t` used.
pub fn randlinucb_choose_with_z<R: Rng + ?Sized>(
    state: &LinState,
    features: &[Vector],
    z: &ZDist,
    u_mode: UMode,
    horizon: u64,
    rng: &mut R,
) -> (usize, f64) {
    let zt = match u_mode {
        UMode::Fixed => z.sample(rng),
        UMode::DataDependent => z.sample_scaled(rng, data_dependent_width(state, horizon)),
    };
    (argmax(&index_values(state, features, zt)), zt)
}

pub fn randlinucb_choose<R: Rng + ?Sized>(
    state: &LinState,
    features: &[Vector],
    z: &ZDist,
    u_mode: UMode,
    horizon: u64,
    rng: &mut R,
) -> usize {
    randlinucb_choose_with_z(state, features, z, u_mode, horizon, rng).0
}

/// `argmax ⟨θ̂, x⟩ + β ‖x‖_{M⁻¹}`.
pub fn linucb_choose(state: &LinState, features: &[Vector], beta_t: f64) -> usize {
    argmax(&index_values(state, features, beta_t))
}

/// Linear Thompson sampling: `θ̃ ~ N(θ̂, (inflation · β)² M⁻¹)`.
pub fn lints_choose<R: Rng + ?Sized>(
    state: &LinState,
    features: &[Vector],
    inflation: f64,
    beta: f64,
    rng: &mut R,
) -> usize {
    let scale = inflation * beta;
    let theta = if scale == 0.0 {
        state.theta_hat().clone()
    } else {
        let chol = linalg::cholesky(state.gram_inv()).expect("inverse Gram matrix is positive definite");
        linalg::gaussian_sample(state.theta_hat(), &chol.l(), scale, rng)
    };
    let values: Vec<f64> = features.iter().map(|x| x.dot(&theta)).collect();
    argmax(&values)
}

pub fn lin_greedy_arm(state: &LinState, features: &[Vector]) -> usize {
    argmax(&index_values(state, features, 0.0))
}

/// Width used by LinUCB (and as the LinTS scale).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaMode {
    Constant(f64),
    DataDependent,
}

impl BetaMode {
    pub fn width(self, state: &LinState, horizon: u64) -> f64 {
        match self {
            BetaMode::Constant(beta) => beta,
            BetaMode::DataDependent => data_dependent_width(state, horizon),
        }
    }
}

fn update_or_panic(state: &mut LinState, features: &[Vector], arm: usize, reward: f64) {
    state
        .update(&features[arm], reward)
        .expect("environment features and rewards are finite");
}

/// RandUCB for linear bandits.
#[derive(Debug, Clone)]
pub struct RandLinUcb {
    state: LinState,
    features: Arc<[Vector]>,
    z: ZDist,
    u_mode: UMode,
    horizon: u64,
}

impl RandLinUcb {
    pub fn new(features: Arc<[Vector]>, lambda: f64, z: ZDist, u_mode: UMode, horizon: u64) -> Result<Self, LinError> {
        let d = features.first().map_or(0, |x| x.len());
        Ok(Self {
            state: LinState::new(d, lambda)?,
            features,
            z,
            u_mode,
            horizon,
        })
    }

    pub fn state(&self) -> &LinState {
        &self.state
    }

    pub fn select_with_z(&mut self, rng: &mut dyn RngCore) -> (usize, f64) {
        randlinucb_choose_with_z(&self.state, &self.features, &self.z, self.u_mode, self.horizon, rng)
    }
}

impl Policy for RandLinUcb {
    fn select(&mut self, rng: &mut dyn RngCore) -> usize {
        self.select_with_z(rng).0
    }

    fn update(&mut self, arm: usize, reward: f64, _rng: &mut dyn RngCore) {
        update_or_panic(&mut self.state, &self.features, arm, reward);
    }
}

#[derive(Debug, Clone)]
pub struct LinUcb {
    state: LinState,
    features: Arc<[Vector]>,
    beta: BetaMode,
    horizon: u64,
}

impl LinUcb {
    pub fn new(features: Arc<[Vector]>, lambda: f64, beta: BetaMode, horizon: u64) -> Result<Self, LinError> {
        let d = features.first().map_or(0, |x| x.len());
        Ok(Self {
            state: LinState::new(d, lambda)?,
            features,
            beta,
            horizon,
        })
    }
}

impl Policy for LinUcb {
    fn select(&mut self, _rng: &mut dyn RngCore) -> usize {
        linucb_choose(&self.state, &self.features, self.beta.width(&self.state, self.horizon))
    }

    fn update(&mut self, arm: usize, reward: f64, _rng: &mut dyn RngCore) {
        update_or_panic(&mut self.state, &self.features, arm, reward);
    }
}

/// LinTS; `inflation = 1` is the plain variant, `√d` the inflated one.
#[derive(Debug, Clone)]
pub struct LinTs {
    state: LinState,
    features: Arc<[Vector]>,
    inflation: f64,
    beta: BetaMode,
    horizon: u64,
}

impl LinTs {
    pub fn new(
        features: Arc<[Vector]>,
        lambda: f64,
        inflation: f64,
        beta: BetaMode,
        horizon: u64,
    ) -> Result<Self, LinError> {
        let d = features.first().map_or(0, |x| x.len());
        Ok(Self {
            state: LinState::new(d, lambda)?,
            features,
            inflation,
            beta,
            horizon,
        })
    }
}

impl Policy for LinTs {
    fn select(&mut self, rng: &mut dyn RngCore) -> usize {
        let beta = self.beta.width(&self.state, self.horizon);
        lints_choose(&self.state, &self.features, self.inflation, beta, rng)
    }

    fn update(&mut self, arm: usize, reward: f64, _rng: &mut dyn RngCore) {
        update_or_panic(&mut self.state, &self.features, arm, reward);
    }
}

/// ε-greedy on `⟨θ̂, x⟩` with the annealed rate `ε √T / (2 √t)`.
#[derive(Debug, Clone)]
pub struct LinEpsGreedy {
    state: LinState,
    features: Arc<[Vector]>,
    eps: f64,
    horizon: u64,
}

impl LinEpsGreedy {
    pub fn new(features: Arc<[Vector]>, lambda: f64, eps: f64, horizon: u64) -> Result<Self, LinError> {
        let d = features.first().map_or(0, |x| x.len());
        Ok(Self {
            state: LinState::new(d, lambda)?,
            features,
            eps,
            horizon,
        })
    }
}

impl Policy for LinEpsGreedy {
    fn select(&mut self, rng: &mut dyn RngCore) -> usize {
        let eps_t = crate::mab::annealed_eps(self.eps, self.horizon, self.state.updates() + 1);
        let (state, features) = (&self.state, &self.features);
        explore_or_exploit(features.len(), eps_t, || lin_greedy_arm(state, features), rng)
    }

    fn update(&mut self, arm: usize, reward: f64, _rng: &mut dyn RngCore) {
        update_or_panic(&mut self.state, &self.features, arm, reward);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::assert_abs_diff_eq;
    use rand_distr::StandardNormal;

    fn unit(d: usize, i: usize) -> Vector {
        let mut v = Vector::zeros(d);
        v[i] = 1.0;
        v
    }

    fn random_unit_ball<R: Rng>(d: usize, rng: &mut R) -> Vector {
        let g = Vector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let r: f64 = rng.random::<f64>();
        g.normalize() * r
    }

    #[test]
    fn empty_state_estimates_zero() {
        let s = LinState::new(4, 0.5).unwrap();
        assert_eq!(s.theta_hat(), &Vector::zeros(4));
        let x = Vector::from_row_slice(&[0.3, 0.4, 0.0, 0.0]);
        assert_abs_diff_eq!(s.norm_minv(&x), 0.5 / 0.5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(s.norm_minv(&Vector::zeros(4)), 0.0);
    }

    #[test]
    fn one_observation_halves_the_estimate() {
        let s = lin_update(LinState::new(3, 1.0).unwrap(), &unit(3, 0), 1.0).unwrap();
        assert_abs_diff_eq!(s.theta_hat()[0], 0.5, epsilon = 1e-15);
        assert_eq!(s.theta_hat()[1], 0.0);
        assert_eq!(s.theta_hat()[2], 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut s = LinState::new(2, 1.0).unwrap();
        assert_eq!(s.update(&Vector::from_row_slice(&[f64::NAN, 0.0]), 1.0), Err(LinError::NonFinite));
        assert_eq!(s.update(&unit(2, 0), f64::INFINITY), Err(LinError::NonFinite));
        assert!(matches!(s.update(&Vector::from_row_slice(&[1.0, 1.0]), 1.0), Err(LinError::NormTooLarge(_))));
        assert!(matches!(s.update(&unit(3, 0), 1.0), Err(LinError::Dimension { .. })));
        assert!(LinState::new(2, 0.0).is_err());
    }

    #[test]
    fn rank_one_updates_match_direct_inverse() {
        let mut rng = seeded(1);
        let mut s = LinState::new(3, 1.0).unwrap();
        let mut direct_gram = Matrix::identity(3, 3);
        let mut direct_b = Vector::zeros(3);
        for _ in 0..50 {
            let x = random_unit_ball(3, &mut rng);
            let y: f64 = rng.random();
            s.update(&x, y).unwrap();
            direct_gram += &x * x.transpose();
            direct_b += &x * y;
        }
        let inv = direct_gram.clone().try_inverse().unwrap();
        assert!(linalg::max_abs_diff(s.gram_inv(), &inv) <= 1e-10);
        assert!(linalg::max_abs_diff(s.gram(), &direct_gram) <= 1e-12);
        let theta = direct_gram.lu().solve(&direct_b).unwrap();
        assert!((s.theta_hat() - theta).amax() <= 1e-10);
    }

    #[test]
    fn norm_shrinks_after_update() {
        let mut rng = seeded(2);
        let mut s = LinState::new(4, 0.1).unwrap();
        for _ in 0..20 {
            let x = random_unit_ball(4, &mut rng);
            let before = s.norm_minv(&x);
            s.update(&x, 0.5).unwrap();
            assert!(s.norm_minv(&x) < before);
        }
    }

    #[test]
    fn repeated_pulls_shrink_like_inverse_sqrt() {
        let mut s = LinState::new(3, 1.0).unwrap();
        let x = unit(3, 1);
        let initial = s.norm_minv(&x);
        for n in 1..=100u32 {
            s.update(&x, 1.0).unwrap();
            assert_abs_diff_eq!(s.norm_minv(&x), 1.0 / (1.0 + n as f64).sqrt(), epsilon = 1e-12);
        }
        assert!(s.norm_minv(&x) < 0.15 * initial);
    }

    #[test]
    fn logdet_telescopes() {
        let mut rng = seeded(3);
        let lambda = 0.01;
        let d = 5;
        let mut s = LinState::new(d, lambda).unwrap();
        let mut sum = 0.0;
        for _ in 0..1200 {
            let x = random_unit_ball(d, &mut rng);
            let n2 = s.norm_minv(&x).powi(2);
            sum += (1.0 + n2).ln();
            s.update(&x, rng.random()).unwrap();
        }
        let direct = linalg::inverse_and_logdet(s.gram()).unwrap().1;
        assert_abs_diff_eq!(sum, direct - d as f64 * lambda.ln(), epsilon = 1e-6);
        assert_abs_diff_eq!(s.logdet(), direct, epsilon = 1e-8);
        assert!(linalg::min_eigenvalue(s.gram()) >= lambda - 1e-12);
    }

    #[test]
    fn data_dependent_width_at_start() {
        let s = LinState::new(5, 1e-4).unwrap();
        let t = 5000u64;
        assert_abs_diff_eq!(
            data_dependent_width(&s, t),
            1e-2 + 0.5 * (2.0 * (t as f64).ln()).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn empty_state_zero_draw_picks_first_arm() {
        let s = LinState::new(2, 1.0).unwrap();
        let features = vec![unit(2, 0), unit(2, 1)];
        let z = ZDist::point(0.0).unwrap();
        assert_eq!(randlinucb_choose(&s, &features, &z, UMode::Fixed, 100, &mut seeded(0)), 0);
        assert_eq!(linucb_choose(&s, &features, 0.0), 0);
    }

    #[test]
    fn point_distribution_matches_linucb() {
        let mut rng = seeded(4);
        let features: Vec<Vector> = (0..8).map(|_| random_unit_ball(3, &mut rng)).collect();
        let mut s = LinState::new(3, 1e-2).unwrap();
        for i in 0..30 {
            s.update(&features[i % 8], rng.random()).unwrap();
            for beta in [0.0, 0.5, 2.0] {
                let z = ZDist::point(beta).unwrap();
                assert_eq!(
                    randlinucb_choose(&s, &features, &z, UMode::Fixed, 100, &mut rng),
                    linucb_choose(&s, &features, beta)
                );
            }
            let z = ZDist::point(1.0).unwrap();
            assert_eq!(
                randlinucb_choose(&s, &features, &z, UMode::DataDependent, 100, &mut rng),
                linucb_choose(&s, &features, data_dependent_width(&s, 100))
            );
        }
    }

    #[test]
    fn one_hot_linucb_index_is_shrunk_mean() {
        let d = 4;
        let features: Vec<Vector> = (0..d).map(|i| unit(d, i)).collect();
        let mut s = LinState::new(d, 1.0).unwrap();
        let pulls = [(0, 1.0), (0, 0.0), (1, 1.0), (2, 1.0), (2, 1.0), (2, 0.0)];
        let mut counts = [0.0; 4];
        let mut sums = [0.0; 4];
        for (arm, y) in pulls {
            s.update(&features[arm], y).unwrap();
            counts[arm] += 1.0;
            sums[arm] += y;
        }
        let beta = 0.7;
        for i in 0..d {
            let lin = features[i].dot(s.theta_hat()) + beta * s.norm_minv(&features[i]);
            let closed = sums[i] / (counts[i] + 1.0) + beta / (counts[i] + 1.0f64).sqrt();
            assert_abs_diff_eq!(lin, closed, epsilon = 1e-14);
        }
    }

    #[test]
    fn lints_zero_scale_is_greedy() {
        let mut rng = seeded(5);
        let features: Vec<Vector> = (0..6).map(|_| random_unit_ball(3, &mut rng)).collect();
        let mut s = LinState::new(3, 1.0).unwrap();
        for i in 0..12 {
            s.update(&features[i % 6], (i % 3) as f64 / 2.0).unwrap();
        }
        assert_eq!(lints_choose(&s, &features, 1.0, 0.0, &mut rng), lin_greedy_arm(&s, &features));
    }

    #[test]
    fn lints_sample_moments() {
        let mut rng = seeded(6);
        let mut s = LinState::new(3, 0.5).unwrap();
        for _ in 0..10 {
            let x = random_unit_ball(3, &mut rng);
            s.update(&x, rng.random()).unwrap();
        }
        let (inflation, beta) = (3f64.sqrt(), 0.8);
        let chol = linalg::cholesky(s.gram_inv()).unwrap().l();
        let n = 100_000;
        let draws: Vec<Vector> = (0..n)
            .map(|_| linalg::gaussian_sample(s.theta_hat(), &chol, inflation * beta, &mut rng))
            .collect();
        let mean = draws.iter().fold(Vector::zeros(3), |acc, v| acc + v) / n as f64;
        let target = s.gram_inv() * (inflation * beta).powi(2);
        for j in 0..3 {
            let se = (target[(j, j)] / n as f64).sqrt();
            assert!((mean[j] - s.theta_hat()[j]).abs() <= 3.0 * se);
        }
        let mut cov = Matrix::zeros(3, 3);
        for v in &draws {
            let c = v - &mean;
            cov += &c * c.transpose();
        }
        cov /= (n - 1) as f64;
        for i in 0..3 {
            for j in 0..3 {
                let tol = 0.1 * (target[(i, i)] * target[(j, j)]).sqrt();
                assert!((cov[(i, j)] - target[(i, j)]).abs() <= tol, "({i},{j}) {} vs {}", cov[(i, j)], target[(i, j)]);
            }
        }
    }

    #[test]
    fn refresh_keeps_state_consistent() {
        let mut rng = seeded(7);
        let mut s = LinState::new(5, 1e-4).unwrap();
        let features: Vec<Vector> = (0..30).map(|_| random_unit_ball(5, &mut rng)).collect();
        for i in 0..(3 * REFRESH_EVERY as usize + 7) {
            s.update(&features[i % 30], rng.random()).unwrap();
        }
        let eye = Matrix::identity(5, 5);
        assert!(linalg::max_abs_diff(&(s.gram() * s.gram_inv()), &eye) <= 1e-8);
    }
}

//! Disjoint LinUCB with weighted observations.
//!
//! Each arm keeps its own ridge sufficient statistics `A = λI + Σ w x xᵀ` and
//! `b = Σ w r x`. Real pulls enter with weight 1, pseudo-observations with a
//! weight in `(0, 1)`. Scoring solves against `A` through a Cholesky factor
//! that each update revises in O(d²), or through a Sherman–Morrison inverse
//! when that mode is selected.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BanditError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("observation weight {0} outside (0, 1]")]
    InvalidWeight(f64),
    #[error("context is not bias-augmented")]
    NotAugmented,
    #[error("arm index {arm} out of range for {num_arms} arms")]
    ArmOutOfRange { arm: usize, num_arms: usize },
    #[error("expected {expected} per-arm contexts, got {got}")]
    ContextCount { expected: usize, got: usize },
    #[error("design matrix lost positive definiteness")]
    NotPositiveDefinite,
    #[error("invalid policy config: {0}")]
    InvalidConfig(String),
}

/// A context vector. When `bias_augmented` is set the last entry is exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector {
    values: DVector<f64>,
    bias_augmented: bool,
}

impl ContextVector {
    pub fn new(values: Vec<f64>, bias_augmented: bool) -> Result<Self, BanditError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BanditError::NonFinite("context"));
        }
        if bias_augmented && values.last() != Some(&1.0) {
            return Err(BanditError::NotAugmented);
        }
        Ok(Self {
            values: DVector::from_vec(values),
            bias_augmented,
        })
    }

    /// Appends the constant bias feature, `x -> [x; 1]`.
    pub fn augmented(mut raw: Vec<f64>) -> Result<Self, BanditError> {
        raw.push(1.0);
        Self::new(raw, true)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_bias_augmented(&self) -> bool {
        self.bias_augmented
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.norm_squared()
    }
}

/// How `A⁻¹` products are obtained when scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Keep a Cholesky factor of `A` current with rank-1 updates.
    #[default]
    Cholesky,
    /// Keep `A⁻¹` up to date with Sherman–Morrison rank-1 corrections.
    ShermanMorrison,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub num_arms: usize,
    pub dim: usize,
    pub alpha: f64,
    pub lambda_reg: f64,
    pub solve_mode: SolveMode,
}

impl PolicyConfig {
    pub fn new(num_arms: usize, dim: usize, alpha: f64, lambda_reg: f64) -> Result<Self, BanditError> {
        let config = Self {
            num_arms,
            dim,
            alpha,
            lambda_reg,
            solve_mode: SolveMode::Cholesky,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_solve_mode(mut self, mode: SolveMode) -> Self {
        self.solve_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), BanditError> {
        if self.num_arms < 2 {
            return Err(BanditError::InvalidConfig(format!(
                "need at least 2 arms, got {}",
                self.num_arms
            )));
        }
        if self.dim == 0 {
            return Err(BanditError::InvalidConfig("dimension must be positive".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(BanditError::InvalidConfig(format!(
                "alpha must be finite and non-negative, got {}",
                self.alpha
            )));
        }
        if !(self.lambda_reg > 0.0 && self.lambda_reg.is_finite()) {
            return Err(BanditError::InvalidConfig(format!(
                "lambda_reg must be positive, got {}",
                self.lambda_reg
            )));
        }
        Ok(())
    }
}

/// Per-arm ridge statistics plus real/pseudo accounting.
#[derive(Debug, Clone)]
pub struct ArmState {
    a: DMatrix<f64>,
    b: DVector<f64>,
    factor: Option<Cholesky<f64, Dyn>>,
    a_inv: Option<DMatrix<f64>>,
    n_real: u64,
    n_pseudo: u64,
    pseudo_mass: f64,
}

// The factor is a function of `A` and takes no part in equality.
impl PartialEq for ArmState {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a
            && self.b == other.b
            && self.a_inv == other.a_inv
            && self.n_real == other.n_real
            && self.n_pseudo == other.n_pseudo
            && self.pseudo_mass == other.pseudo_mass
    }
}

impl ArmState {
    /// `A = λ_reg·I`, `b = 0`, counters zero.
    pub fn new(config: &PolicyConfig) -> Self {
        let d = config.dim;
        let a = DMatrix::identity(d, d) * config.lambda_reg;
        let (factor, a_inv) = match config.solve_mode {
            SolveMode::Cholesky => (Cholesky::new(a.clone()), None),
            SolveMode::ShermanMorrison => (None, Some(DMatrix::identity(d, d) / config.lambda_reg)),
        };
        Self {
            a,
            b: DVector::zeros(d),
            factor,
            a_inv,
            n_real: 0,
            n_pseudo: 0,
            pseudo_mass: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn maintained_inverse(&self) -> Option<&DMatrix<f64>> {
        self.a_inv.as_ref()
    }

    pub fn n_real(&self) -> u64 {
        self.n_real
    }

    pub fn n_pseudo(&self) -> u64 {
        self.n_pseudo
    }

    pub fn pseudo_mass(&self) -> f64 {
        self.pseudo_mass
    }

    /// Weighted update `A += w x xᵀ`, `b += w r x`.
    ///
    /// `w = 1` counts as a real observation; anything smaller is a pseudo
    /// observation. Zero weights are rejected: callers skip those injections.
    pub fn update(&mut self, x: &ContextVector, reward: f64, weight: f64) -> Result<(), BanditError> {
        self.check_dim(x)?;
        if !reward.is_finite() {
            return Err(BanditError::NonFinite("reward"));
        }
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(BanditError::InvalidWeight(weight));
        }
        let xv = x.as_vector();
        // Symmetric by construction: the same product fills (i, j) and (j, i).
        let d = self.dim();
        for j in 0..d {
            for i in j..d {
                let v = weight * xv[i] * xv[j];
                self.a[(i, j)] += v;
                if i != j {
                    self.a[(j, i)] += v;
                }
            }
        }
        self.b.axpy(weight * reward, xv, 1.0);

        if let Some(f) = self.factor.as_mut() {
            f.rank_one_update(xv, weight);
        }
        if let Some(inv) = self.a_inv.as_mut() {
            let u = &*inv * xv;
            let denom = 1.0 + weight * xv.dot(&u);
            let scale = weight / denom;
            for j in 0..d {
                for i in j..d {
                    let v = inv[(i, j)] - scale * u[i] * u[j];
                    inv[(i, j)] = v;
                    inv[(j, i)] = v;
                }
            }
        }

        if weight == 1.0 {
            self.n_real += 1;
        } else {
            self.n_pseudo += 1;
            self.pseudo_mass += weight;
        }
        Ok(())
    }

    /// Solves `A z = v` for the configured solve mode.
    pub fn solve(&self, v: &DVector<f64>) -> Result<DVector<f64>, BanditError> {
        if v.len() != self.dim() {
            return Err(BanditError::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        match (&self.factor, &self.a_inv) {
            (Some(f), _) => Ok(f.solve(v)),
            (None, Some(inv)) => Ok(inv * v),
            (None, None) => self.solve_factored(v),
        }
    }

    /// Solve through a fresh factorization of `A`, regardless of solve mode.
    pub fn solve_factored(&self, v: &DVector<f64>) -> Result<DVector<f64>, BanditError> {
        let chol = Cholesky::new(self.a.clone()).ok_or(BanditError::NotPositiveDefinite)?;
        Ok(chol.solve(v))
    }

    /// Ridge estimate `A⁻¹ b`.
    pub fn theta_hat(&self) -> Result<DVector<f64>, BanditError> {
        self.solve(&self.b)
    }

    /// Exploration width `sqrt(xᵀ A⁻¹ x)`.
    pub fn bonus(&self, x: &ContextVector) -> Result<f64, BanditError> {
        self.check_dim(x)?;
        let z = self.solve(x.as_vector())?;
        Ok(x.as_vector().dot(&z).max(0.0).sqrt())
    }

    pub fn ucb_score(&self, x: &ContextVector, alpha: f64) -> Result<f64, BanditError> {
        self.check_dim(x)?;
        let xv = x.as_vector();
        let theta = self.theta_hat()?;
        let mean = theta.dot(xv);
        if alpha == 0.0 {
            return Ok(mean);
        }
        let z = self.solve(xv)?;
        Ok(mean + alpha * xv.dot(&z).max(0.0).sqrt())
    }

    fn check_dim(&self, x: &ContextVector) -> Result<(), BanditError> {
        if x.dim() != self.dim() {
            return Err(BanditError::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        Ok(())
    }
}

/// Index of the largest score, lowest index on ties.
pub fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Argmax of UCB scores across arms. Ties go to the lowest arm index.
pub fn select_arm(states: &[ArmState], contexts: &[ContextVector], alpha: f64) -> Result<usize, BanditError> {
    if contexts.len() != states.len() {
        return Err(BanditError::ContextCount {
            expected: states.len(),
            got: contexts.len(),
        });
    }
    let scores = states
        .iter()
        .zip(contexts)
        .map(|(s, x)| s.ucb_score(x, alpha))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(argmax_lowest(&scores))
}

/// K disjoint arms sharing one config.
#[derive(Debug, Clone)]
pub struct LinUcb {
    config: PolicyConfig,
    arms: Vec<ArmState>,
}

impl LinUcb {
    pub fn new(config: PolicyConfig) -> Result<Self, BanditError> {
        config.validate()?;
        let arms = (0..config.num_arms).map(|_| ArmState::new(&config)).collect();
        Ok(Self { config, arms })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn arms(&self) -> &[ArmState] {
        &self.arms
    }

    pub fn arm(&self, arm: usize) -> Result<&ArmState, BanditError> {
        self.arms.get(arm).ok_or(BanditError::ArmOutOfRange {
            arm,
            num_arms: self.arms.len(),
        })
    }

    pub fn scores(&self, contexts: &[ContextVector]) -> Result<Vec<f64>, BanditError> {
        self.check_contexts(contexts)?;
        self.arms
            .iter()
            .zip(contexts)
            .map(|(s, x)| s.ucb_score(x, self.config.alpha))
            .collect()
    }

    pub fn select(&self, contexts: &[ContextVector]) -> Result<usize, BanditError> {
        Ok(argmax_lowest(&self.scores(contexts)?))
    }

    pub fn update(&mut self, arm: usize, x: &ContextVector, reward: f64, weight: f64) -> Result<(), BanditError> {
        if !x.is_bias_augmented() {
            return Err(BanditError::NotAugmented);
        }
        let num_arms = self.arms.len();
        self.arms
            .get_mut(arm)
            .ok_or(BanditError::ArmOutOfRange { arm, num_arms })?
            .update(x, reward, weight)
    }

    fn check_contexts(&self, contexts: &[ContextVector]) -> Result<(), BanditError> {
        if contexts.len() != self.arms.len() {
            return Err(BanditError::ContextCount {
                expected: self.arms.len(),
                got: contexts.len(),
            });
        }
        if contexts.iter().any(|x| !x.is_bias_augmented()) {
            return Err(BanditError::NotAugmented);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Dense batch oracle: builds λI + Σ w x xᵀ and Σ w r x from the raw
    // observation list and solves by Gauss-Jordan elimination with partial
    // pivoting. Shares no code with ArmState.
    fn batch_ridge(d: usize, lambda: f64, obs: &[(Vec<f64>, f64, f64)]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let mut a = vec![vec![0.0; d]; d];
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = lambda;
        }
        let mut b = vec![0.0; d];
        for (x, r, w) in obs {
            for i in 0..d {
                for j in 0..d {
                    a[i][j] += w * x[i] * x[j];
                }
                b[i] += w * r * x[i];
            }
        }
        let theta = gauss_solve(&a, &b);
        (a, b, theta)
    }

    fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a
            .iter()
            .zip(b)
            .map(|(row, &bi)| {
                let mut r = row.clone();
                r.push(bi);
                r
            })
            .collect();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
                .unwrap();
            m.swap(col, piv);
            let p = m[col][col];
            for c in col..=n {
                m[col][c] /= p;
            }
            for r in 0..n {
                if r != col {
                    let f = m[r][col];
                    for c in col..=n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
        m.into_iter().map(|row| row[n]).collect()
    }

    fn cfg(k: usize, d: usize, lambda: f64) -> PolicyConfig {
        PolicyConfig::new(k, d, 1.0, lambda).unwrap()
    }

    fn cv(v: &[f64]) -> ContextVector {
        ContextVector::new(v.to_vec(), false).unwrap()
    }

    #[test]
    fn init_is_scaled_identity() {
        let s = ArmState::new(&cfg(2, 2, 1.0));
        assert_eq!(s.design(), &DMatrix::identity(2, 2));
        assert_eq!(s.response(), &DVector::zeros(2));
        assert_eq!((s.n_real(), s.n_pseudo(), s.pseudo_mass()), (0, 0, 0.0));

        let s = ArmState::new(&cfg(2, 1, 2.5));
        assert_eq!(s.design()[(0, 0)], 2.5);
        assert_eq!(s.response()[0], 0.0);

        let s = ArmState::new(&cfg(2, 3, 1.0));
        assert_eq!(s.theta_hat().unwrap(), DVector::zeros(3));
    }

    #[test]
    fn real_update_one_dim() {
        let mut s = ArmState::new(&cfg(2, 1, 1.0));
        s.update(&cv(&[1.0]), 1.0, 1.0).unwrap();
        let (a, b, theta) = batch_ridge(1, 1.0, &[(vec![1.0], 1.0, 1.0)]);
        assert_eq!(s.design()[(0, 0)], 2.0);
        assert_eq!(s.design()[(0, 0)], a[0][0]);
        assert_eq!(s.response()[0], 1.0);
        assert_eq!(s.response()[0], b[0]);
        assert_eq!(s.n_real(), 1);
        assert!((s.theta_hat().unwrap()[0] - 0.5).abs() < 1e-15);
        assert!((theta[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pseudo_update_two_dim() {
        let mut s = ArmState::new(&cfg(2, 2, 1.0));
        s.update(&cv(&[1.0, 1.0]), 5.0, 0.1).unwrap();
        let (a, b, _) = batch_ridge(2, 1.0, &[(vec![1.0, 1.0], 5.0, 0.1)]);
        for i in 0..2 {
            for j in 0..2 {
                assert!((s.design()[(i, j)] - a[i][j]).abs() < 1e-15);
            }
            assert!((s.response()[i] - b[i]).abs() < 1e-15);
        }
        assert!((s.design()[(0, 0)] - 1.1).abs() < 1e-15);
        assert!((s.design()[(0, 1)] - 0.1).abs() < 1e-15);
        assert!((s.response()[0] - 0.5).abs() < 1e-15);
        assert_eq!(s.n_real(), 0);
        assert_eq!(s.n_pseudo(), 1);
        assert!((s.pseudo_mass() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn update_rejects_bad_inputs() {
        let mut s = ArmState::new(&cfg(2, 2, 1.0));
        let before = s.clone();
        assert_eq!(
            s.update(&cv(&[1.0]), 1.0, 1.0),
            Err(BanditError::DimensionMismatch { expected: 2, got: 1 })
        );
        assert_eq!(s.update(&cv(&[1.0, 0.0]), f64::NAN, 1.0), Err(BanditError::NonFinite("reward")));
        assert_eq!(s.update(&cv(&[1.0, 0.0]), 1.0, 0.0), Err(BanditError::InvalidWeight(0.0)));
        assert_eq!(s.update(&cv(&[1.0, 0.0]), 1.0, 1.5), Err(BanditError::InvalidWeight(1.5)));
        assert_eq!(s, before);
        assert!(ContextVector::new(vec![f64::INFINITY], false).is_err());
        assert_eq!(ContextVector::new(vec![0.3, 0.5], true), Err(BanditError::NotAugmented));
    }

    #[test]
    fn ucb_score_examples() {
        let mut s = ArmState::new(&cfg(2, 1, 1.0));
        s.update(&cv(&[1.0]), 1.0, 1.0).unwrap();
        let expected = 0.5 + 0.5f64.sqrt();
        assert!((s.ucb_score(&cv(&[1.0]), 1.0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 1.20711).abs() < 1e-5);
        let theta = s.theta_hat().unwrap();
        assert_eq!(s.ucb_score(&cv(&[1.0]), 0.0).unwrap(), theta[0]);

        let fresh = ArmState::new(&cfg(2, 3, 1.0));
        assert_eq!(fresh.ucb_score(&cv(&[0.0, 1.0, 0.0]), 1.0).unwrap(), 1.0);
    }

    #[test]
    fn select_ties_go_to_lowest_index() {
        let config = cfg(3, 2, 1.0);
        let states = vec![ArmState::new(&config); 3];
        let x = ContextVector::augmented(vec![0.4]).unwrap();
        assert_eq!(select_arm(&states, &[x.clone(), x.clone(), x], 1.0).unwrap(), 0);
    }

    #[test]
    fn select_prefers_higher_score() {
        // Arm 0 after one pull of reward 1 at x=[1] scores 0.5 + sqrt(0.5),
        // arm 1 fresh scores 1.0.
        let config = cfg(2, 1, 1.0);
        let mut states = vec![ArmState::new(&config); 2];
        states[0].update(&cv(&[1.0]), 1.0, 1.0).unwrap();
        let x = cv(&[1.0]);
        let a0 = states[0].ucb_score(&x, 1.0).unwrap();
        let a1 = states[1].ucb_score(&x, 1.0).unwrap();
        assert!(a0 > 1.2 && (a1 - 1.0).abs() < 1e-15);
        assert_eq!(select_arm(&states, &[x.clone(), x], 1.0).unwrap(), 0);

        // Make arm 1 clearly better.
        states[1].update(&cv(&[1.0]), 3.0, 1.0).unwrap();
        let x = cv(&[1.0]);
        assert_eq!(select_arm(&states, &[x.clone(), x], 1.0).unwrap(), 1);
    }

    #[test]
    fn constant_reward_shift_keeps_argmax() {
        // Shifting every reward by c with the bias feature present shifts every
        // arm's mean by (approximately) the same amount once the arms share
        // identical designs; with identical A the shift is exact.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let k = 3;
            let config = cfg(k, 3, 1.0);
            let xs: Vec<ContextVector> = (0..6)
                .map(|_| ContextVector::augmented(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).unwrap())
                .collect();
            let rewards: Vec<Vec<f64>> = (0..k).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let c = rng.random_range(-5.0..5.0);
            let build = |shift: f64| {
                let mut states = vec![ArmState::new(&config); k];
                for (a, state) in states.iter_mut().enumerate() {
                    for (x, r) in xs.iter().zip(&rewards[a]) {
                        state.update(x, r + shift, 1.0).unwrap();
                    }
                }
                states
            };
            let probe = ContextVector::augmented(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).unwrap();
            let ctx = vec![probe; k];
            let base = build(0.0);
            let shifted = build(c);
            let s0: Vec<f64> = base.iter().map(|s| s.ucb_score(&ctx[0], 1.0).unwrap()).collect();
            let s1: Vec<f64> = shifted.iter().map(|s| s.ucb_score(&ctx[0], 1.0).unwrap()).collect();
            let diffs: Vec<f64> = s0.iter().zip(&s1).map(|(a, b)| b - a).collect();
            assert!(diffs.iter().all(|d| (d - diffs[0]).abs() < 1e-9));
            let gap = {
                let mut v = s0.clone();
                v.sort_by(|a, b| b.partial_cmp(a).unwrap());
                v[0] - v[1]
            };
            if gap > 1e-6 {
                assert_eq!(select_arm(&base, &ctx, 1.0).unwrap(), select_arm(&shifted, &ctx, 1.0).unwrap());
            }
        }
    }

    #[test]
    fn policy_requires_augmented_contexts() {
        let mut p = LinUcb::new(cfg(2, 2, 1.0)).unwrap();
        let raw = cv(&[0.5, 0.5]);
        assert_eq!(p.select(&[raw.clone(), raw.clone()]), Err(BanditError::NotAugmented));
        assert_eq!(p.update(0, &raw, 1.0, 1.0), Err(BanditError::NotAugmented));
        let x = ContextVector::augmented(vec![0.5]).unwrap();
        assert_eq!(p.update(2, &x, 1.0, 1.0), Err(BanditError::ArmOutOfRange { arm: 2, num_arms: 2 }));
        assert_eq!(p.select(&[x.clone()]), Err(BanditError::ContextCount { expected: 2, got: 1 }));
    }

    #[test]
    fn config_validation() {
        assert!(PolicyConfig::new(1, 2, 1.0, 1.0).is_err());
        assert!(PolicyConfig::new(2, 0, 1.0, 1.0).is_err());
        assert!(PolicyConfig::new(2, 2, -0.1, 1.0).is_err());
        assert!(PolicyConfig::new(2, 2, 1.0, 0.0).is_err());
        assert!(PolicyConfig::new(2, 2, 0.0, 1e-3).is_ok());
    }

    #[test]
    fn sherman_morrison_tracks_factorization() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let config = cfg(2, 8, 1.0).with_solve_mode(SolveMode::ShermanMorrison);
        let mut s = ArmState::new(&config);
        for i in 0..500 {
            let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w = if i % 3 == 0 { 1.0 } else { rng.random_range(0.01..1.0) };
            s.update(&cv(&x), rng.random_range(-2.0..2.0), w).unwrap();
        }
        let via_inverse = s.theta_hat().unwrap();
        let via_chol = s.solve_factored(s.response()).unwrap();
        assert!((via_inverse - via_chol).amax() < 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn incremental_matches_batch(
            d in 1usize..6,
            obs in prop::collection::vec(
                (prop::collection::vec(-2.0f64..2.0, 6), -5.0f64..5.0, 0.01f64..=1.0),
                0..60,
            ),
            lambda in 0.1f64..3.0,
        ) {
            let mut s = ArmState::new(&PolicyConfig::new(2, d, 1.0, lambda).unwrap());
            let trimmed: Vec<(Vec<f64>, f64, f64)> = obs.iter().map(|(x, r, w)| (x[..d].to_vec(), *r, *w)).collect();
            for (x, r, w) in &trimmed {
                s.update(&cv(x), *r, *w).unwrap();
            }
            let (a, b, theta) = batch_ridge(d, lambda, &trimmed);
            for i in 0..d {
                for j in 0..d {
                    prop_assert!((s.design()[(i, j)] - a[i][j]).abs() < 1e-10);
                    prop_assert_eq!(s.design()[(i, j)], s.design()[(j, i)]);
                }
                prop_assert!((s.response()[i] - b[i]).abs() < 1e-10);
            }
            let est = s.theta_hat().unwrap();
            for i in 0..d {
                prop_assert!((est[i] - theta[i]).abs() < 1e-8);
            }
            prop_assert!(Cholesky::new(s.design().clone()).is_some());
        }

        #[test]
        fn bonus_never_grows(
            probe in prop::collection::vec(-1.0f64..1.0, 4),
            obs in prop::collection::vec((prop::collection::vec(-1.0f64..1.0, 4), 0.01f64..=1.0), 1..40),
        ) {
            let mut s = ArmState::new(&cfg(2, 4, 1.0));
            let x = cv(&probe);
            let mut last = s.bonus(&x).unwrap();
            for (v, w) in &obs {
                s.update(&cv(v), 0.0, *w).unwrap();
                let now = s.bonus(&x).unwrap();
                prop_assert!(now <= last + 1e-12);
                last = now;
            }
        }
    }
}

#![allow(dead_code)]

use std::cell::RefCell;
use std::path::PathBuf;
use std::rc::Rc;

use gated_linucb::env::{EnvError, EnvStep, Environment, MushroomConfig, MushroomRewards, RegretKind};
use gated_linucb::scorer::{ScoreMode, ScoreOutcome, ScoreRequest, Scorer, ScorerError};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// Real data when `MUSHROOM_DATA` points at `agaricus-lepiota.data`,
/// otherwise the bundled 200-row sample.
pub fn mushroom_config() -> MushroomConfig {
    let path = std::env::var_os("MUSHROOM_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| fixture("agaricus-sample.data"));
    MushroomConfig {
        data_path: path,
        rewards: MushroomRewards::default(),
    }
}

/// Dense Gauss-Jordan elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
        }
        b[col] /= p;
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[i][j] -= f * a[col][j];
                    }
                    b[i] -= f * b[col];
                }
            }
        }
    }
    b
}

/// Solves `(λI + Σ w x xᵀ) θ = Σ w r x` from scratch.
pub fn batch_ridge(lambda: f64, obs: &[(Vec<f64>, f64, f64)]) -> Vec<f64> {
    let d = obs.first().map_or(0, |o| o.0.len());
    let mut a = vec![vec![0.0; d]; d];
    let mut b = vec![0.0; d];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = lambda;
    }
    for (x, r, w) in obs {
        for i in 0..d {
            for j in 0..d {
                a[i][j] += w * x[i] * x[j];
            }
            b[i] += w * r * x[i];
        }
    }
    solve_dense(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Step(u64),
    Score(u64, ScoreMode),
    Pull(u64),
}

pub type EventLog = Rc<RefCell<Vec<Event>>>;

/// Records `next_step` and `pull` calls of the wrapped environment.
pub struct Recording<E> {
    pub inner: E,
    pub log: EventLog,
    round: u64,
}

impl<E> Recording<E> {
    pub fn new(inner: E, log: EventLog) -> Self {
        Self { inner, log, round: 0 }
    }
}

impl<E: Environment> Environment for Recording<E> {
    fn name(&self) -> &'static str {
        self.inner.name()
    }
    fn num_arms(&self) -> usize {
        self.inner.num_arms()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn reward_range(&self) -> (f64, f64) {
        self.inner.reward_range()
    }
    fn regret_kind(&self) -> RegretKind {
        self.inner.regret_kind()
    }
    fn next_step(&mut self) -> Result<EnvStep, EnvError> {
        self.round += 1;
        self.log.borrow_mut().push(Event::Step(self.round));
        self.inner.next_step()
    }
    fn pull(&mut self, arm: usize) -> Result<f64, EnvError> {
        self.log.borrow_mut().push(Event::Pull(self.round));
        self.inner.pull(arm)
    }
}

/// Records every scorer call; optionally reports itself as joint.
pub struct RecordingScorer<S> {
    pub inner: S,
    pub log: EventLog,
    pub joint: bool,
}

impl<S: Scorer> Scorer for RecordingScorer<S> {
    fn score(&mut self, request: &ScoreRequest, truth: Option<&[f64]>) -> Result<ScoreOutcome, ScorerError> {
        self.log.borrow_mut().push(Event::Score(request.round, request.mode));
        self.inner.score(request, truth)
    }

    fn joint(&self) -> bool {
        self.joint
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

//! Pool-based active learning with epistemic-uncertainty acquisition.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::bootstrap::{
    build_bootstrap_ensemble, fit_weighted_mle, member_predictions, train_deep_ensemble, WeightScheme, WeightVector,
};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::information::mutual_information;
use crate::models::{predict_proba, ModelSpec, OptimizerKind, ParameterVector, TrainingConfig};
use crate::rng::RngStream;

/// Auxiliary tag base for per-step seeds.
const STEP_TAG: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scorer {
    BootstrapMi { b: usize, scheme: WeightScheme },
    EnsembleMi { s: usize },
    Random,
}

impl Scorer {
    pub fn name(&self) -> &'static str {
        match self {
            Scorer::BootstrapMi { .. } => "bootstrap-mi",
            Scorer::EnsembleMi { .. } => "ensemble-mi",
            Scorer::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionConfig {
    pub scorer: Scorer,
    pub budget: usize,
    pub spec: ModelSpec,
    pub training: TrainingConfig,
    pub master_seed: u64,
}

impl AcquisitionConfig {
    /// Softmax regression trained by a fixed budget of gradient steps, which
    /// stays finite on the tiny, often separable labeled sets early in a run.
    pub fn glm_default(scorer: Scorer, budget: usize, dim: usize, classes: usize, master_seed: u64) -> Self {
        Self {
            scorer,
            budget,
            spec: ModelSpec::softmax(dim, classes),
            training: TrainingConfig {
                optimizer: OptimizerKind::GradientDescent,
                max_iterations: 200,
                step_size: 0.5,
                ..TrainingConfig::default()
            },
            master_seed,
        }
    }

    fn validate(&self, state: &PoolState) -> Result<()> {
        self.spec.validate()?;
        self.training.validate()?;
        if self.budget > state.pool.len() {
            return Err(Error::InvalidArgument(format!(
                "budget {} exceeds pool size {}",
                self.budget,
                state.pool.len()
            )));
        }
        match self.scorer {
            Scorer::BootstrapMi { b, .. } if b < 2 => Err(Error::InvalidArgument("bootstrap-mi needs B >= 2".into())),
            Scorer::EnsembleMi { s } if s < 2 => Err(Error::InvalidArgument("ensemble-mi needs S >= 2".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolState {
    pub labeled: LabeledDataset,
    /// Remaining pool; labels are only read on acquisition.
    pub pool: LabeledDataset,
    pub test: LabeledDataset,
    /// Original pool indices, in acquisition order.
    pub acquired_indices: Vec<usize>,
    /// Original pool index of each remaining pool row.
    pub pool_ids: Vec<usize>,
    pub step: usize,
}

impl PoolState {
    pub fn new(labeled: LabeledDataset, pool: LabeledDataset, test: LabeledDataset) -> Result<Self> {
        if labeled.dim() != pool.dim() || labeled.dim() != test.dim() {
            return Err(Error::InvalidArgument(
                "labeled, pool and test sets differ in dimension".into(),
            ));
        }
        let pool_ids = (0..pool.len()).collect();
        Ok(Self {
            labeled,
            pool,
            test,
            acquired_indices: Vec::new(),
            pool_ids,
            step: 0,
        })
    }
}

fn step_seed(master_seed: u64, step: usize) -> u64 {
    RngStream::aux(master_seed, STEP_TAG + step as u64).derive_seed()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolScores {
    pub scores: Vec<f64>,
    /// True when the labeled set had a single class and scores are random.
    pub fallback: bool,
}

/// One score per remaining pool row, seeded from the master seed and the
/// current step.
pub fn score_pool(state: &PoolState, cfg: &AcquisitionConfig) -> Result<PoolScores> {
    let seed = step_seed(cfg.master_seed, state.step);
    let degenerate = state.labeled.distinct_labels() < 2;
    let scorer = if degenerate { Scorer::Random } else { cfg.scorer };
    let members = match scorer {
        Scorer::Random => {
            let mut rng = RngStream::new(seed, 0).rng();
            let scores = (0..state.pool.len()).map(|_| rng.random::<f64>()).collect();
            return Ok(PoolScores {
                scores,
                fallback: degenerate && cfg.scorer != Scorer::Random,
            });
        }
        Scorer::BootstrapMi { b, scheme } => {
            build_bootstrap_ensemble(&cfg.spec, &state.labeled, b, scheme, &cfg.training, seed)?.members
        }
        Scorer::EnsembleMi { s } => train_deep_ensemble(&cfg.spec, &state.labeled, s, &cfg.training, seed)?,
    };
    let scores = (0..state.pool.len())
        .into_par_iter()
        .map(|i| Ok(mutual_information(&member_predictions(&members, &cfg.spec, state.pool.row(i))?)?.mi))
        .collect::<Result<_>>()?;
    Ok(PoolScores {
        scores,
        fallback: false,
    })
}

/// Index of the largest score, lowest index on ties.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        match best {
            Some(j) if s <= scores[j] => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Moves the argmax pool row into the labeled set and returns its current
/// pool position.
pub fn acquire_next(state: &mut PoolState, scores: &[f64]) -> Result<usize> {
    if state.pool.is_empty() {
        return Err(Error::Empty("pool"));
    }
    if scores.len() != state.pool.len() {
        return Err(Error::DimensionMismatch {
            expected: state.pool.len(),
            actual: scores.len(),
            context: "pool scores",
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("pool scores"));
    }
    let i = argmax(scores).ok_or(Error::Empty("pool"))?;
    let (x, y) = state.pool.remove(i);
    state.labeled.push(&x, y)?;
    state.acquired_indices.push(state.pool_ids.remove(i));
    state.step += 1;
    Ok(i)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub step: usize,
    pub labeled_count: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveRun {
    pub curve: Vec<CurvePoint>,
    pub final_state: PoolState,
    /// Steps whose scores fell back to random.
    pub fallback_steps: Vec<usize>,
    /// Set when a training failure cut the run short; `curve` holds the
    /// steps completed before it.
    pub aborted: Option<Error>,
}

/// Test accuracy of a model fit on the current labeled set.
pub fn evaluate(state: &PoolState, cfg: &AcquisitionConfig) -> Result<f64> {
    let theta = fit_labeled(state, cfg)?;
    let mut correct = 0usize;
    for (x, y) in state.test.iter() {
        if predict_proba(&cfg.spec, &theta, x)?.argmax() == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / state.test.len() as f64)
}

fn fit_labeled(state: &PoolState, cfg: &AcquisitionConfig) -> Result<ParameterVector> {
    let uniform = WeightVector::uniform(state.labeled.len());
    let seed = RngStream::training_seed(step_seed(cfg.master_seed, state.step), 0);
    fit_weighted_mle(&cfg.spec, &state.labeled, &uniform, &cfg.training, seed)
}

/// Evaluates the initial labeled set, then runs `budget` rounds of
/// score, acquire, evaluate.
pub fn run_active_learning(initial: PoolState, cfg: &AcquisitionConfig) -> Result<ActiveRun> {
    cfg.validate(&initial)?;
    let mut state = initial;
    let mut curve = Vec::with_capacity(cfg.budget + 1);
    let mut fallback_steps = Vec::new();
    let push_point = |state: &PoolState, curve: &mut Vec<CurvePoint>| -> Result<()> {
        let accuracy = evaluate(state, cfg)?;
        curve.push(CurvePoint {
            step: state.step,
            labeled_count: state.labeled.len(),
            accuracy,
        });
        Ok(())
    };
    let mut aborted = push_point(&state, &mut curve).err();
    while aborted.is_none() && state.step < cfg.budget {
        let outcome = score_pool(&state, cfg).and_then(|scored| {
            if scored.fallback {
                fallback_steps.push(state.step);
            }
            acquire_next(&mut state, &scored.scores)?;
            push_point(&state, &mut curve)
        });
        aborted = outcome.err();
    }
    Ok(ActiveRun {
        curve,
        final_state: state,
        fallback_steps,
        aborted,
    })
}

/// Isotropic Gaussian classes with means evenly spaced on a circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureTask {
    pub classes: usize,
    pub initial_per_class: usize,
    pub pool_size: usize,
    pub test_size: usize,
    pub radius: f64,
    pub stddev: f64,
}

impl Default for MixtureTask {
    fn default() -> Self {
        Self {
            classes: 4,
            initial_per_class: 2,
            pool_size: 400,
            test_size: 1000,
            radius: 3.0,
            stddev: 1.0,
        }
    }
}

impl MixtureTask {
    fn draw<R: Rng>(&self, rng: &mut R, y: usize) -> [f64; 2] {
        let angle = 2.0 * std::f64::consts::PI * y as f64 / self.classes as f64;
        let e0: f64 = StandardNormal.sample(rng);
        let e1: f64 = StandardNormal.sample(rng);
        [
            self.radius * angle.cos() + self.stddev * e0,
            self.radius * angle.sin() + self.stddev * e1,
        ]
    }

    fn sample<R: Rng>(&self, rng: &mut R, labels: impl Iterator<Item = usize>) -> Result<LabeledDataset> {
        let mut features = Vec::new();
        let mut ys = Vec::new();
        for y in labels {
            features.extend_from_slice(&self.draw(rng, y));
            ys.push(y);
        }
        LabeledDataset::possibly_empty(features, ys, 2, self.classes)
    }

    /// Initial labeled set (balanced), pool and test set for one repetition.
    pub fn generate(&self, seed: RngStream) -> Result<PoolState> {
        if self.classes < 2 || self.initial_per_class == 0 {
            return Err(Error::InvalidArgument(
                "mixture task needs >= 2 classes and labeled points".into(),
            ));
        }
        let mut rng = seed.rng();
        let k = self.classes;
        let labeled = self.sample(&mut rng, (0..k * self.initial_per_class).map(|i| i % k))?;
        let pool_labels: Vec<usize> = (0..self.pool_size).map(|_| rng.random_range(0..k)).collect();
        let pool = self.sample(&mut rng, pool_labels.into_iter())?;
        let test_labels: Vec<usize> = (0..self.test_size).map(|_| rng.random_range(0..k)).collect();
        let test = self.sample(&mut rng, test_labels.into_iter())?;
        PoolState::new(labeled, pool, test)
    }
}

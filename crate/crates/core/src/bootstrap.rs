//! Bootstrap reweighting, weighted maximum likelihood, and the replicate
//! loop that turns one dataset into an ensemble of fitted models.

use std::ops::Deref;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::models::{
    predict_proba, raw_probabilities, train_mlp, weighted_hessian, weighted_log_likelihood, weighted_score, ModelSpec,
    OptimizerKind, ParameterVector, TrainingConfig,
};
use crate::prob::PredictionMatrix;
use crate::rng::{RngStream, RETRY_STREAM_OFFSET, SEED_STREAM_OFFSET};

/// Parameter norm beyond which a GLM fit is declared separated.
pub const SEPARATION_NORM: f64 = 1e6;
const MAX_HALVINGS: usize = 30;
/// Relative objective decrease still treated as a tie for the full Newton
/// step; near the optimum the change is below summation rounding.
const ROUNDING_SLACK: f64 = 1e-13;
/// Largest tolerated share of failed replicates.
pub const MAX_FAILURE_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightScheme {
    /// Flat Dirichlet weights (Bayesian bootstrap).
    #[default]
    Dirichlet,
    /// Classical resampling counts divided by `n`.
    Multinomial,
}

/// Observation weights of one bootstrap replicate, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    scheme: WeightScheme,
}

impl WeightVector {
    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
            scheme: WeightScheme::Multinomial,
        }
    }

    pub fn scheme(&self) -> WeightScheme {
        self.scheme
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

impl Deref for WeightVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.weights
    }
}

/// `n` standard exponentials normalized by their sum.
pub fn sample_dirichlet_weights(n: usize, rng: RngStream) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::Empty("dirichlet weights"));
    }
    let mut r = rng.rng();
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            let e: f64 = Exp1.sample(&mut r);
            e.max(f64::MIN_POSITIVE)
        })
        .collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    Ok(WeightVector {
        weights: w,
        scheme: WeightScheme::Dirichlet,
    })
}

/// Counts of `n` uniform draws over the observations, divided by `n`.
pub fn sample_multinomial_weights(n: usize, rng: RngStream) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::Empty("multinomial weights"));
    }
    let mut r = rng.rng();
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[r.random_range(0..n)] += 1;
    }
    Ok(WeightVector {
        weights: counts.into_iter().map(|c| f64::from(c) / n as f64).collect(),
        scheme: WeightScheme::Multinomial,
    })
}

pub fn sample_weights(scheme: WeightScheme, n: usize, rng: RngStream) -> Result<WeightVector> {
    match scheme {
        WeightScheme::Dirichlet => sample_dirichlet_weights(n, rng),
        WeightScheme::Multinomial => sample_multinomial_weights(n, rng),
    }
}

/// Maximizes `Σ ξ_i ln p̂_{y_i}(x_i; θ)`.
///
/// GLMs with [`OptimizerKind::Newton`] run damped Newton-Raphson until the
/// gradient sup-norm reaches `cfg.gradient_tolerance`. GLMs with gradient
/// descent run a fixed budget of ascent steps from zero. MLP specs go to
/// [`train_mlp`] with `seed`.
pub fn fit_weighted_mle(
    spec: &ModelSpec,
    data: &LabeledDataset,
    xi: &[f64],
    cfg: &TrainingConfig,
    seed: RngStream,
) -> Result<ParameterVector> {
    fit_weighted_mle_from(spec, data, xi, cfg, seed, None)
}

/// [`fit_weighted_mle`] with an optional Newton starting point.
pub fn fit_weighted_mle_from(
    spec: &ModelSpec,
    data: &LabeledDataset,
    xi: &[f64],
    cfg: &TrainingConfig,
    seed: RngStream,
    start: Option<&ParameterVector>,
) -> Result<ParameterVector> {
    spec.validate()?;
    cfg.validate()?;
    if xi.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            actual: xi.len(),
            context: "weight vector",
        });
    }
    if data.dim() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            actual: data.dim(),
            context: "dataset features",
        });
    }
    if !spec.is_glm() {
        return train_mlp(spec, data, xi, cfg, seed);
    }
    match cfg.optimizer {
        OptimizerKind::Newton => {
            let theta = start
                .cloned()
                .unwrap_or_else(|| ParameterVector::zeros(spec.param_count()));
            newton(spec, data, xi, cfg, theta)
        }
        OptimizerKind::GradientDescent => gradient_ascent(spec, data, xi, cfg),
    }
}

fn newton(
    spec: &ModelSpec,
    data: &LabeledDataset,
    xi: &[f64],
    cfg: &TrainingConfig,
    mut theta: ParameterVector,
) -> Result<ParameterVector> {
    let mut objective = weighted_log_likelihood(spec, &theta, data, xi)?;
    let mut grad = weighted_score(spec, &theta, data, xi)?;
    for _ in 0..cfg.max_iterations {
        if grad.amax() <= cfg.gradient_tolerance {
            return separation_check(spec, data, xi, theta);
        }
        let neg_hessian = -weighted_hessian(spec, &theta, data, xi)?;
        let direction = newton_direction(neg_hessian, &grad);
        let current = theta.to_dvector();
        let mut step = 1.0;
        let mut accepted = false;
        let slack = ROUNDING_SLACK * objective.abs().max(1.0);
        for halving in 0..=MAX_HALVINGS {
            let cand = ParameterVector::new((&current + &direction * step).as_slice().to_vec())?;
            let value = weighted_log_likelihood(spec, &cand, data, xi)?;
            if value >= objective || (halving == 0 && value >= objective - slack) {
                theta = cand;
                objective = value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        let norm = theta.to_dvector().norm();
        if norm > SEPARATION_NORM {
            return Err(Error::Separation { norm });
        }
        grad = weighted_score(spec, &theta, data, xi)?;
        if !accepted {
            break;
        }
    }
    if grad.amax() <= cfg.gradient_tolerance {
        separation_check(spec, data, xi, theta)
    } else {
        Err(Error::NonConverged {
            iterations: cfg.max_iterations,
            gradient_norm: grad.amax(),
        })
    }
}

/// Rejects a stationary point that puts more than half its mass on every
/// weighted label. Such a fit separates the data, so no finite maximizer
/// exists; the likelihood flattens out numerically long before the norm
/// bound is reached.
fn separation_check(
    spec: &ModelSpec,
    data: &LabeledDataset,
    xi: &[f64],
    theta: ParameterVector,
) -> Result<ParameterVector> {
    for (i, &w) in xi.iter().enumerate() {
        if w > 0.0 && raw_probabilities(spec, &theta, data.row(i))?[data.labels()[i]] <= 0.5 {
            return Ok(theta);
        }
    }
    Err(Error::Separation {
        norm: theta.to_dvector().norm(),
    })
}

/// Solves `(-H) d = g`, falling back to a ridge and then to the gradient
/// when the negative Hessian is not positive definite.
fn newton_direction(neg_hessian: DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    if let Some(ch) = Cholesky::new(neg_hessian.clone()) {
        return ch.solve(grad);
    }
    let p = neg_hessian.nrows();
    let ridge = 1e-8 * neg_hessian.trace().abs().max(1.0);
    if let Some(ch) = Cholesky::new(neg_hessian + DMatrix::identity(p, p) * ridge) {
        return ch.solve(grad);
    }
    grad.clone()
}

fn gradient_ascent(
    spec: &ModelSpec,
    data: &LabeledDataset,
    xi: &[f64],
    cfg: &TrainingConfig,
) -> Result<ParameterVector> {
    let mut theta = DVector::zeros(spec.param_count());
    for epoch in 0..cfg.max_iterations {
        let current = ParameterVector::new(theta.as_slice().to_vec()).map_err(|_| Error::Divergence { epoch })?;
        let grad = weighted_score(spec, &current, data, xi)?;
        if grad.amax() <= cfg.gradient_tolerance {
            break;
        }
        theta += grad * cfg.step_size;
    }
    ParameterVector::new(theta.as_slice().to_vec()).map_err(|_| Error::Divergence {
        epoch: cfg.max_iterations,
    })
}

/// `B` fitted replicates and the weights that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapEnsemble {
    pub members: Vec<ParameterVector>,
    pub weight_draws: Vec<WeightVector>,
    pub scheme: WeightScheme,
    pub master_seed: u64,
    /// Replicate indices that failed twice and were dropped.
    pub failed: Vec<usize>,
}

impl BootstrapEnsemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn fit_replicate(
    spec: &ModelSpec,
    data: &LabeledDataset,
    scheme: WeightScheme,
    cfg: &TrainingConfig,
    weight_stream: RngStream,
    train_stream: RngStream,
    warm: Option<&ParameterVector>,
) -> Result<(ParameterVector, WeightVector)> {
    let xi = sample_weights(scheme, data.len(), weight_stream)?;
    let theta = fit_weighted_mle_from(spec, data, &xi, cfg, train_stream, warm)?;
    Ok((theta, xi))
}

/// Runs the replicate loop: replicate `b` draws its weights from stream `b`
/// and (for MLPs) trains from stream `2^32 + b`. A replicate that fails
/// numerically is retried once on fresh streams, then dropped. More than
/// 10% dropped replicates is an error.
///
/// Replicates run in parallel; results do not depend on the thread count.
pub fn build_bootstrap_ensemble(
    spec: &ModelSpec,
    data: &LabeledDataset,
    b: usize,
    scheme: WeightScheme,
    cfg: &TrainingConfig,
    master_seed: u64,
) -> Result<BootstrapEnsemble> {
    if b < 2 {
        return Err(Error::InvalidArgument("a bootstrap ensemble needs B >= 2".into()));
    }
    spec.validate()?;
    cfg.validate()?;
    let warm = if spec.is_glm() && cfg.optimizer == OptimizerKind::Newton {
        let uniform = WeightVector::uniform(data.len());
        Some(fit_weighted_mle(
            spec,
            data,
            &uniform,
            cfg,
            RngStream::new(master_seed, 0),
        )?)
    } else {
        None
    };
    let outcomes: Vec<Result<Option<(ParameterVector, WeightVector)>>> = (0..b as u64)
        .into_par_iter()
        .map(|r| {
            let first = fit_replicate(
                spec,
                data,
                scheme,
                cfg,
                RngStream::replicate(master_seed, r),
                RngStream::new(master_seed, SEED_STREAM_OFFSET + r),
                warm.as_ref(),
            );
            match first {
                Ok(fit) => Ok(Some(fit)),
                Err(e) if e.is_numerical() => {
                    match fit_replicate(
                        spec,
                        data,
                        scheme,
                        cfg,
                        RngStream::new(master_seed, RETRY_STREAM_OFFSET + r),
                        RngStream::new(master_seed, RETRY_STREAM_OFFSET + SEED_STREAM_OFFSET + r),
                        warm.as_ref(),
                    ) {
                        Ok(fit) => Ok(Some(fit)),
                        Err(e) if e.is_numerical() => Ok(None),
                        Err(e) => Err(e),
                    }
                }
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut members = Vec::with_capacity(b);
    let mut weight_draws = Vec::with_capacity(b);
    let mut failed = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome? {
            Some((theta, xi)) => {
                members.push(theta);
                weight_draws.push(xi);
            }
            None => failed.push(r),
        }
    }
    if failed.len() as f64 > MAX_FAILURE_FRACTION * b as f64 || members.len() < 2 {
        return Err(Error::TooManyFailures {
            failed: failed.len(),
            total: b,
        });
    }
    Ok(BootstrapEnsemble {
        members,
        weight_draws,
        scheme,
        master_seed,
        failed,
    })
}

/// Row `b` is member `b`'s prediction at `x`.
pub fn member_predictions(members: &[ParameterVector], spec: &ModelSpec, x: &[f64]) -> Result<PredictionMatrix> {
    PredictionMatrix::new(
        members
            .iter()
            .map(|theta| predict_proba(spec, theta, x))
            .collect::<Result<_>>()?,
    )
}

pub fn ensemble_predictions(ensemble: &BootstrapEnsemble, spec: &ModelSpec, x: &[f64]) -> Result<PredictionMatrix> {
    member_predictions(&ensemble.members, spec, x)
}

/// Models indexed by (bootstrap dataset, training seed).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrid {
    /// `cells[b][s]`.
    pub cells: Vec<Vec<ParameterVector>>,
    pub weight_draws: Vec<WeightVector>,
}

/// Trains one model per (bootstrap weights `b`, training seed `s`). Row `b`
/// shares the weights of replicate stream `b`; column `s` shares training
/// stream `2^32 + s`.
pub fn train_seed_grid(
    spec: &ModelSpec,
    data: &LabeledDataset,
    b: usize,
    s: usize,
    scheme: WeightScheme,
    cfg: &TrainingConfig,
    master_seed: u64,
) -> Result<ModelGrid> {
    if b < 2 || s < 2 {
        return Err(Error::InvalidArgument("a model grid needs B, S >= 2".into()));
    }
    let weight_draws: Vec<WeightVector> = (0..b as u64)
        .map(|r| sample_weights(scheme, data.len(), RngStream::replicate(master_seed, r)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..b).flat_map(|r| (0..s).map(move |c| (r, c))).collect();
    let fits: Vec<ParameterVector> = jobs
        .par_iter()
        .map(|&(r, c)| {
            fit_weighted_mle(
                spec,
                data,
                &weight_draws[r],
                cfg,
                RngStream::training_seed(master_seed, c as u64),
            )
        })
        .collect::<Result<_>>()?;
    let cells = fits.chunks(s).map(<[ParameterVector]>::to_vec).collect();
    Ok(ModelGrid { cells, weight_draws })
}

/// `S` models fit on the full, uniformly weighted data, one per training
/// seed `2^32 + s`.
pub fn train_deep_ensemble(
    spec: &ModelSpec,
    data: &LabeledDataset,
    s: usize,
    cfg: &TrainingConfig,
    master_seed: u64,
) -> Result<Vec<ParameterVector>> {
    if s < 2 {
        return Err(Error::InvalidArgument("a deep ensemble needs S >= 2".into()));
    }
    let uniform = WeightVector::uniform(data.len());
    (0..s as u64)
        .into_par_iter()
        .map(|c| fit_weighted_mle(spec, data, &uniform, cfg, RngStream::training_seed(master_seed, c)))
        .collect()
}

//! Parametric classifiers with likelihood, score and Hessian access.
//!
//! Parameter layouts:
//!
//! * binary logistic: `[bias, w_1 .. w_d]` (bias only with an intercept);
//!   the sigmoid gives the class-1 probability.
//! * softmax: `K - 1` blocks of the same shape, one per non-reference class;
//!   class `K - 1` has its logit pinned at zero so the model is identifiable.
//! * mlp: for each layer in order, the `out x in` weight matrix row-major
//!   followed by the `out` biases. Hidden layers use `tanh`; the output layer
//!   has `K` logits. The last layers occupy the tail of the vector.

mod glm;
mod mlp;

use nalgebra::{DMatrix, DVector};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::prob::{clip_and_normalize, ProbabilityVector, EPS_CLIP};
use crate::rng::RngStream;

pub use mlp::{train_mlp, MlpLayer};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelKind {
    BinaryLogistic,
    Softmax,
    Mlp { hidden: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub class_count: usize,
    /// Bias terms for the GLMs. MLP layers always carry biases.
    pub intercept: bool,
}

impl ModelSpec {
    pub fn binary_logistic(input_dim: usize) -> Self {
        Self {
            kind: ModelKind::BinaryLogistic,
            input_dim,
            class_count: 2,
            intercept: true,
        }
    }

    pub fn softmax(input_dim: usize, class_count: usize) -> Self {
        Self {
            kind: ModelKind::Softmax,
            input_dim,
            class_count,
            intercept: true,
        }
    }

    pub fn mlp(input_dim: usize, class_count: usize, hidden: Vec<usize>) -> Self {
        Self {
            kind: ModelKind::Mlp { hidden },
            input_dim,
            class_count,
            intercept: true,
        }
    }

    pub fn without_intercept(mut self) -> Self {
        self.intercept = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::InvalidArgument("at least two classes are required".into()));
        }
        match &self.kind {
            ModelKind::BinaryLogistic if self.class_count != 2 => Err(Error::InvalidArgument(
                "binary logistic regression needs exactly two classes".into(),
            )),
            ModelKind::Mlp { hidden } if hidden.contains(&0) => {
                Err(Error::InvalidArgument("mlp layer widths must be positive".into()))
            }
            ModelKind::Mlp { .. } if self.input_dim == 0 => {
                Err(Error::InvalidArgument("mlp needs at least one input".into()))
            }
            _ if self.param_count() == 0 => Err(Error::InvalidArgument("model has no parameters".into())),
            _ => Ok(()),
        }
    }

    pub fn is_glm(&self) -> bool {
        !matches!(self.kind, ModelKind::Mlp { .. })
    }

    /// Width of the GLM design vector `(1, x)`.
    pub(crate) fn design_width(&self) -> usize {
        self.input_dim + usize::from(self.intercept)
    }

    pub fn param_count(&self) -> usize {
        match &self.kind {
            ModelKind::BinaryLogistic => self.design_width(),
            ModelKind::Softmax => (self.class_count - 1) * self.design_width(),
            ModelKind::Mlp { .. } => self.mlp_layers().iter().map(MlpLayer::param_count).sum(),
        }
    }

    /// Layer shapes of an MLP spec, input to output.
    pub fn mlp_layers(&self) -> Vec<MlpLayer> {
        let ModelKind::Mlp { hidden } = &self.kind else {
            return Vec::new();
        };
        let mut widths = vec![self.input_dim];
        widths.extend(hidden);
        widths.push(self.class_count);
        widths
            .windows(2)
            .map(|w| MlpLayer {
                inputs: w[0],
                outputs: w[1],
            })
            .collect()
    }

    /// Number of parameters in the last `layers` layers of an MLP.
    pub fn trailing_param_count(&self, layers: usize) -> usize {
        self.mlp_layers()
            .iter()
            .rev()
            .take(layers)
            .map(MlpLayer::param_count)
            .sum()
    }
}

/// Flat vector of model parameters with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector"));
        }
        Ok(Self(theta))
    }

    pub fn zeros(p: usize) -> Self {
        Self(vec![0.0; p])
    }

    pub fn for_spec(spec: &ModelSpec, theta: Vec<f64>) -> Result<Self> {
        check_len(spec, theta.len())?;
        Self::new(theta)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    /// Damped Newton-Raphson; GLMs only.
    Newton,
    /// Fixed-budget full-batch (or minibatch, for MLPs) gradient ascent.
    GradientDescent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub optimizer: OptimizerKind,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_size: f64,
    pub epochs: usize,
    /// `None` trains full batch.
    pub batch_size: Option<usize>,
    /// MLP weights start at `N(0, init_scale^2 / fan_in)`.
    pub init_scale: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Newton,
            max_iterations: 100,
            gradient_tolerance: 1e-8,
            step_size: 0.1,
            epochs: 500,
            batch_size: None,
            init_scale: 1.0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_tolerance > 0.0 && self.step_size > 0.0 && self.init_scale > 0.0) {
            return Err(Error::InvalidArgument(
                "tolerances, step size and init scale must be positive".into(),
            ));
        }
        if self.max_iterations == 0 || self.epochs == 0 || self.batch_size == Some(0) {
            return Err(Error::InvalidArgument("iteration counts must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_len(spec: &ModelSpec, len: usize) -> Result<()> {
    let p = spec.param_count();
    if len != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            actual: len,
            context: "parameter vector",
        });
    }
    Ok(())
}

fn check_inputs(spec: &ModelSpec, theta: &ParameterVector, x: &[f64]) -> Result<()> {
    check_len(spec, theta.len())?;
    if x.len() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            actual: x.len(),
            context: "feature vector",
        });
    }
    if theta.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("parameter vector"));
    }
    Ok(())
}

/// Unclipped class probabilities.
pub fn raw_probabilities(spec: &ModelSpec, theta: &ParameterVector, x: &[f64]) -> Result<Vec<f64>> {
    check_inputs(spec, theta, x)?;
    Ok(match spec.kind {
        ModelKind::BinaryLogistic => {
            let p1 = glm::sigmoid(glm::linear(spec, theta.as_slice(), x));
            vec![1.0 - p1, p1]
        }
        ModelKind::Softmax => glm::softmax_probs(spec, theta.as_slice(), x),
        ModelKind::Mlp { .. } => mlp::probabilities(spec, theta.as_slice(), x),
    })
}

pub fn predict_proba(spec: &ModelSpec, theta: &ParameterVector, x: &[f64]) -> Result<ProbabilityVector> {
    clip_and_normalize(&raw_probabilities(spec, theta, x)?)
}

/// `ln p̂_y(x; θ)` with the clipped probability.
pub fn log_prob(spec: &ModelSpec, theta: &ParameterVector, x: &[f64], y: usize) -> Result<f64> {
    check_label(spec, y)?;
    if spec.kind == ModelKind::BinaryLogistic {
        check_inputs(spec, theta, x)?;
        let t = glm::linear(spec, theta.as_slice(), x);
        let p = glm::sigmoid(if y == 1 { t } else { -t });
        return Ok(p.clamp(EPS_CLIP, 1.0 - EPS_CLIP).ln());
    }
    Ok(predict_proba(spec, theta, x)?.get(y).ln())
}

fn check_label(spec: &ModelSpec, y: usize) -> Result<()> {
    if y >= spec.class_count {
        return Err(Error::InvalidArgument(format!(
            "label {y} out of range for {} classes",
            spec.class_count
        )));
    }
    Ok(())
}

fn check_weights(data: &LabeledDataset, xi: &[f64]) -> Result<()> {
    if xi.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            actual: xi.len(),
            context: "weight vector",
        });
    }
    Ok(())
}

/// `Σ ξ_i ln p̂_{y_i}(x_i; θ)`. Terms with zero weight are skipped.
pub fn weighted_log_likelihood(
    spec: &ModelSpec,
    theta: &ParameterVector,
    data: &LabeledDataset,
    xi: &[f64],
) -> Result<f64> {
    check_weights(data, xi)?;
    let mut total = 0.0;
    for ((x, y), &w) in data.iter().zip(xi) {
        if w != 0.0 {
            total += w * log_prob(spec, theta, x, y)?;
        }
    }
    Ok(total)
}

/// Gradient of `ln p̂_y(x; θ)` with respect to `θ`.
pub fn score(spec: &ModelSpec, theta: &ParameterVector, x: &[f64], y: usize) -> Result<DVector<f64>> {
    check_inputs(spec, theta, x)?;
    check_label(spec, y)?;
    Ok(match spec.kind {
        ModelKind::BinaryLogistic | ModelKind::Softmax => glm::score(spec, theta.as_slice(), x, y),
        ModelKind::Mlp { .. } => DVector::from_vec(mlp::score::<f64>(spec, theta.as_slice(), x, y)),
    })
}

/// Hessian of `ln p̂_y(x; θ)`.
pub fn log_prob_hessian(spec: &ModelSpec, theta: &ParameterVector, x: &[f64], y: usize) -> Result<DMatrix<f64>> {
    log_prob_hessian_block(spec, theta, x, y, 0)
}

/// Hessian of `ln p̂_y(x; θ)` restricted to parameters `block_start..p`.
pub fn log_prob_hessian_block(
    spec: &ModelSpec,
    theta: &ParameterVector,
    x: &[f64],
    y: usize,
    block_start: usize,
) -> Result<DMatrix<f64>> {
    check_inputs(spec, theta, x)?;
    check_label(spec, y)?;
    let p = theta.len();
    if block_start >= p {
        return Err(Error::InvalidArgument("empty parameter block".into()));
    }
    Ok(match spec.kind {
        ModelKind::BinaryLogistic | ModelKind::Softmax => {
            let full = glm::hessian(spec, theta.as_slice(), x);
            full.view((block_start, block_start), (p - block_start, p - block_start))
                .into_owned()
        }
        ModelKind::Mlp { .. } => mlp::hessian_block(spec, theta.as_slice(), x, y, block_start),
    })
}

/// Jacobian `∂p̂/∂θ` as a `K x p` matrix.
///
/// Row `j` is `p̂_j · ∂ ln p̂_j/∂θ`, using unclipped probabilities so the
/// rows sum to zero.
pub fn prediction_gradient(spec: &ModelSpec, theta: &ParameterVector, x: &[f64]) -> Result<DMatrix<f64>> {
    let probs = raw_probabilities(spec, theta, x)?;
    let mut jac = DMatrix::zeros(spec.class_count, theta.len());
    for (j, &pj) in probs.iter().enumerate() {
        let s = score(spec, theta, x, j)?;
        jac.row_mut(j).copy_from(&(s * pj).transpose());
    }
    Ok(jac)
}

/// `Σ ξ_i ψ_θ(x_i, y_i)`.
pub fn weighted_score(
    spec: &ModelSpec,
    theta: &ParameterVector,
    data: &LabeledDataset,
    xi: &[f64],
) -> Result<DVector<f64>> {
    check_weights(data, xi)?;
    let mut g = DVector::zeros(theta.len());
    for ((x, y), &w) in data.iter().zip(xi) {
        if w != 0.0 {
            g += score(spec, theta, x, y)? * w;
        }
    }
    Ok(g)
}

/// `Σ ξ_i ∇² ln p̂_{y_i}(x_i; θ)` over parameters `block_start..p`.
pub fn weighted_hessian_block(
    spec: &ModelSpec,
    theta: &ParameterVector,
    data: &LabeledDataset,
    xi: &[f64],
    block_start: usize,
) -> Result<DMatrix<f64>> {
    check_weights(data, xi)?;
    let q = theta.len().saturating_sub(block_start);
    let mut h = DMatrix::zeros(q, q);
    for ((x, y), &w) in data.iter().zip(xi) {
        if w != 0.0 {
            h += log_prob_hessian_block(spec, theta, x, y, block_start)? * w;
        }
    }
    Ok(h)
}

pub fn weighted_hessian(
    spec: &ModelSpec,
    theta: &ParameterVector,
    data: &LabeledDataset,
    xi: &[f64],
) -> Result<DMatrix<f64>> {
    weighted_hessian_block(spec, theta, data, xi, 0)
}

/// Initial MLP parameters drawn from `seed`.
pub fn init_mlp(spec: &ModelSpec, cfg: &TrainingConfig, seed: RngStream) -> Result<ParameterVector> {
    mlp::init(spec, cfg, seed)
}

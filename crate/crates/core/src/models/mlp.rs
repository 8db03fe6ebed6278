use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use super::{check_weights, ModelSpec, ParameterVector, TrainingConfig};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpLayer {
    pub inputs: usize,
    pub outputs: usize,
}

impl MlpLayer {
    pub fn param_count(&self) -> usize {
        self.outputs * (self.inputs + 1)
    }
}

/// Arithmetic needed by the forward and backward passes. Implemented for
/// `f64` and for forward-mode dual numbers, which turns the backward pass
/// into an exact Hessian-vector product.
trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
{
    fn cst(v: f64) -> Self;
    fn re(self) -> f64;
    fn exp(self) -> Self;
    fn tanh(self) -> Self;
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn re(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dual {
    re: f64,
    du: f64,
}

impl Add for Dual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual {
            re: self.re + o.re,
            du: self.du + o.du,
        }
    }
}

impl Sub for Dual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual {
            re: self.re - o.re,
            du: self.du - o.du,
        }
    }
}

impl Mul for Dual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual {
            re: self.re * o.re,
            du: self.du * o.re + self.re * o.du,
        }
    }
}

impl Div for Dual {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        Dual {
            re: self.re / o.re,
            du: (self.du * o.re - self.re * o.du) / (o.re * o.re),
        }
    }
}

impl Neg for Dual {
    type Output = Self;
    fn neg(self) -> Self {
        Dual {
            re: -self.re,
            du: -self.du,
        }
    }
}

impl AddAssign for Dual {
    fn add_assign(&mut self, o: Self) {
        self.re += o.re;
        self.du += o.du;
    }
}

impl Scalar for Dual {
    fn cst(v: f64) -> Self {
        Dual { re: v, du: 0.0 }
    }
    fn re(self) -> f64 {
        self.re
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual { re: e, du: self.du * e }
    }
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        Dual {
            re: t,
            du: self.du * (1.0 - t * t),
        }
    }
}

struct Forward<T> {
    /// Input followed by every hidden activation.
    activations: Vec<Vec<T>>,
    logits: Vec<T>,
}

fn forward<T: Scalar>(layers: &[MlpLayer], theta: &[T], x: &[f64]) -> Forward<T> {
    let mut activations = vec![x.iter().map(|&v| T::cst(v)).collect::<Vec<T>>()];
    let mut offset = 0;
    let mut logits = Vec::new();
    for (l, layer) in layers.iter().enumerate() {
        let w = &theta[offset..offset + layer.outputs * layer.inputs];
        let b = &theta[offset + layer.outputs * layer.inputs..offset + layer.param_count()];
        offset += layer.param_count();
        let a = activations.last().expect("input layer");
        let z: Vec<T> = (0..layer.outputs)
            .map(|o| {
                let mut acc = b[o];
                for (wi, ai) in w[o * layer.inputs..(o + 1) * layer.inputs].iter().zip(a) {
                    acc += *wi * *ai;
                }
                acc
            })
            .collect();
        if l + 1 == layers.len() {
            logits = z;
        } else {
            activations.push(z.into_iter().map(T::tanh).collect());
        }
    }
    Forward { activations, logits }
}

fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().map(|v| v.re()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - T::cst(max)).exp()).collect();
    let mut sum = T::cst(0.0);
    for &e in &exps {
        sum += e;
    }
    exps.into_iter().map(|e| e / sum).collect()
}

pub(super) fn probabilities(spec: &ModelSpec, theta: &[f64], x: &[f64]) -> Vec<f64> {
    let fwd = forward(&spec.mlp_layers(), theta, x);
    softmax(&fwd.logits)
}

/// `ln p̂_y` computed stably from the logits.
fn log_prob_raw(logits: &[f64], y: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits[y] - lse
}

/// Backpropagated gradient of `ln p̂_y` with respect to all parameters.
#[allow(private_bounds)]
pub(super) fn score<T: Scalar>(spec: &ModelSpec, theta: &[T], x: &[f64], y: usize) -> Vec<T> {
    let layers = spec.mlp_layers();
    let fwd = forward(&layers, theta, x);
    score_from_forward(&layers, theta, &fwd, y).1
}

fn score_from_forward<T: Scalar>(layers: &[MlpLayer], theta: &[T], fwd: &Forward<T>, y: usize) -> (Vec<T>, Vec<T>) {
    let probs = softmax(&fwd.logits);
    let mut delta: Vec<T> = probs
        .iter()
        .enumerate()
        .map(|(k, &p)| T::cst(f64::from(u8::from(k == y))) - p)
        .collect();
    let mut grad = vec![T::cst(0.0); theta.len()];
    let mut end = theta.len();
    for (l, layer) in layers.iter().enumerate().rev() {
        let start = end - layer.param_count();
        let wlen = layer.outputs * layer.inputs;
        let a = &fwd.activations[l];
        for o in 0..layer.outputs {
            for i in 0..layer.inputs {
                grad[start + o * layer.inputs + i] = delta[o] * a[i];
            }
            grad[start + wlen + o] = delta[o];
        }
        if l > 0 {
            let w = &theta[start..start + wlen];
            delta = (0..layer.inputs)
                .map(|i| {
                    let mut acc = T::cst(0.0);
                    for o in 0..layer.outputs {
                        acc += w[o * layer.inputs + i] * delta[o];
                    }
                    acc * (T::cst(1.0) - a[i] * a[i])
                })
                .collect();
        }
        end = start;
    }
    (probs, grad)
}

/// Exact Hessian of `ln p̂_y` over parameters `block_start..p`, one
/// dual-number backward pass per column.
pub(super) fn hessian_block(spec: &ModelSpec, theta: &[f64], x: &[f64], y: usize, block_start: usize) -> DMatrix<f64> {
    let p = theta.len();
    let q = p - block_start;
    let mut h = DMatrix::zeros(q, q);
    let mut dual: Vec<Dual> = theta.iter().map(|&v| Dual::cst(v)).collect();
    for j in block_start..p {
        dual[j].du = 1.0;
        let s = score::<Dual>(spec, &dual, x, y);
        for (r, v) in s[block_start..].iter().enumerate() {
            h[(r, j - block_start)] = v.du;
        }
        dual[j].du = 0.0;
    }
    (&h + h.transpose()) * 0.5
}

pub(super) fn init(spec: &ModelSpec, cfg: &TrainingConfig, seed: RngStream) -> Result<ParameterVector> {
    spec.validate()?;
    let mut rng = seed.rng();
    Ok(ParameterVector(init_with(spec, cfg, &mut rng)))
}

fn init_with<R: rand::Rng>(spec: &ModelSpec, cfg: &TrainingConfig, rng: &mut R) -> Vec<f64> {
    let mut theta = Vec::with_capacity(spec.param_count());
    for layer in spec.mlp_layers() {
        let scale = cfg.init_scale / (layer.inputs as f64).sqrt();
        for _ in 0..layer.outputs * layer.inputs {
            let z: f64 = StandardNormal.sample(rng);
            theta.push(scale * z);
        }
        theta.extend(std::iter::repeat_n(0.0, layer.outputs));
    }
    theta
}

/// Weighted loss `-Σ ξ_i ln p̂_{y_i}` and its ascent direction `Σ ξ_i ψ_i`
/// over the rows in `idx`.
fn loss_and_score(
    layers: &[MlpLayer],
    theta: &[f64],
    data: &LabeledDataset,
    xi: &[f64],
    idx: &[usize],
) -> (f64, Vec<f64>) {
    let mut loss = 0.0;
    let mut g = vec![0.0; theta.len()];
    for &i in idx {
        let w = xi[i];
        if w == 0.0 {
            continue;
        }
        let y = data.label(i);
        let fwd = forward(layers, theta, data.row(i));
        loss -= w * log_prob_raw(&fwd.logits, y);
        let (_, s) = score_from_forward(layers, theta, &fwd, y);
        for (gj, sj) in g.iter_mut().zip(&s) {
            *gj += w * sj;
        }
    }
    (loss, g)
}

/// Trains an MLP by gradient ascent on `Σ ξ_i ln p̂_{y_i}(x_i; θ)`.
///
/// Initialization and minibatch order come only from `seed`, so the result
/// is a deterministic function of `(data, xi, cfg, seed)`.
pub fn train_mlp(
    spec: &ModelSpec,
    data: &LabeledDataset,
    xi: &[f64],
    cfg: &TrainingConfig,
    seed: RngStream,
) -> Result<ParameterVector> {
    if spec.is_glm() {
        return Err(Error::InvalidArgument("train_mlp needs an mlp spec".into()));
    }
    spec.validate()?;
    cfg.validate()?;
    check_weights(data, xi)?;
    if data.dim() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            actual: data.dim(),
            context: "dataset features",
        });
    }
    let layers = spec.mlp_layers();
    let mut rng = seed.rng();
    let mut theta = init_with(spec, cfg, &mut rng);
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let batch = cfg.batch_size.unwrap_or(n).min(n).max(1);
    for epoch in 0..cfg.epochs {
        if batch < n {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let (loss, g) = loss_and_score(&layers, &theta, data, xi, chunk);
            let scale = cfg.step_size * n as f64 / chunk.len() as f64;
            for (t, gj) in theta.iter_mut().zip(&g) {
                *t += scale * gj;
            }
            epoch_loss += loss;
        }
        if !epoch_loss.is_finite() || theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
    }
    Ok(ParameterVector(theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::weighted_score;

    fn toy() -> LabeledDataset {
        let mut rng = RngStream::new(5, 0).rng();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let y = i % 3;
            let cx = [-1.0, 1.0, 0.0][y];
            let cy = [0.0, 0.0, 1.5][y];
            let dx: f64 = StandardNormal.sample(&mut rng);
            let dy: f64 = StandardNormal.sample(&mut rng);
            rows.push(vec![cx + 0.7 * dx, cy + 0.7 * dy]);
            labels.push(y);
        }
        LabeledDataset::from_rows(&rows, labels, 3).unwrap()
    }

    fn quick_cfg() -> TrainingConfig {
        TrainingConfig {
            optimizer: super::super::OptimizerKind::GradientDescent,
            epochs: 60,
            step_size: 0.3,
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn training_is_deterministic() {
        let spec = ModelSpec::mlp(2, 3, vec![6]);
        let data = toy();
        let xi = vec![1.0 / data.len() as f64; data.len()];
        let a = train_mlp(&spec, &data, &xi, &quick_cfg(), RngStream::training_seed(1, 0)).unwrap();
        let b = train_mlp(&spec, &data, &xi, &quick_cfg(), RngStream::training_seed(1, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seeds_change_parameters() {
        let spec = ModelSpec::mlp(2, 3, vec![6]);
        let data = toy();
        let xi = vec![1.0 / data.len() as f64; data.len()];
        let a = train_mlp(&spec, &data, &xi, &quick_cfg(), RngStream::training_seed(1, 0)).unwrap();
        let b = train_mlp(&spec, &data, &xi, &quick_cfg(), RngStream::training_seed(1, 1)).unwrap();
        assert!(a.as_slice().iter().zip(b.as_slice()).any(|(u, v)| (u - v).abs() > 1e-9));
    }

    #[test]
    fn minibatch_training_is_deterministic() {
        let spec = ModelSpec::mlp(2, 3, vec![6]);
        let data = toy();
        let xi = vec![1.0 / data.len() as f64; data.len()];
        let cfg = TrainingConfig {
            batch_size: Some(8),
            ..quick_cfg()
        };
        let a = train_mlp(&spec, &data, &xi, &cfg, RngStream::training_seed(2, 0)).unwrap();
        let b = train_mlp(&spec, &data, &xi, &cfg, RngStream::training_seed(2, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_reduces_the_score() {
        let spec = ModelSpec::mlp(2, 3, vec![6]);
        let data = toy();
        let xi = vec![1.0 / data.len() as f64; data.len()];
        let seed = RngStream::training_seed(3, 0);
        let start = init(&spec, &quick_cfg(), seed).unwrap();
        let end = train_mlp(&spec, &data, &xi, &quick_cfg(), seed).unwrap();
        let g0 = weighted_score(&spec, &start, &data, &xi).unwrap().norm();
        let g1 = weighted_score(&spec, &end, &data, &xi).unwrap().norm();
        assert!(g1 < g0);
    }

    #[test]
    fn divergence_is_reported() {
        let spec = ModelSpec::mlp(2, 3, vec![6]);
        let data = toy();
        let xi = vec![1.0 / data.len() as f64; data.len()];
        let cfg = TrainingConfig {
            step_size: f64::MAX,
            ..quick_cfg()
        };
        let err = train_mlp(&spec, &data, &xi, &cfg, RngStream::training_seed(1, 0)).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn rejects_glm_spec() {
        let data = toy();
        let xi = vec![1.0 / data.len() as f64; data.len()];
        assert!(train_mlp(
            &ModelSpec::softmax(2, 3),
            &data,
            &xi,
            &quick_cfg(),
            RngStream::new(0, 0)
        )
        .is_err());
    }
}

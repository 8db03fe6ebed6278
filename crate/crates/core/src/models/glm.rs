use nalgebra::{DMatrix, DVector};

use super::{ModelKind, ModelSpec};

pub(super) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Design vector `(1, x)` or `x`.
fn design(spec: &ModelSpec, x: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(spec.design_width());
    if spec.intercept {
        z.push(1.0);
    }
    z.extend_from_slice(x);
    z
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

pub(super) fn linear(spec: &ModelSpec, theta: &[f64], x: &[f64]) -> f64 {
    if spec.intercept {
        theta[0] + dot(&theta[1..], x)
    } else {
        dot(theta, x)
    }
}

pub(super) fn softmax_probs(spec: &ModelSpec, theta: &[f64], x: &[f64]) -> Vec<f64> {
    let z = design(spec, x);
    let q = z.len();
    let logits: Vec<f64> = theta
        .chunks_exact(q)
        .map(|w| dot(w, &z))
        .chain(std::iter::once(0.0))
        .collect();
    softmax(&logits)
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn probs(spec: &ModelSpec, theta: &[f64], x: &[f64]) -> Vec<f64> {
    match spec.kind {
        ModelKind::BinaryLogistic => {
            let p1 = sigmoid(linear(spec, theta, x));
            vec![1.0 - p1, p1]
        }
        _ => softmax_probs(spec, theta, x),
    }
}

pub(super) fn score(spec: &ModelSpec, theta: &[f64], x: &[f64], y: usize) -> DVector<f64> {
    let z = design(spec, x);
    let p = probs(spec, theta, x);
    match spec.kind {
        ModelKind::BinaryLogistic => {
            let resid = y as f64 - p[1];
            DVector::from_iterator(z.len(), z.iter().map(|v| resid * v))
        }
        _ => {
            let q = z.len();
            let mut g = DVector::zeros(theta.len());
            for k in 0..spec.class_count - 1 {
                let resid = f64::from(u8::from(y == k)) - p[k];
                for (j, v) in z.iter().enumerate() {
                    g[k * q + j] = resid * v;
                }
            }
            g
        }
    }
}

/// Hessian of `ln p̂_y`; for canonical-link GLMs it does not depend on `y`.
pub(super) fn hessian(spec: &ModelSpec, theta: &[f64], x: &[f64]) -> DMatrix<f64> {
    let z = DVector::from_vec(design(spec, x));
    let zz = &z * z.transpose();
    let p = probs(spec, theta, x);
    match spec.kind {
        ModelKind::BinaryLogistic => zz * (-p[1] * (1.0 - p[1])),
        _ => {
            let q = z.len();
            let m = spec.class_count - 1;
            let mut h = DMatrix::zeros(m * q, m * q);
            for k in 0..m {
                for l in 0..m {
                    let c = if k == l { p[k] * (1.0 - p[k]) } else { -p[k] * p[l] };
                    h.view_mut((k * q, l * q), (q, q)).copy_from(&(&zz * -c));
                }
            }
            h
        }
    }
}

//! First-order asymptotics of the mutual information.
//!
//! For a correctly specified model, MI at a test point behaves like
//! `(1 / 2n) Σ_k σ_k² / p̂_k(x; θ0)`, where `σ_k²` is the delta-method
//! variance of the class-`k` prediction under the inverse Fisher
//! information.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::SymmetricSolver;
use crate::models::{log_prob_hessian, raw_probabilities, score, ModelSpec, ParameterVector};
use crate::prob::ProbabilityVector;
use crate::rng::RngStream;

pub use crate::models::prediction_gradient;

/// Fisher matrices with a larger condition number are treated as singular.
pub const MAX_FISHER_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherMode {
    /// Conditional information averaged over features (GLMs only).
    Analytic,
    /// Average of `ψψᵀ` with labels drawn from the model at `θ0`.
    ScoreOuterProduct { seed: RngStream },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherInformation {
    pub matrix: DMatrix<f64>,
    pub theta0: ParameterVector,
    pub sample_count_used: usize,
}

impl FisherInformation {
    pub fn condition_number(&self) -> f64 {
        SymmetricSolver::new(&self.matrix, f64::INFINITY, false)
            .map(|s| s.condition())
            .unwrap_or(f64::INFINITY)
    }

    /// Inverse through a symmetric eigendecomposition; fails rather than
    /// regularizing when the matrix is ill-conditioned.
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        Ok(SymmetricSolver::new(&self.matrix, MAX_FISHER_CONDITION, true)?.inverse())
    }
}

/// Fisher information at `theta0`, averaged over `n_rows` feature rows
/// stored row-major in `features`.
pub fn fisher_information(
    spec: &ModelSpec,
    theta0: &ParameterVector,
    features: &[f64],
    n_rows: usize,
    mode: FisherMode,
) -> Result<FisherInformation> {
    spec.validate()?;
    let d = spec.input_dim;
    if features.len() != n_rows * d {
        return Err(Error::DimensionMismatch {
            expected: n_rows * d,
            actual: features.len(),
            context: "feature sample",
        });
    }
    if n_rows == 0 {
        return Err(Error::Empty("feature sample"));
    }
    let p = spec.param_count();
    let mut acc = DMatrix::zeros(p, p);
    let row = |i: usize| &features[i * d..(i + 1) * d];
    match mode {
        FisherMode::Analytic => {
            if !spec.is_glm() {
                return Err(Error::InvalidArgument(
                    "analytic Fisher information is only available for GLMs".into(),
                ));
            }
            // canonical link: -∇² ln p̂_y does not depend on y
            for i in 0..n_rows {
                acc -= log_prob_hessian(spec, theta0, row(i), 0)?;
            }
        }
        FisherMode::ScoreOuterProduct { seed } => {
            let mut rng = seed.rng();
            for i in 0..n_rows {
                let x = row(i);
                let probs = raw_probabilities(spec, theta0, x)?;
                let u: f64 = rng.random();
                let y = sample_class(&probs, u);
                let s = score(spec, theta0, x, y)?;
                acc.ger(1.0, &s, &s, 1.0);
            }
        }
    }
    acc /= n_rows as f64;
    let matrix = (&acc + acc.transpose()) * 0.5;
    Ok(FisherInformation {
        matrix,
        theta0: theta0.clone(),
        sample_count_used: n_rows,
    })
}

/// Analytic GLM Fisher information under a discrete feature distribution:
/// `Σ_i w_i · (-∇² ln p̂(x_i; θ0))`. Quadrature nodes and weights turn this
/// into a population Fisher information.
pub fn weighted_fisher_information(
    spec: &ModelSpec,
    theta0: &ParameterVector,
    features: &[f64],
    weights: &[f64],
) -> Result<FisherInformation> {
    spec.validate()?;
    if !spec.is_glm() {
        return Err(Error::InvalidArgument(
            "analytic Fisher information is only available for GLMs".into(),
        ));
    }
    let d = spec.input_dim;
    if features.len() != weights.len() * d {
        return Err(Error::DimensionMismatch {
            expected: weights.len() * d,
            actual: features.len(),
            context: "quadrature nodes",
        });
    }
    if weights.is_empty() {
        return Err(Error::Empty("quadrature nodes"));
    }
    let p = spec.param_count();
    let mut acc = DMatrix::zeros(p, p);
    for (i, &w) in weights.iter().enumerate() {
        acc -= log_prob_hessian(spec, theta0, &features[i * d..(i + 1) * d], 0)? * w;
    }
    let matrix = (&acc + acc.transpose()) * 0.5;
    Ok(FisherInformation {
        matrix,
        theta0: theta0.clone(),
        sample_count_used: weights.len(),
    })
}

fn sample_class(probs: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return k;
        }
    }
    probs.len() - 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaVariances {
    /// `σ_k²`, one per class.
    pub sigma_sq: Vec<f64>,
    /// `∂p̂/∂θ` at the test point, `K x p`.
    pub gradient: DMatrix<f64>,
}

/// `σ_k² = [G I⁻¹ Gᵀ]_kk`.
pub fn delta_variances(grad: &DMatrix<f64>, fisher: &FisherInformation) -> Result<DeltaVariances> {
    if grad.ncols() != fisher.matrix.nrows() {
        return Err(Error::DimensionMismatch {
            expected: fisher.matrix.nrows(),
            actual: grad.ncols(),
            context: "prediction gradient columns",
        });
    }
    let inv = fisher.inverse()?;
    let sigma_sq = (0..grad.nrows())
        .map(|k| {
            let g = grad.row(k);
            (g * &inv * g.transpose())[(0, 0)]
        })
        .collect();
    Ok(DeltaVariances {
        sigma_sq,
        gradient: grad.clone(),
    })
}

/// `(1 / 2n) Σ_k σ_k² / p0_k`.
pub fn first_order_mi(dv: &DeltaVariances, p0: &ProbabilityVector, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    if dv.sigma_sq.len() != p0.class_count() {
        return Err(Error::DimensionMismatch {
            expected: p0.class_count(),
            actual: dv.sigma_sq.len(),
            context: "delta variances",
        });
    }
    let sum: f64 = dv.sigma_sq.iter().zip(p0.as_slice()).map(|(s, p)| s / p).sum();
    Ok(sum / (2.0 * n as f64))
}

/// Two-class form: `σ_1² / (n · 2 p (1 - p))`.
pub fn binary_first_order_mi(dv: &DeltaVariances, p0: &ProbabilityVector, n: usize) -> Result<f64> {
    if p0.class_count() != 2 || dv.sigma_sq.len() != 2 {
        return Err(Error::InvalidArgument("binary form needs exactly two classes".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    let p = p0.get(1);
    Ok(dv.sigma_sq[1] / n as f64 / (2.0 * p * (1.0 - p)))
}

/// Convenience wrapper: first-order MI at `x_test` from a Fisher matrix.
pub fn first_order_mi_at(
    spec: &ModelSpec,
    theta0: &ParameterVector,
    fisher: &FisherInformation,
    x_test: &[f64],
    n: usize,
) -> Result<f64> {
    let grad = prediction_gradient(spec, theta0, x_test)?;
    let dv = delta_variances(&grad, fisher)?;
    let p0 = crate::models::predict_proba(spec, theta0, x_test)?;
    first_order_mi(&dv, &p0, n)
}

//! Influence-function approximation of bootstrap refits.
//!
//! Instead of refitting per replicate, the full-data fit is shifted by
//! `Σ_i (ξ_i - 1/n) · IF_i`, where `IF_i = -H⁻¹ ψ_i` is the first-order
//! response of the fitted parameters to upweighting observation `i`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::bootstrap::{fit_weighted_mle, member_predictions, sample_weights, WeightScheme, WeightVector};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::information::{mutual_information, MiEstimate};
use crate::linalg::SymmetricSolver;
use crate::models::{score, weighted_hessian_block, ModelSpec, ParameterVector, TrainingConfig};
use crate::rng::RngStream;

pub const DEFAULT_DAMPING: f64 = 1e-5;
/// Damped Hessians with a larger condition number are rejected.
pub const MAX_DAMPED_CONDITION: f64 = 1e14;

/// Which parameters the influence computation covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfluenceBlock {
    All,
    /// The last `n` MLP layers; earlier layers stay frozen at the fit.
    TrailingLayers(usize),
}

impl InfluenceBlock {
    fn start(self, spec: &ModelSpec) -> Result<usize> {
        match self {
            InfluenceBlock::All => Ok(0),
            InfluenceBlock::TrailingLayers(layers) => {
                if spec.is_glm() || layers == 0 {
                    return Err(Error::InvalidArgument(
                        "trailing-layer blocks need an mlp spec and at least one layer".into(),
                    ));
                }
                Ok(spec.param_count() - spec.trailing_param_count(layers))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceCache {
    pub theta_hat: ParameterVector,
    /// Mean log-likelihood Hessian over the unfrozen block.
    pub hessian: DMatrix<f64>,
    pub damping: f64,
    /// Row `i` is `IF_i` over all parameters (zero on frozen ones).
    pub influence_vectors: DMatrix<f64>,
    /// First unfrozen parameter index.
    pub block_start: usize,
    pub condition: f64,
}

impl InfluenceCache {
    pub fn sample_count(&self) -> usize {
        self.influence_vectors.nrows()
    }
}

/// Fits the full data with uniform weights and computes every influence
/// vector from one factorization.
///
/// The damping is added to the positive-definite negative-log-likelihood
/// Hessian, so the solve uses `(-H + damping · I)`.
pub fn build_influence_cache(
    spec: &ModelSpec,
    data: &LabeledDataset,
    cfg: &TrainingConfig,
    damping: f64,
    block: InfluenceBlock,
    seed: RngStream,
) -> Result<InfluenceCache> {
    let uniform = WeightVector::uniform(data.len());
    let theta_hat = fit_weighted_mle(spec, data, &uniform, cfg, seed)?;
    influence_cache_at(spec, data, theta_hat, damping, block)
}

/// Influence vectors at a given fit.
pub fn influence_cache_at(
    spec: &ModelSpec,
    data: &LabeledDataset,
    theta_hat: ParameterVector,
    damping: f64,
    block: InfluenceBlock,
) -> Result<InfluenceCache> {
    if !(damping >= 0.0 && damping.is_finite()) {
        return Err(Error::InvalidArgument("damping must be non-negative".into()));
    }
    let start = block.start(spec)?;
    let n = data.len();
    let p = theta_hat.len();
    let q = p - start;
    let uniform = WeightVector::uniform(n);
    let hessian = weighted_hessian_block(spec, &theta_hat, data, &uniform, start)?;
    let damped = -&hessian + DMatrix::identity(q, q) * damping;
    let solver = SymmetricSolver::new(&damped, MAX_DAMPED_CONDITION, false)?;
    let rows: Vec<DVector<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = score(spec, &theta_hat, data.row(i), data.label(i))?;
            Ok(solver.solve(&s.rows(start, q).into_owned()))
        })
        .collect::<Result<_>>()?;
    let mut influence_vectors = DMatrix::zeros(n, p);
    for (i, v) in rows.iter().enumerate() {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("influence vector"));
        }
        influence_vectors.view_mut((i, start), (1, q)).copy_from(&v.transpose());
    }
    Ok(InfluenceCache {
        theta_hat,
        hessian: (&hessian + hessian.transpose()) * 0.5,
        damping,
        influence_vectors,
        block_start: start,
        condition: solver.condition(),
    })
}

/// `θ̂ + Σ_i (ξ_i - 1/n) · IF_i`.
pub fn if_shift_parameters(cache: &InfluenceCache, xi: &[f64]) -> Result<ParameterVector> {
    let n = cache.sample_count();
    if xi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: xi.len(),
            context: "weight vector",
        });
    }
    let base = 1.0 / n as f64;
    let coef = DVector::from_iterator(n, xi.iter().map(|w| w - base));
    let shift = cache.influence_vectors.tr_mul(&coef);
    ParameterVector::new(
        cache
            .theta_hat
            .as_slice()
            .iter()
            .zip(shift.iter())
            .map(|(t, s)| t + s)
            .collect(),
    )
}

/// `B` approximate replicates using weight streams `0..B`, the same
/// streams a refit bootstrap with this seed would use.
pub fn if_ensemble(
    cache: &InfluenceCache,
    b: usize,
    scheme: WeightScheme,
    master_seed: u64,
) -> Result<Vec<ParameterVector>> {
    if b < 2 {
        return Err(Error::InvalidArgument("need B >= 2".into()));
    }
    (0..b as u64)
        .map(|r| {
            let xi = sample_weights(scheme, cache.sample_count(), RngStream::replicate(master_seed, r))?;
            if_shift_parameters(cache, &xi)
        })
        .collect()
}

pub fn if_bootstrap_mi(
    cache: &InfluenceCache,
    spec: &ModelSpec,
    x_test: &[f64],
    b: usize,
    scheme: WeightScheme,
    master_seed: u64,
) -> Result<MiEstimate> {
    let members = if_ensemble(cache, b, scheme, master_seed)?;
    mutual_information(&member_predictions(&members, spec, x_test)?)
}

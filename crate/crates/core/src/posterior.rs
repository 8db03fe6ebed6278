//! Bayesian reference: Gaussian-prior posterior and a random-walk
//! Metropolis sampler.
//!
//! The sampler adapts its isotropic proposal scale during burn-in only
//! (multiplicative updates per window, steering acceptance into
//! `[0.2, 0.4]`) and keeps it fixed afterwards, so the retained chain is a
//! plain Metropolis chain with a symmetric proposal.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bootstrap::member_predictions;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::information::{mutual_information, MiEstimate};
use crate::models::{log_prob, ModelSpec, ParameterVector};
use crate::rng::RngStream;

/// Independent Gaussian prior on each parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
}

impl PriorSpec {
    pub fn new(mean: Vec<f64>, stddev: Vec<f64>) -> Result<Self> {
        if mean.len() != stddev.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                actual: stddev.len(),
                context: "prior stddev",
            });
        }
        if stddev.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument("prior stddev must be positive".into()));
        }
        Ok(Self { mean, stddev })
    }

    pub fn standard_normal(p: usize) -> Self {
        Self {
            mean: vec![0.0; p],
            stddev: vec![1.0; p],
        }
    }

    /// Log density up to an additive constant.
    pub fn log_density(&self, theta: &[f64]) -> f64 {
        theta
            .iter()
            .zip(self.mean.iter().zip(&self.stddev))
            .map(|(t, (m, s))| -(t - m).powi(2) / (2.0 * s * s))
            .sum()
    }
}

/// Unnormalized log posterior `Σ_i ln p̂_{y_i}(x_i; θ) + ln prior(θ)`.
pub fn log_posterior(
    spec: &ModelSpec,
    prior: &PriorSpec,
    data: &LabeledDataset,
    theta: &ParameterVector,
) -> Result<f64> {
    if prior.mean.len() != theta.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            actual: prior.mean.len(),
            context: "prior dimension",
        });
    }
    let mut total = 0.0;
    for (x, y) in data.iter() {
        total += log_prob(spec, theta, x, y)?;
    }
    Ok(total + prior.log_density(theta.as_slice()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    pub total_steps: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub initial_scale: f64,
    /// Multiplicative scale update applied after each burn-in window.
    pub adapt_factor: f64,
    pub adapt_window: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            total_steps: 60_000,
            burn_in: 10_000,
            thinning: 25,
            initial_scale: 0.5,
            adapt_factor: 1.1,
            adapt_window: 100,
        }
    }
}

const TARGET_ACCEPTANCE: (f64, f64) = (0.2, 0.4);

#[derive(Debug, Clone, PartialEq)]
pub struct McmcChain {
    /// Post burn-in, thinned draws.
    pub samples: Vec<ParameterVector>,
    /// Acceptance rate over the post burn-in steps.
    pub acceptance_rate: f64,
    pub accepted: usize,
    pub proposed: usize,
    /// Scale in force when burn-in ended.
    pub proposal_scale_burn_in: f64,
    /// Scale at the last step; equals `proposal_scale_burn_in`.
    pub proposal_scale_final: f64,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: RngStream,
}

/// Random-walk Metropolis on `log_post`, starting at `init`.
pub fn metropolis_sample<F>(log_post: F, init: &ParameterVector, cfg: &McmcConfig, seed: RngStream) -> Result<McmcChain>
where
    F: Fn(&[f64]) -> f64,
{
    if cfg.total_steps <= cfg.burn_in {
        return Err(Error::InvalidArgument("total_steps must exceed burn_in".into()));
    }
    if cfg.thinning == 0 || cfg.adapt_window == 0 {
        return Err(Error::InvalidArgument("thinning and window must be at least 1".into()));
    }
    if !(cfg.initial_scale > 0.0 && cfg.adapt_factor >= 1.0) {
        return Err(Error::InvalidArgument("invalid proposal scale settings".into()));
    }
    let p = init.len();
    let mut rng = seed.rng();
    let mut current = init.as_slice().to_vec();
    let mut current_lp = log_post(&current);
    if !current_lp.is_finite() {
        return Err(Error::NonFinite("log posterior at the initial point"));
    }
    let mut scale = cfg.initial_scale;
    let mut proposal = vec![0.0; p];
    let mut window_accepts = 0usize;
    let mut dead_windows = 0usize;
    let mut accepted = 0usize;
    let mut proposed = 0usize;
    let mut scale_at_burn_in = scale;
    let mut samples = Vec::with_capacity((cfg.total_steps - cfg.burn_in) / cfg.thinning + 1);

    for step in 0..cfg.total_steps {
        if step == cfg.burn_in {
            scale_at_burn_in = scale;
        }
        for (q, c) in proposal.iter_mut().zip(&current) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *q = c + scale * z;
        }
        let lp = log_post(&proposal);
        let u: f64 = rng.random();
        let accept = lp.is_finite() && u.ln() < lp - current_lp;
        if accept {
            current.copy_from_slice(&proposal);
            current_lp = lp;
            window_accepts += 1;
        }
        if step >= cfg.burn_in {
            proposed += 1;
            accepted += usize::from(accept);
            if (step - cfg.burn_in).is_multiple_of(cfg.thinning) {
                samples.push(ParameterVector::new(current.clone())?);
            }
        }
        if (step + 1) % cfg.adapt_window == 0 {
            if window_accepts == 0 {
                dead_windows += 1;
                if dead_windows >= 10 * p.max(1) {
                    return Err(Error::PathologicalPosterior { windows: dead_windows });
                }
            } else {
                dead_windows = 0;
            }
            if step < cfg.burn_in {
                let rate = window_accepts as f64 / cfg.adapt_window as f64;
                if rate < TARGET_ACCEPTANCE.0 {
                    scale /= cfg.adapt_factor;
                } else if rate > TARGET_ACCEPTANCE.1 {
                    scale *= cfg.adapt_factor;
                }
            }
            window_accepts = 0;
        }
    }
    Ok(McmcChain {
        samples,
        acceptance_rate: accepted as f64 / proposed as f64,
        accepted,
        proposed,
        proposal_scale_burn_in: scale_at_burn_in,
        proposal_scale_final: scale,
        burn_in: cfg.burn_in,
        thinning: cfg.thinning,
        seed,
    })
}

/// Samples the posterior of a GLM under `prior`.
pub fn sample_posterior(
    spec: &ModelSpec,
    prior: &PriorSpec,
    data: &LabeledDataset,
    init: &ParameterVector,
    cfg: &McmcConfig,
    seed: RngStream,
) -> Result<McmcChain> {
    if !spec.is_glm() {
        return Err(Error::InvalidArgument("the posterior oracle supports GLMs only".into()));
    }
    log_posterior(spec, prior, data, init)?;
    let log_post = |theta: &[f64]| {
        ParameterVector::new(theta.to_vec())
            .and_then(|t| log_posterior(spec, prior, data, &t))
            .unwrap_or(f64::NEG_INFINITY)
    };
    metropolis_sample(log_post, init, cfg, seed)
}

/// Monte Carlo estimate of the posterior MI at `x_test`.
pub fn bayesian_mi(chain: &McmcChain, spec: &ModelSpec, x_test: &[f64]) -> Result<MiEstimate> {
    if chain.samples.len() < 2 {
        return Err(Error::InvalidArgument("need at least two posterior samples".into()));
    }
    mutual_information(&member_predictions(&chain.samples, spec, x_test)?)
}

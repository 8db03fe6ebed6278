//! Experiment drivers. Each returns typed rows and a [`Table`]; the binary
//! only adds argument parsing and file output.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use epiboot_core::active::{run_active_learning, AcquisitionConfig, MixtureTask, Scorer};
use epiboot_core::asymptotic::{first_order_mi_at, weighted_fisher_information, FisherInformation};
use epiboot_core::attribution::{build_influence_cache, if_ensemble, InfluenceBlock};
use epiboot_core::bootstrap::{build_bootstrap_ensemble, member_predictions, train_deep_ensemble, train_seed_grid};
use epiboot_core::information::{
    decompose_mi, deep_ensemble_mi, mutual_information, true_class_spread, variance_ratio_mi, PredictionGrid,
};
use epiboot_core::models::{predict_proba, raw_probabilities, ModelSpec, OptimizerKind, ParameterVector};
use epiboot_core::posterior::{bayesian_mi, sample_posterior, PriorSpec};
use epiboot_core::{LabeledDataset, RngStream};

use crate::config::{ModelChoice, RunConfig, ScorerChoice};
use crate::dataset::{check_compatible, FeatureTable};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, Table};

const TAG_SIMULATE: u64 = 1;
const TAG_BOOTSTRAP: u64 = 1 << 32;
const TAG_MCMC: u64 = 2 << 32;
const TAG_TASK: u64 = 3 << 32;
const TAG_ACTIVE: u64 = 4 << 32;

/// Half-width of the quadrature range for standard-normal expectations.
const QUADRATURE_HALF_WIDTH: f64 = 12.0;
const QUADRATURE_STEP: f64 = 1e-3;

// ---------------------------------------------------------------------------
// teaser and asymptotic sweep

/// Draws `n` points with `x ~ N(0, 1)` and labels from the logistic model
/// at `theta0`, from the simulation stream of `seed`. Smaller `n` give
/// prefixes of larger ones.
pub fn simulate_logistic(theta0: &[f64], n: usize, seed: u64) -> CliResult<LabeledDataset> {
    let spec = ModelSpec::binary_logistic(1);
    let theta = ParameterVector::for_spec(&spec, theta0.to_vec())?;
    let mut rng = RngStream::aux(seed, TAG_SIMULATE).rng();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = StandardNormal.sample(&mut rng);
        let p1 = raw_probabilities(&spec, &theta, &[x])?[1];
        let u: f64 = rng.random();
        xs.push(x);
        ys.push(usize::from(u < p1));
    }
    Ok(LabeledDataset::new(xs, ys, 1, 2)?)
}

/// Fisher information of the logistic model at `theta0` for standard-normal
/// features, by trapezoidal quadrature.
pub fn population_fisher(theta0: &ParameterVector) -> CliResult<FisherInformation> {
    let spec = ModelSpec::binary_logistic(1);
    let m = (2.0 * QUADRATURE_HALF_WIDTH / QUADRATURE_STEP).round() as usize;
    let nodes: Vec<f64> = (0..=m)
        .map(|i| -QUADRATURE_HALF_WIDTH + i as f64 * QUADRATURE_STEP)
        .collect();
    let norm = (2.0 * std::f64::consts::PI).sqrt();
    let weights: Vec<f64> = nodes
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            w * QUADRATURE_STEP * (-0.5 * x * x).exp() / norm
        })
        .collect();
    Ok(weighted_fisher_information(&spec, theta0, &nodes, &weights)?)
}

fn require_teaser_model(cfg: &RunConfig) -> CliResult<()> {
    if cfg.model != ModelChoice::Logistic {
        return Err(CliError::input(format!(
            "{} simulates binary logistic data; model must be 'logistic'",
            cfg.command.name()
        )));
    }
    if cfg.theta0.len() != 2 {
        return Err(CliError::input("theta0 needs two values: intercept, slope"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub x_test: f64,
    pub mi_bootstrap: f64,
    pub mi_mcmc: f64,
    pub mi_first_order: f64,
    pub mi_variance_ratio: f64,
}

impl ConvergenceRow {
    pub fn ratio_bootstrap_mcmc(&self) -> f64 {
        self.mi_bootstrap / self.mi_mcmc
    }

    pub fn ratio_mcmc_first_order(&self) -> f64 {
        self.mi_mcmc / self.mi_first_order
    }
}

/// MCMC posterior MI at every grid point for the size-`n` prefix of the
/// simulated data. `chain` selects an independent chain.
pub fn mcmc_mi_grid(cfg: &RunConfig, data: &LabeledDataset, chain: u64) -> CliResult<Vec<f64>> {
    let spec = ModelSpec::binary_logistic(1);
    let n = data.len() as u64;
    let training = cfg.training()?;
    let init = epiboot_core::bootstrap::fit_weighted_mle(
        &spec,
        data,
        &epiboot_core::bootstrap::WeightVector::uniform(data.len()),
        &training,
        RngStream::new(cfg.seed, 0),
    )?;
    let prior = PriorSpec::standard_normal(2);
    let stream = RngStream::aux(cfg.seed, TAG_MCMC + (chain << 24) + n);
    let posterior = sample_posterior(&spec, &prior, data, &init, &cfg.mcmc(), stream)?;
    cfg.x_grid
        .iter()
        .map(|&x| Ok(bayesian_mi(&posterior, &spec, &[x])?.mi))
        .collect()
}

/// Bootstrap, posterior and first-order MI over `x_grid` for each sample
/// size, on nested prefixes of one simulated dataset.
pub fn convergence_sweep(cfg: &RunConfig, sizes: &[usize]) -> CliResult<Vec<ConvergenceRow>> {
    require_teaser_model(cfg)?;
    let spec = ModelSpec::binary_logistic(1);
    let theta0 = ParameterVector::for_spec(&spec, cfg.theta0.clone())?;
    let fisher = population_fisher(&theta0)?;
    let training = cfg.training()?;
    let max_n = sizes
        .iter()
        .copied()
        .max()
        .ok_or_else(|| CliError::input("empty sample-size grid"))?;
    let full = simulate_logistic(&cfg.theta0, max_n, cfg.seed)?;
    let mut rows = Vec::new();
    for &n in sizes {
        if n < 2 {
            return Err(CliError::input("sample sizes must be at least 2"));
        }
        let data = full.select(&(0..n).collect::<Vec<_>>());
        let boot_seed = RngStream::aux(cfg.seed, TAG_BOOTSTRAP + n as u64).derive_seed();
        let ensemble = build_bootstrap_ensemble(&spec, &data, cfg.bootstrap, cfg.weights, &training, boot_seed)?;
        let mcmc = mcmc_mi_grid(cfg, &data, 0)?;
        for (&x, mi_mcmc) in cfg.x_grid.iter().zip(mcmc) {
            let preds = member_predictions(&ensemble.members, &spec, &[x])?;
            rows.push(ConvergenceRow {
                n,
                x_test: x,
                mi_bootstrap: mutual_information(&preds)?.mi,
                mi_mcmc,
                mi_first_order: first_order_mi_at(&spec, &theta0, &fisher, &[x], n)?,
                mi_variance_ratio: variance_ratio_mi(&preds)?,
            });
        }
    }
    Ok(rows)
}

pub fn teaser(cfg: &RunConfig) -> CliResult<(Vec<ConvergenceRow>, Table)> {
    let rows = convergence_sweep(cfg, &[cfg.n])?;
    let mut table = Table::new(vec![
        "x_test",
        "mi_bootstrap",
        "mi_mcmc",
        "mi_first_order",
        "mi_variance_ratio",
    ]);
    for r in &rows {
        table.push(vec![
            fmt_f64(r.x_test),
            fmt_f64(r.mi_bootstrap),
            fmt_f64(r.mi_mcmc),
            fmt_f64(r.mi_first_order),
            fmt_f64(r.mi_variance_ratio),
        ]);
    }
    Ok((rows, table))
}

pub fn asymptotic(cfg: &RunConfig) -> CliResult<(Vec<ConvergenceRow>, Table)> {
    let rows = convergence_sweep(cfg, &cfg.n_grid)?;
    let mut table = Table::new(vec![
        "n",
        "x_test",
        "mi_mcmc",
        "mi_bootstrap",
        "mi_first_order",
        "n_mi_mcmc",
        "n_mi_bootstrap",
        "n_mi_first_order",
        "ratio_bootstrap_mcmc",
        "ratio_mcmc_first_order",
    ]);
    for r in &rows {
        let n = r.n as f64;
        table.push(vec![
            r.n.to_string(),
            fmt_f64(r.x_test),
            fmt_f64(r.mi_mcmc),
            fmt_f64(r.mi_bootstrap),
            fmt_f64(r.mi_first_order),
            fmt_f64(n * r.mi_mcmc),
            fmt_f64(n * r.mi_bootstrap),
            fmt_f64(n * r.mi_first_order),
            fmt_f64(r.ratio_bootstrap_mcmc()),
            fmt_f64(r.ratio_mcmc_first_order()),
        ]);
    }
    Ok((rows, table))
}

// ---------------------------------------------------------------------------
// commands over user data

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRow {
    pub mi: f64,
    pub total_entropy: f64,
    pub mean_entropy: f64,
    pub true_class_spread: Option<f64>,
}

pub fn estimate(cfg: &RunConfig, train: &LabeledDataset, test: &FeatureTable) -> CliResult<(Vec<EstimateRow>, Table)> {
    check_compatible(train, test, "test data")?;
    let spec = cfg.model_spec(train.dim(), train.class_count())?;
    let ensemble = build_bootstrap_ensemble(&spec, train, cfg.bootstrap, cfg.weights, &cfg.training()?, cfg.seed)?;
    let mut rows = Vec::with_capacity(test.len());
    let mut table = Table::new(vec!["row", "mi", "total_entropy", "mean_entropy", "true_class_spread"]);
    for i in 0..test.len() {
        let preds = member_predictions(&ensemble.members, &spec, test.row(i))?;
        let est = mutual_information(&preds)?;
        let spread = match &test.labels {
            Some(labels) => Some(true_class_spread(&preds, labels[i])?),
            None => None,
        };
        table.push(vec![
            i.to_string(),
            fmt_f64(est.mi),
            fmt_f64(est.total_entropy),
            fmt_f64(est.mean_entropy),
            spread.map_or(String::new(), fmt_f64),
        ]);
        rows.push(EstimateRow {
            mi: est.mi,
            total_entropy: est.total_entropy,
            mean_entropy: est.mean_entropy,
            true_class_spread: spread,
        });
    }
    Ok((rows, table))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposeRow {
    pub total: f64,
    pub seeds: f64,
    pub resampling: f64,
    pub deep_ensemble_mi: f64,
}

/// `B x S` grid of (bootstrap weights, training seed) models plus an
/// `S`-member full-data ensemble.
pub fn decompose(
    cfg: &RunConfig,
    train: &LabeledDataset,
    test: &FeatureTable,
) -> CliResult<(Vec<DecomposeRow>, Table)> {
    check_compatible(train, test, "test data")?;
    let spec = cfg.model_spec(train.dim(), train.class_count())?;
    let training = cfg.training()?;
    let grid = train_seed_grid(&spec, train, cfg.bootstrap, cfg.seeds, cfg.weights, &training, cfg.seed)?;
    let deep = train_deep_ensemble(&spec, train, cfg.seeds, &training, cfg.seed)?;
    let mut rows = Vec::with_capacity(test.len());
    let mut table = Table::new(vec!["row", "total", "seeds", "resampling", "deep_ensemble_mi"]);
    for i in 0..test.len() {
        let x = test.row(i);
        let cells = grid
            .cells
            .iter()
            .map(|row| row.iter().map(|theta| predict_proba(&spec, theta, x)).collect())
            .collect::<Result<Vec<Vec<_>>, _>>()?;
        let d = decompose_mi(&PredictionGrid::new(cells)?)?;
        let de = deep_ensemble_mi(&member_predictions(&deep, &spec, x)?)?.mi;
        table.push(vec![
            i.to_string(),
            fmt_f64(d.total.mi),
            fmt_f64(d.seeds),
            fmt_f64(d.resampling),
            fmt_f64(de),
        ]);
        rows.push(DecomposeRow {
            total: d.total.mi,
            seeds: d.seeds,
            resampling: d.resampling,
            deep_ensemble_mi: de,
        });
    }
    Ok((rows, table))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfluenceRow {
    pub mi_if: f64,
    pub mi_bootstrap: f64,
}

/// Influence-approximated and refit bootstrap MI, paired through shared
/// weight streams.
pub fn influence(
    cfg: &RunConfig,
    train: &LabeledDataset,
    test: &FeatureTable,
) -> CliResult<(Vec<InfluenceRow>, Table)> {
    check_compatible(train, test, "test data")?;
    let spec = cfg.model_spec(train.dim(), train.class_count())?;
    let training = cfg.training()?;
    let block = if spec.is_glm() {
        InfluenceBlock::All
    } else {
        InfluenceBlock::TrailingLayers(cfg.trailing_layers)
    };
    let cache = build_influence_cache(
        &spec,
        train,
        &training,
        cfg.damping,
        block,
        RngStream::training_seed(cfg.seed, 0),
    )?;
    let approx = if_ensemble(&cache, cfg.bootstrap, cfg.weights, cfg.seed)?;
    let refit = build_bootstrap_ensemble(&spec, train, cfg.bootstrap, cfg.weights, &training, cfg.seed)?;
    let mut rows = Vec::with_capacity(test.len());
    let mut table = Table::new(vec!["row", "mi_if", "mi_bootstrap"]);
    for i in 0..test.len() {
        let x = test.row(i);
        let mi_if = mutual_information(&member_predictions(&approx, &spec, x)?)?.mi;
        let mi_bootstrap = mutual_information(&member_predictions(&refit.members, &spec, x)?)?.mi;
        table.push(vec![i.to_string(), fmt_f64(mi_if), fmt_f64(mi_bootstrap)]);
        rows.push(InfluenceRow { mi_if, mi_bootstrap });
    }
    Ok((rows, table))
}

// ---------------------------------------------------------------------------
// active learning

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveRow {
    pub repetition: usize,
    pub scorer: &'static str,
    pub step: usize,
    pub labeled_count: usize,
    pub accuracy: f64,
}

#[derive(Debug)]
pub struct ActiveOutput {
    pub rows: Vec<ActiveRow>,
    pub table: Table,
    pub log: Vec<String>,
    /// First training failure; rows hold everything completed before it.
    pub failure: Option<CliError>,
}

pub fn mixture_task(cfg: &RunConfig) -> MixtureTask {
    MixtureTask {
        pool_size: cfg.pool,
        test_size: cfg.test_size,
        ..MixtureTask::default()
    }
}

/// Acquisition configuration for one arm of one repetition.
pub fn active_config(cfg: &RunConfig, scorer: Scorer, repetition: usize) -> CliResult<AcquisitionConfig> {
    let task = mixture_task(cfg);
    let master = RngStream::aux(cfg.seed, TAG_ACTIVE + repetition as u64).derive_seed();
    let mut acq = AcquisitionConfig::glm_default(scorer, cfg.budget, 2, task.classes, master);
    match cfg.model {
        ModelChoice::Softmax => {}
        ModelChoice::Logistic => {
            return Err(CliError::input(
                "active learning uses a 4-class task; model must be softmax or mlp",
            ));
        }
        ModelChoice::Mlp => {
            acq.spec = ModelSpec::mlp(2, task.classes, cfg.hidden.clone());
            acq.training = cfg.training()?;
            acq.training.optimizer = OptimizerKind::GradientDescent;
        }
    }
    Ok(acq)
}

/// Runs the configured scorer and the random baseline on `repetitions`
/// independently generated tasks. Both arms of a repetition share the task
/// and the per-step seeds.
pub fn active(cfg: &RunConfig) -> CliResult<ActiveOutput> {
    if cfg.repetitions == 0 {
        return Err(CliError::input("repetitions must be at least 1"));
    }
    let task = mixture_task(cfg);
    let mut arms = vec![cfg.active_scorer()];
    if cfg.scorer != ScorerChoice::Random {
        arms.push(Scorer::Random);
    }
    let mut configs = Vec::new();
    for r in 0..cfg.repetitions {
        for &scorer in &arms {
            configs.push((r, active_config(cfg, scorer, r)?));
        }
    }
    let mut rows = Vec::new();
    let mut log = Vec::new();
    let mut failure = None;
    let mut table = Table::new(vec!["step", "n_labeled", "accuracy", "scorer", "seed"]);
    for (r, acq) in configs {
        let state = task.generate(RngStream::aux(cfg.seed, TAG_TASK + r as u64))?;
        let run = run_active_learning(state, &acq)?;
        for &step in &run.fallback_steps {
            log.push(format!(
                "repetition {r}, {}: step {step} had a single-class labeled set; scored at random",
                acq.scorer.name()
            ));
        }
        for p in &run.curve {
            table.push(vec![
                p.step.to_string(),
                p.labeled_count.to_string(),
                fmt_f64(p.accuracy),
                acq.scorer.name().to_string(),
                r.to_string(),
            ]);
            rows.push(ActiveRow {
                repetition: r,
                scorer: acq.scorer.name(),
                step: p.step,
                labeled_count: p.labeled_count,
                accuracy: p.accuracy,
            });
        }
        if let Some(e) = run.aborted {
            failure = Some(CliError::Core(e));
            break;
        }
    }
    Ok(ActiveOutput {
        rows,
        table,
        log,
        failure,
    })
}

//! Run configuration: per-command defaults, overridden by a `key=value`
//! file, overridden by flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use epiboot_core::active::Scorer;
use epiboot_core::bootstrap::WeightScheme;
use epiboot_core::models::{ModelSpec, OptimizerKind, TrainingConfig};
use epiboot_core::posterior::McmcConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Teaser,
    Estimate,
    Decompose,
    Asymptotic,
    Active,
    Influence,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Teaser => "teaser",
            Command::Estimate => "estimate",
            Command::Decompose => "decompose",
            Command::Asymptotic => "asymptotic",
            Command::Active => "active",
            Command::Influence => "influence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelChoice {
    Logistic,
    Softmax,
    Mlp,
}

impl FromStr for ModelChoice {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "logistic" => Ok(ModelChoice::Logistic),
            "softmax" => Ok(ModelChoice::Softmax),
            "mlp" => Ok(ModelChoice::Mlp),
            _ => Err(CliError::input(format!(
                "unknown model '{s}' (expected logistic, softmax or mlp)"
            ))),
        }
    }
}

impl fmt::Display for ModelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelChoice::Logistic => "logistic",
            ModelChoice::Softmax => "softmax",
            ModelChoice::Mlp => "mlp",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScorerChoice {
    BootstrapMi,
    EnsembleMi,
    Random,
}

impl FromStr for ScorerChoice {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "bootstrap-mi" => Ok(ScorerChoice::BootstrapMi),
            "ensemble-mi" => Ok(ScorerChoice::EnsembleMi),
            "random" => Ok(ScorerChoice::Random),
            _ => Err(CliError::input(format!(
                "unknown scorer '{s}' (expected bootstrap-mi, ensemble-mi or random)"
            ))),
        }
    }
}

impl fmt::Display for ScorerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScorerChoice::BootstrapMi => "bootstrap-mi",
            ScorerChoice::EnsembleMi => "ensemble-mi",
            ScorerChoice::Random => "random",
        })
    }
}

pub fn parse_scheme(s: &str) -> CliResult<WeightScheme> {
    match s {
        "dirichlet" => Ok(WeightScheme::Dirichlet),
        "multinomial" => Ok(WeightScheme::Multinomial),
        _ => Err(CliError::input(format!(
            "unknown weight scheme '{s}' (expected dirichlet or multinomial)"
        ))),
    }
}

fn scheme_name(s: WeightScheme) -> &'static str {
    match s {
        WeightScheme::Dirichlet => "dirichlet",
        WeightScheme::Multinomial => "multinomial",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub model: ModelChoice,
    pub hidden: Vec<usize>,
    pub bootstrap: usize,
    pub seeds: usize,
    pub weights: WeightScheme,
    /// Sample size of the teaser simulation.
    pub n: usize,
    pub n_grid: Vec<usize>,
    pub theta0: Vec<f64>,
    pub x_grid: Vec<f64>,
    pub mcmc_steps: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub proposal_scale: f64,
    pub damping: f64,
    pub trailing_layers: usize,
    pub budget: usize,
    pub repetitions: usize,
    pub pool: usize,
    pub test_size: usize,
    pub scorer: ScorerChoice,
    pub epochs: usize,
    pub step_size: f64,
    pub batch_size: Option<usize>,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        let mut cfg = Self {
            command,
            seed: 0,
            model: ModelChoice::Logistic,
            hidden: vec![16],
            bootstrap: 200,
            seeds: 5,
            weights: WeightScheme::Dirichlet,
            n: 100,
            n_grid: vec![100, 400, 1600],
            theta0: vec![0.5, 1.5],
            x_grid: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            mcmc_steps: 60_000,
            burn_in: 10_000,
            thinning: 25,
            proposal_scale: 0.5,
            damping: epiboot_core::attribution::DEFAULT_DAMPING,
            trailing_layers: 2,
            budget: 30,
            repetitions: 10,
            pool: 400,
            test_size: 1000,
            scorer: ScorerChoice::BootstrapMi,
            epochs: 500,
            step_size: 0.5,
            batch_size: None,
            max_iterations: 100,
            tolerance: 1e-8,
            out: PathBuf::from(format!("{}.csv", command.name())),
        };
        match command {
            Command::Decompose => {
                cfg.model = ModelChoice::Mlp;
                cfg.bootstrap = 5;
            }
            Command::Active => {
                cfg.model = ModelChoice::Softmax;
                cfg.bootstrap = 20;
            }
            Command::Influence => {
                cfg.bootstrap = 100;
                cfg.weights = WeightScheme::Multinomial;
            }
            _ => {}
        }
        cfg
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let value = value.trim();
        match key.trim() {
            "seed" => self.seed = num(key, value)?,
            "model" => self.model = value.parse()?,
            "hidden" => self.hidden = list(key, value)?,
            "bootstrap" => self.bootstrap = num(key, value)?,
            "seeds" => self.seeds = num(key, value)?,
            "weights" => self.weights = parse_scheme(value)?,
            "n" => self.n = num(key, value)?,
            "n-grid" => self.n_grid = list(key, value)?,
            "theta0" => self.theta0 = list(key, value)?,
            "x-grid" => self.x_grid = list(key, value)?,
            "mcmc-steps" => self.mcmc_steps = num(key, value)?,
            "burn-in" => self.burn_in = num(key, value)?,
            "thinning" => self.thinning = num(key, value)?,
            "proposal-scale" => self.proposal_scale = num(key, value)?,
            "damping" => self.damping = num(key, value)?,
            "trailing-layers" => self.trailing_layers = num(key, value)?,
            "budget" => self.budget = num(key, value)?,
            "repetitions" => self.repetitions = num(key, value)?,
            "pool" => self.pool = num(key, value)?,
            "test-size" => self.test_size = num(key, value)?,
            "scorer" => self.scorer = value.parse()?,
            "epochs" => self.epochs = num(key, value)?,
            "step-size" => self.step_size = num(key, value)?,
            "batch-size" => {
                self.batch_size = if value == "full" { None } else { Some(num(key, value)?) };
            }
            "max-iterations" => self.max_iterations = num(key, value)?,
            "tolerance" => self.tolerance = num(key, value)?,
            "out" => self.out = PathBuf::from(value),
            other => return Err(CliError::input(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    /// Applies every non-comment line of a `key=value` file.
    pub fn apply_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::input(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
            self.set(k, v)
                .map_err(|e| CliError::input(format!("{}:{}: {e}", path.display(), i + 1)))?;
        }
        Ok(())
    }

    /// Every setting, in a fixed order, as it would be written in a
    /// configuration file.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let join = |v: &[String]| v.join(",");
        vec![
            ("command", self.command.name().to_string()),
            ("seed", self.seed.to_string()),
            ("model", self.model.to_string()),
            (
                "hidden",
                join(&self.hidden.iter().map(ToString::to_string).collect::<Vec<_>>()),
            ),
            ("bootstrap", self.bootstrap.to_string()),
            ("seeds", self.seeds.to_string()),
            ("weights", scheme_name(self.weights).to_string()),
            ("n", self.n.to_string()),
            (
                "n-grid",
                join(&self.n_grid.iter().map(ToString::to_string).collect::<Vec<_>>()),
            ),
            (
                "theta0",
                join(&self.theta0.iter().map(ToString::to_string).collect::<Vec<_>>()),
            ),
            (
                "x-grid",
                join(&self.x_grid.iter().map(ToString::to_string).collect::<Vec<_>>()),
            ),
            ("mcmc-steps", self.mcmc_steps.to_string()),
            ("burn-in", self.burn_in.to_string()),
            ("thinning", self.thinning.to_string()),
            ("proposal-scale", self.proposal_scale.to_string()),
            ("damping", self.damping.to_string()),
            ("trailing-layers", self.trailing_layers.to_string()),
            ("budget", self.budget.to_string()),
            ("repetitions", self.repetitions.to_string()),
            ("pool", self.pool.to_string()),
            ("test-size", self.test_size.to_string()),
            ("scorer", self.scorer.to_string()),
            ("epochs", self.epochs.to_string()),
            ("step-size", self.step_size.to_string()),
            (
                "batch-size",
                self.batch_size.map_or("full".to_string(), |b| b.to_string()),
            ),
            ("max-iterations", self.max_iterations.to_string()),
            ("tolerance", self.tolerance.to_string()),
            ("out", self.out.display().to_string()),
        ]
    }

    pub fn model_spec(&self, dim: usize, classes: usize) -> CliResult<ModelSpec> {
        let spec = match self.model {
            ModelChoice::Logistic => {
                if classes != 2 {
                    return Err(CliError::input(format!(
                        "model 'logistic' needs two classes, data has {classes}"
                    )));
                }
                ModelSpec::binary_logistic(dim)
            }
            ModelChoice::Softmax => ModelSpec::softmax(dim, classes),
            ModelChoice::Mlp => ModelSpec::mlp(dim, classes, self.hidden.clone()),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn training(&self) -> CliResult<TrainingConfig> {
        let cfg = TrainingConfig {
            optimizer: OptimizerKind::Newton,
            max_iterations: self.max_iterations,
            gradient_tolerance: self.tolerance,
            step_size: self.step_size,
            epochs: self.epochs,
            batch_size: self.batch_size,
            ..TrainingConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn mcmc(&self) -> McmcConfig {
        McmcConfig {
            total_steps: self.mcmc_steps,
            burn_in: self.burn_in,
            thinning: self.thinning,
            initial_scale: self.proposal_scale,
            ..McmcConfig::default()
        }
    }

    pub fn active_scorer(&self) -> Scorer {
        match self.scorer {
            ScorerChoice::BootstrapMi => Scorer::BootstrapMi {
                b: self.bootstrap,
                scheme: self.weights,
            },
            ScorerChoice::EnsembleMi => Scorer::EnsembleMi { s: self.seeds },
            ScorerChoice::Random => Scorer::Random,
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::input(format!("invalid value '{value}' for '{key}'")))
}

fn list<T: FromStr>(key: &str, value: &str) -> CliResult<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect::<CliResult<_>>()?;
    if items.is_empty() {
        return Err(CliError::input(format!("'{key}' needs at least one value")));
    }
    Ok(items)
}

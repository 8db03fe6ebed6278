//! Mutual-information estimators over prediction ensembles.
//!
//! Every estimator here is the same Jensen gap, `H(mean prediction) - mean
//! entropy`, applied to a different source of ensemble members: bootstrap
//! refits, posterior draws, seed-only ensembles, or a (dataset, seed) grid.

use crate::error::{Error, Result};
use crate::prob::{mean_prediction, PredictionMatrix, ProbabilityVector};

/// Largest negative rounding tolerated on a Jensen gap.
const JENSEN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiEstimate {
    /// Mutual information in nats, with rounding negatives clamped to zero.
    pub mi: f64,
    /// Entropy of the mean prediction.
    pub total_entropy: f64,
    /// Mean of the member entropies.
    pub mean_entropy: f64,
    pub member_count: usize,
}

fn mean_entropy(rows: &[ProbabilityVector]) -> f64 {
    if rows.iter().all(|r| r == &rows[0]) {
        return rows[0].entropy();
    }
    rows.iter().map(ProbabilityVector::entropy).sum::<f64>() / rows.len() as f64
}

/// `H(mean_b p_b) - mean_b H(p_b)`.
pub fn mutual_information(m: &PredictionMatrix) -> Result<MiEstimate> {
    let total_entropy = mean_prediction(m)?.entropy();
    let mean_entropy = mean_entropy(m.rows());
    let raw = total_entropy - mean_entropy;
    debug_assert!(raw >= -JENSEN_SLACK, "negative mutual information {raw}");
    Ok(MiEstimate {
        mi: raw.max(0.0),
        total_entropy,
        mean_entropy,
        member_count: m.member_count(),
    })
}

/// MI of an ensemble trained on the full data with different seeds. Same
/// computation as [`mutual_information`]; only the provenance differs.
pub fn deep_ensemble_mi(seed_predictions: &PredictionMatrix) -> Result<MiEstimate> {
    mutual_information(seed_predictions)
}

/// Predictions indexed by (bootstrap dataset `b`, training seed `s`).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionGrid {
    cells: Vec<Vec<ProbabilityVector>>,
    class_count: usize,
}

impl PredictionGrid {
    pub fn new(cells: Vec<Vec<ProbabilityVector>>) -> Result<Self> {
        let b = cells.len();
        let s = cells.first().map_or(0, Vec::len);
        if b < 2 || s < 2 {
            return Err(Error::InvalidArgument(format!(
                "prediction grid needs B, S >= 2, got {b} x {s}"
            )));
        }
        let class_count = cells[0][0].class_count();
        for row in &cells {
            if row.len() != s {
                return Err(Error::DimensionMismatch {
                    expected: s,
                    actual: row.len(),
                    context: "ragged prediction grid",
                });
            }
            if let Some(bad) = row.iter().find(|p| p.class_count() != class_count) {
                return Err(Error::DimensionMismatch {
                    expected: class_count,
                    actual: bad.class_count(),
                    context: "prediction grid cell",
                });
            }
        }
        Ok(Self { cells, class_count })
    }

    pub fn dataset_count(&self) -> usize {
        self.cells.len()
    }

    pub fn seed_count(&self) -> usize {
        self.cells[0].len()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn cell(&self, b: usize, s: usize) -> &ProbabilityVector {
        &self.cells[b][s]
    }

    pub fn row(&self, b: usize) -> &[ProbabilityVector] {
        &self.cells[b]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiDecomposition {
    /// MI over all `B * S` cells.
    pub total: MiEstimate,
    /// Data-resampling part: Jensen gap of the per-dataset seed means.
    pub resampling: f64,
    /// Training-randomness part: mean over datasets of the per-dataset
    /// Jensen gap across seeds.
    pub seeds: f64,
    pub dataset_count: usize,
    pub seed_count: usize,
}

const DECOMPOSITION_TOLERANCE: f64 = 1e-10;

/// Splits grid MI into resampling and seed parts; the two sum to the total.
pub fn decompose_mi(grid: &PredictionGrid) -> Result<MiDecomposition> {
    let b = grid.dataset_count();
    let s = grid.seed_count();
    let seed_means: Vec<ProbabilityVector> = (0..b)
        .map(|r| mean_prediction(&PredictionMatrix::new(grid.row(r).to_vec())?))
        .collect::<Result<_>>()?;
    let grand = mean_prediction(&PredictionMatrix::new(seed_means.clone())?)?;
    let mean_seed_mean_entropy = mean_entropy(&seed_means);
    let mean_cell_entropy = (0..b).map(|r| mean_entropy(grid.row(r))).sum::<f64>() / b as f64;

    let resampling = grand.entropy() - mean_seed_mean_entropy;
    let seeds = mean_seed_mean_entropy - mean_cell_entropy;

    let flat = PredictionMatrix::new(grid.cells.iter().flatten().cloned().collect())?;
    let total = mutual_information(&flat)?;
    let gap = (resampling + seeds - total.mi).abs();
    if gap > DECOMPOSITION_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "decomposition identity violated by {gap:e}"
        )));
    }
    debug_assert!(seeds >= -JENSEN_SLACK);
    Ok(MiDecomposition {
        total,
        resampling,
        seeds,
        dataset_count: b,
        seed_count: s,
    })
}

/// Second-order surrogate of MI: `(1/2) Σ_k Var[p_k] / mean[p_k]` with
/// population variances.
pub fn variance_ratio_mi(m: &PredictionMatrix) -> Result<f64> {
    if m.member_count() < 2 {
        return Err(Error::InvalidArgument("variance needs at least two members".into()));
    }
    let b = m.member_count() as f64;
    let mut total = 0.0;
    for k in 0..m.class_count() {
        let mean = m.column(k).sum::<f64>() / b;
        let var = m.column(k).map(|p| (p - mean).powi(2)).sum::<f64>() / b;
        total += var / mean;
    }
    Ok(0.5 * total)
}

/// Population standard deviation of the true-class probability.
pub fn true_class_spread(m: &PredictionMatrix, true_label: usize) -> Result<f64> {
    if true_label >= m.class_count() {
        return Err(Error::InvalidArgument(format!(
            "label {true_label} out of range for {} classes",
            m.class_count()
        )));
    }
    if m.member_count() < 2 {
        return Err(Error::InvalidArgument("spread needs at least two members".into()));
    }
    let b = m.member_count() as f64;
    let mean = m.column(true_label).sum::<f64>() / b;
    Ok((m.column(true_label).map(|p| (p - mean).powi(2)).sum::<f64>() / b).sqrt())
}

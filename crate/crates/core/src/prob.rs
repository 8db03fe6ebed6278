//! Points on the probability simplex and ensembles of them.

use crate::error::{Error, Result};

/// Lower clip applied to every predicted probability so logs stay finite.
pub const EPS_CLIP: f64 = 1e-12;

const SUM_TOLERANCE: f64 = 1e-9;

/// A categorical distribution over `K` classes with strictly interior
/// entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    /// Validates `probs` without modifying it.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty("probability vector"));
        }
        let mut sum = 0.0;
        for &p in &probs {
            if !p.is_finite() {
                return Err(Error::NonFinite("probability vector"));
            }
            // renormalization after clipping can land a hair below EPS_CLIP
            if !(0.5 * EPS_CLIP..=1.0 - 0.5 * EPS_CLIP).contains(&p) {
                return Err(Error::InvalidProbability(format!(
                    "entry {p:e} outside [{EPS_CLIP:e}, 1 - {EPS_CLIP:e}]"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidProbability(format!("entries sum to {sum}")));
        }
        Ok(Self(probs))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn class_count(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self.0.iter().map(|&p| p * p.ln()).sum::<f64>()
    }

    /// Index of the most probable class, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = k;
            }
        }
        best
    }
}

impl AsRef<[f64]> for ProbabilityVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Shannon entropy (nats) of a probability vector.
pub fn entropy(p: &ProbabilityVector) -> f64 {
    p.entropy()
}

/// Normalizes `raw` to unit sum, clips into `[EPS_CLIP, 1 - EPS_CLIP]` and
/// renormalizes.
pub fn clip_and_normalize(raw: &[f64]) -> Result<ProbabilityVector> {
    if raw.is_empty() {
        return Err(Error::Empty("probability vector"));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("raw probabilities"));
    }
    if raw.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidProbability("negative entry".into()));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidProbability("entries sum to zero".into()));
    }
    if raw.len() == 1 {
        return Err(Error::InvalidProbability(
            "a single class cannot be strictly interior".into(),
        ));
    }
    let clipped: Vec<f64> = raw
        .iter()
        .map(|&v| (v / total).clamp(EPS_CLIP, 1.0 - EPS_CLIP))
        .collect();
    let sum: f64 = clipped.iter().sum();
    let out = if sum == 1.0 {
        clipped
    } else {
        clipped.into_iter().map(|v| v / sum).collect()
    };
    ProbabilityVector::new(out)
}

/// Predictions of `B` ensemble members at one test point.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    rows: Vec<ProbabilityVector>,
    class_count: usize,
}

impl PredictionMatrix {
    pub fn new(rows: Vec<ProbabilityVector>) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("prediction matrix"))?;
        let class_count = first.class_count();
        for row in &rows {
            if row.class_count() != class_count {
                return Err(Error::DimensionMismatch {
                    expected: class_count,
                    actual: row.class_count(),
                    context: "prediction matrix row",
                });
            }
        }
        Ok(Self { rows, class_count })
    }

    /// Builds a matrix from raw rows, validating each one.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows.into_iter().map(ProbabilityVector::new).collect::<Result<_>>()?)
    }

    pub fn rows(&self) -> &[ProbabilityVector] {
        &self.rows
    }

    pub fn member_count(&self) -> usize {
        self.rows.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Values of class `k` across members, in row order.
    pub fn column(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r.get(k))
    }
}

/// Column-wise mean of the rows, summed in ascending row order.
pub fn mean_prediction(m: &PredictionMatrix) -> Result<ProbabilityVector> {
    let first = &m.rows()[0];
    if m.rows().iter().all(|r| r == first) {
        return Ok(first.clone());
    }
    let b = m.member_count() as f64;
    let mut acc = vec![0.0; m.class_count()];
    for row in m.rows() {
        for (a, &p) in acc.iter_mut().zip(row.as_slice()) {
            *a += p;
        }
    }
    for a in &mut acc {
        *a /= b;
    }
    ProbabilityVector::new(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(pv(&[0.5, 0.5]).entropy(), std::f64::consts::LN_2, epsilon = 1e-12);
        assert_abs_diff_eq!(ProbabilityVector::uniform(10).entropy(), 10f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(pv(&[0.9, 0.1]).entropy(), 0.3250830, epsilon = 1e-7);
    }

    #[test]
    fn rejects_invalid_vectors() {
        assert!(ProbabilityVector::new(vec![0.7, 0.7]).is_err());
        assert!(ProbabilityVector::new(vec![1.0, 0.0]).is_err());
        assert!(ProbabilityVector::new(vec![f64::NAN, 0.5]).is_err());
        assert!(ProbabilityVector::new(vec![]).is_err());
    }

    #[test]
    fn clip_examples() {
        let v = clip_and_normalize(&[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(v.get(0), 1.0 - EPS_CLIP, epsilon = 1e-15);
        assert_abs_diff_eq!(v.get(1), EPS_CLIP, epsilon = 1e-20);

        let q = clip_and_normalize(&[0.25; 4]).unwrap();
        assert_eq!(q.as_slice(), &[0.25; 4]);

        let r = clip_and_normalize(&[2.0, 6.0]).unwrap();
        assert_abs_diff_eq!(r.get(0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(r.get(1), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn clip_errors() {
        assert!(clip_and_normalize(&[0.0, 0.0]).is_err());
        assert!(clip_and_normalize(&[f64::INFINITY, 1.0]).is_err());
        assert!(clip_and_normalize(&[-1.0, 2.0]).is_err());
    }

    #[test]
    fn mean_prediction_examples() {
        let m = PredictionMatrix::from_rows(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let mean = mean_prediction(&m).unwrap();
        assert_abs_diff_eq!(mean.get(0), 0.5, epsilon = 1e-15);

        let single = PredictionMatrix::from_rows(vec![vec![0.3, 0.7]]).unwrap();
        assert_eq!(mean_prediction(&single).unwrap().as_slice(), &[0.3, 0.7]);

        let three = PredictionMatrix::from_rows(vec![vec![0.2, 0.8], vec![0.4, 0.6], vec![0.6, 0.4]]).unwrap();
        let mean = mean_prediction(&three).unwrap();
        // (0.2 + 0.4 + 0.6) / 3 and (0.8 + 0.6 + 0.4) / 3
        assert_abs_diff_eq!(mean.get(0), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(mean.get(1), 0.6, epsilon = 1e-15);
    }

    #[test]
    fn ragged_matrix_rejected() {
        assert!(PredictionMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.2, 0.3, 0.5]]).is_err());
        assert!(PredictionMatrix::new(vec![]).is_err());
    }

    fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..1.0, k).prop_map(|v| {
            clip_and_normalize(&v.iter().map(|x| x + 1e-3).collect::<Vec<_>>())
                .unwrap()
                .into_vec()
        })
    }

    proptest! {
        #[test]
        fn entropy_bounds_and_permutation(p in (2usize..8).prop_flat_map(simplex), rot in 0usize..8) {
            let v = ProbabilityVector::new(p.clone()).unwrap();
            let h = v.entropy();
            let k = p.len();
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (k as f64).ln() + 1e-12);
            let mut q = p.clone();
            q.rotate_left(rot % k);
            q.reverse();
            let hq = ProbabilityVector::new(q).unwrap().entropy();
            prop_assert!((h - hq).abs() < 1e-12);
        }

        #[test]
        fn identical_rows_have_that_mean(p in (2usize..6).prop_flat_map(simplex), b in 1usize..6) {
            let v = ProbabilityVector::new(p).unwrap();
            let m = PredictionMatrix::new(vec![v.clone(); b]).unwrap();
            prop_assert_eq!(mean_prediction(&m).unwrap(), v);
        }
    }
}

use crate::error::{Error, Result};

/// `n` feature rows of dimension `d` with integer class labels in `0..K`.
///
/// Features are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
    class_count: usize,
}

impl LabeledDataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, dim: usize, class_count: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        Self::validated(features, labels, dim, class_count)
    }

    /// Like [`LabeledDataset::new`] but allows zero rows (an empty likelihood
    /// for prior-only posteriors, or an exhausted pool).
    pub fn possibly_empty(features: Vec<f64>, labels: Vec<usize>, dim: usize, class_count: usize) -> Result<Self> {
        Self::validated(features, labels, dim, class_count)
    }

    fn validated(features: Vec<f64>, labels: Vec<usize>, dim: usize, class_count: usize) -> Result<Self> {
        if features.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * dim,
                actual: features.len(),
                context: "feature matrix size",
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_count) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        Ok(Self {
            features,
            labels,
            dim,
            class_count,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: r.len(),
                context: "feature row",
            });
        }
        Self::new(rows.concat(), labels, dim, class_count)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], usize)> + '_ {
        (0..self.len()).map(move |i| (self.row(i), self.labels[i]))
    }

    /// Number of distinct labels present.
    pub fn distinct_labels(&self) -> usize {
        let mut seen = vec![false; self.class_count];
        for &y in &self.labels {
            seen[y] = true;
        }
        seen.into_iter().filter(|&s| s).count()
    }

    /// Subset by row indices, in the given order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut features = Vec::with_capacity(idx.len() * self.dim);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self {
            features,
            labels,
            dim: self.dim,
            class_count: self.class_count,
        }
    }

    pub fn push(&mut self, x: &[f64], y: usize) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
                context: "feature row",
            });
        }
        if y >= self.class_count {
            return Err(Error::InvalidArgument(format!("label {y} out of range")));
        }
        self.features.extend_from_slice(x);
        self.labels.push(y);
        Ok(())
    }

    /// Removes row `i`, preserving the order of the others.
    pub fn remove(&mut self, i: usize) -> (Vec<f64>, usize) {
        let x: Vec<f64> = self.features.drain(i * self.dim..(i + 1) * self.dim).collect();
        (x, self.labels.remove(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(LabeledDataset::new(vec![1.0, 2.0], vec![0, 1], 1, 2).is_ok());
        assert!(LabeledDataset::new(vec![1.0, 2.0], vec![0, 2], 1, 2).is_err());
        assert!(LabeledDataset::new(vec![1.0, f64::NAN], vec![0, 1], 1, 2).is_err());
        assert!(LabeledDataset::new(vec![], vec![], 1, 2).is_err());
        assert!(LabeledDataset::new(vec![1.0], vec![0, 1], 1, 2).is_err());
    }

    #[test]
    fn iter_select_remove() {
        let mut d =
            LabeledDataset::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]], vec![0, 1, 1], 2).unwrap();
        let rows: Vec<_> = d.iter().map(|(x, y)| (x.to_vec(), y)).collect();
        assert_eq!(rows[1], (vec![3.0, 4.0], 1));
        let s = d.select(&[2, 0]);
        assert_eq!(s.row(0), &[5.0, 6.0]);
        assert_eq!(s.labels(), &[1, 0]);
        assert_eq!(d.remove(1), (vec![3.0, 4.0], 1));
        assert_eq!(d.row(1), &[5.0, 6.0]);
        assert_eq!(d.distinct_labels(), 2);
    }
}

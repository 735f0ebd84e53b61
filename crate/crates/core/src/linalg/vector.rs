use std::ops::Index;
use std::sync::Arc;

use super::LinalgError;

/// Positive quadrature weights defining the inner product `<a, b> = sum w_i a_i b_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Arc<[f64]>);

impl Weights {
    pub fn new(values: Vec<f64>) -> Result<Self, LinalgError> {
        if let Some((i, w)) = values
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(LinalgError::InvalidWeight {
                index: i,
                value: *w,
            });
        }
        Ok(Weights(values.into()))
    }

    /// All-ones weights: plain Euclidean `R^n`.
    pub fn ones(n: usize) -> Self {
        Weights(vec![1.0; n].into())
    }

    /// Midpoint-rule weights `1/n` for a uniform grid on `(0, 1)`.
    pub fn uniform_grid(n: usize) -> Self {
        Weights(vec![1.0 / n as f64; n].into())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.len());
        debug_assert_eq!(b.len(), self.len());
        self.0
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    pub fn norm_sq(&self, a: &[f64]) -> f64 {
        self.dot(a, a)
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.norm_sq(a).sqrt()
    }
}

impl Index<usize> for Weights {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A point or direction in `R^n` carrying the weights of its inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedVector {
    entries: Vec<f64>,
    weights: Weights,
}

impl WeightedVector {
    pub fn new(entries: Vec<f64>, weights: Weights) -> Result<Self, LinalgError> {
        if entries.len() != weights.len() {
            return Err(LinalgError::DimensionMismatch {
                expected: weights.len(),
                found: entries.len(),
            });
        }
        Ok(WeightedVector { entries, weights })
    }

    pub fn zeros(weights: Weights) -> Self {
        WeightedVector {
            entries: vec![0.0; weights.len()],
            weights,
        }
    }

    /// Euclidean vector with unit weights.
    pub fn plain(entries: Vec<f64>) -> Self {
        let weights = Weights::ones(entries.len());
        WeightedVector { entries, weights }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Same weights, new entries.
    pub fn with_entries(&self, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), self.dim());
        WeightedVector {
            entries,
            weights: self.weights.clone(),
        }
    }

    pub fn dot(&self, other: &WeightedVector) -> f64 {
        self.weights.dot(&self.entries, &other.entries)
    }

    pub fn dot_slice(&self, other: &[f64]) -> f64 {
        self.weights.dot(&self.entries, other)
    }

    pub fn norm_sq(&self) -> f64 {
        self.weights.norm_sq(&self.entries)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        self.with_entries(self.entries.iter().map(|x| alpha * x).collect())
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &WeightedVector) -> Self {
        self.with_entries(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &WeightedVector) -> Self {
        self.axpy(-1.0, other)
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.entries)
    }
}

impl Index<usize> for WeightedVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.entries[i]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

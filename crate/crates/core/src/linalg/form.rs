use std::fmt::Debug;

use super::vector::{dot, max_abs};
use super::{LinalgError, WeightedVector};

/// A bilinear form on `R^n`, evaluated in plain coordinates.
///
/// Weights never enter a form directly: integral operators on a grid carry
/// their quadrature weights inside their coefficients.
pub trait BilinearForm: Debug + Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, a: &[f64], b: &[f64]) -> f64;

    /// The coefficient vector `B h`, so that `eval(h, k) == dot(B h, k)`.
    fn apply(&self, h: &[f64]) -> Vec<f64>;

    fn is_symmetric(&self) -> bool {
        true
    }

    /// `B[h, h]`, the `h^2` shorthand.
    fn quad(&self, h: &[f64]) -> f64 {
        self.eval(h, h)
    }

    fn eval_vectors(&self, a: &WeightedVector, b: &WeightedVector) -> f64 {
        self.eval(a.entries(), b.entries())
    }

    /// Whether the form vanishes identically.
    fn is_zero(&self) -> bool {
        false
    }
}

/// Dense row-major matrix form `a^T M b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseForm {
    n: usize,
    data: Vec<f64>,
    symmetric: bool,
}

impl DenseForm {
    /// Builds the form, recording symmetry at the given relative tolerance.
    pub fn new(n: usize, data: Vec<f64>, symmetry_tol: f64) -> Result<Self, LinalgError> {
        if data.len() != n * n {
            return Err(LinalgError::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite(*v));
        }
        let scale = max_abs(&data).max(1.0);
        let symmetric = (0..n).all(|i| {
            (0..i).all(|j| (data[i * n + j] - data[j * n + i]).abs() <= symmetry_tol * scale)
        });
        Ok(DenseForm { n, data, symmetric })
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            data[i * n + i] = *d;
        }
        DenseForm {
            n,
            data,
            symmetric: true,
        }
    }

    pub fn zero(n: usize) -> Self {
        DenseForm {
            n,
            data: vec![0.0; n * n],
            symmetric: true,
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

impl BilinearForm for DenseForm {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(a, &self.apply(b))
    }

    fn apply(&self, h: &[f64]) -> Vec<f64> {
        self.data.chunks(self.n).map(|row| dot(row, h)).collect()
    }

    fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }
}

/// Diagonal plus low-rank form
/// `B[a, b] = sum_j d_j a_j b_j + (U a)^T C (U b)`,
/// where the rows of `U` are linear functionals and `C` is a small symmetric core.
///
/// Interval averages on a grid are functionals of this kind, which keeps
/// `apply` linear in `n` for the discretized `L^2` problems.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankForm {
    diag: Vec<f64>,
    functionals: Vec<Vec<f64>>,
    core: Vec<Vec<f64>>,
}

impl LowRankForm {
    pub fn new(
        diag: Vec<f64>,
        functionals: Vec<Vec<f64>>,
        core: Vec<Vec<f64>>,
    ) -> Result<Self, LinalgError> {
        let n = diag.len();
        let k = functionals.len();
        if let Some(u) = functionals.iter().find(|u| u.len() != n) {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: u.len(),
            });
        }
        if core.len() != k || core.iter().any(|r| r.len() != k) {
            return Err(LinalgError::DimensionMismatch {
                expected: k,
                found: core.len(),
            });
        }
        for i in 0..k {
            for j in 0..i {
                if core[i][j] != core[j][i] {
                    return Err(LinalgError::Asymmetric {
                        row: i,
                        col: j,
                        defect: (core[i][j] - core[j][i]).abs(),
                    });
                }
            }
        }
        Ok(LowRankForm {
            diag,
            functionals,
            core,
        })
    }

    fn project(&self, a: &[f64]) -> Vec<f64> {
        self.functionals.iter().map(|u| dot(u, a)).collect()
    }
}

impl BilinearForm for LowRankForm {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = self
            .diag
            .iter()
            .zip(a.iter().zip(b))
            .map(|(d, (x, y))| d * x * y)
            .sum();
        let pa = self.project(a);
        let pb = self.project(b);
        let low: f64 = self
            .core
            .iter()
            .zip(&pa)
            .map(|(row, x)| x * dot(row, &pb))
            .sum();
        d + low
    }

    fn apply(&self, h: &[f64]) -> Vec<f64> {
        let ph = self.project(h);
        let coeffs: Vec<f64> = self.core.iter().map(|row| dot(row, &ph)).collect();
        let mut out: Vec<f64> = self.diag.iter().zip(h).map(|(d, x)| d * x).collect();
        for (u, c) in self.functionals.iter().zip(&coeffs) {
            for (o, ui) in out.iter_mut().zip(u) {
                *o += c * ui;
            }
        }
        out
    }

    fn is_zero(&self) -> bool {
        self.diag.iter().all(|d| *d == 0.0) && self.core.iter().flatten().all(|c| *c == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_forms() -> (DenseForm, LowRankForm) {
        let dense =
            DenseForm::new(3, vec![2.0, 1.0, 0.0, 1.0, -1.0, 0.5, 0.0, 0.5, 3.0], 1e-12).unwrap();
        let low = LowRankForm::new(
            vec![0.25, 0.5, 1.0],
            vec![vec![1.0, 1.0, 0.0], vec![0.0, -1.0, 2.0]],
            vec![vec![1.0, 2.0], vec![2.0, -3.0]],
        )
        .unwrap();
        (dense, low)
    }

    #[test]
    fn apply_agrees_with_eval() {
        let (dense, low) = sample_forms();
        let h = [0.3, -1.2, 2.0];
        let k = [1.0, 0.5, -0.25];
        for form in [&dense as &dyn BilinearForm, &low] {
            assert!((form.eval(&h, &k) - dot(&form.apply(&h), &k)).abs() < 1e-12);
        }
    }

    #[test]
    fn detects_asymmetry() {
        let f = DenseForm::new(2, vec![1.0, 2.0, 2.5, 1.0], 1e-12).unwrap();
        assert!(!f.is_symmetric());
        assert!(LowRankForm::new(
            vec![0.0],
            vec![vec![1.0]; 2],
            vec![vec![0.0, 1.0], vec![2.0, 0.0]]
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_bilinear(
            a in proptest::collection::vec(-5.0..5.0f64, 3),
            b in proptest::collection::vec(-5.0..5.0f64, 3),
            c in proptest::collection::vec(-5.0..5.0f64, 3),
            alpha in -3.0..3.0f64,
        ) {
            let (dense, low) = sample_forms();
            for form in [&dense as &dyn BilinearForm, &low] {
                let ab = form.eval(&a, &b);
                let ba = form.eval(&b, &a);
                prop_assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
                let comb: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + y).collect();
                let lhs = form.eval(&comb, &c);
                let rhs = alpha * form.eval(&a, &c) + form.eval(&b, &c);
                prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
            }
        }
    }
}

//! Random small problems that are stationary at the origin by construction.

#![allow(dead_code)]

use std::sync::Arc;

use kkt2_core::linalg::{DenseForm, WeightedVector, Weights};
use kkt2_core::model::{
    AbstractSet, Bound, BoxSet, ProblemSpec, QuadraticFunction, SmoothFunction,
};
use proptest::prelude::*;

#[derive(Debug, Clone)]
pub struct Raw {
    pub n: usize,
    /// 0 interior, 1 lower bound active, 2 upper bound active, 3 fixed.
    pub kinds: Vec<u8>,
    pub weights: Vec<f64>,
    pub grads: Vec<Vec<f64>>,
    pub hessians: Vec<Vec<f64>>,
    pub f_hessian: Vec<f64>,
    pub m1: usize,
    pub mu_star: Vec<f64>,
    pub nu: Vec<f64>,
    /// Replace the last constraint gradient by a copy of the first.
    pub duplicate: bool,
    pub h: Vec<f64>,
}

fn symmetric(n: usize, raw: &[f64]) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] = 0.5 * (raw[i * n + j] + raw[j * n + i]);
        }
    }
    h
}

pub fn raw_problem() -> impl Strategy<Value = Raw> {
    (1usize..=4, 1usize..=3).prop_flat_map(|(n, m)| {
        (
            proptest::collection::vec(0u8..4, n),
            proptest::collection::vec(0.5..2.0f64, n),
            proptest::collection::vec(proptest::collection::vec(-1.0..1.0f64, n), m),
            proptest::collection::vec(proptest::collection::vec(-1.0..1.0f64, n * n), m),
            proptest::collection::vec(-1.0..1.0f64, n * n),
            0..=m,
            proptest::collection::vec(0.0..1.0f64, m),
            proptest::collection::vec(0.0..1.0f64, n),
            any::<bool>(),
            proptest::collection::vec(-1.0..1.0f64, n),
        )
            .prop_map(
                move |(kinds, weights, grads, hs, fh, m1, mu_star, nu, duplicate, h)| Raw {
                    n,
                    kinds,
                    weights,
                    grads,
                    hessians: hs.iter().map(|r| symmetric(n, r)).collect(),
                    f_hessian: symmetric(n, &fh),
                    m1,
                    mu_star,
                    nu,
                    duplicate,
                    h,
                },
            )
    })
}

impl Raw {
    pub fn m(&self) -> usize {
        self.grads.len()
    }

    fn grads(&self) -> Vec<Vec<f64>> {
        let mut g = self.grads.clone();
        if self.duplicate && g.len() > 1 {
            let last = g.len() - 1;
            g[last] = g[0].clone();
        }
        g
    }

    /// Builds the problem with constraint `i` scaled by `scale[i]`.
    pub fn build_scaled(&self, scale: &[f64]) -> (ProblemSpec, WeightedVector) {
        let n = self.n;
        let w = Weights::new(self.weights.clone()).unwrap();
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        for &k in &self.kinds {
            let (l, u) = match k {
                0 => (Bound::Finite(-1.0), Bound::Finite(1.0)),
                1 => (Bound::Finite(0.0), Bound::Finite(1.0)),
                2 => (Bound::Finite(-1.0), Bound::Finite(0.0)),
                _ => (Bound::Finite(0.0), Bound::Finite(0.0)),
            };
            lo.push(l);
            hi.push(u);
        }
        let set = AbstractSet::Box(BoxSet::new(lo, hi).unwrap());
        let grads = self.grads();
        // f' = -nu - sum mu* g', with nu in the normal cone of the box at 0
        let mut c = vec![0.0; n];
        for j in 0..n {
            let nu = match self.kinds[j] {
                0 => 0.0,
                1 => -self.nu[j],
                2 => self.nu[j],
                _ => self.nu[j] - 0.5,
            };
            c[j] = -nu;
        }
        for (i, g) in grads.iter().enumerate() {
            let mu = if i < self.m1 {
                self.mu_star[i] - 0.5
            } else {
                self.mu_star[i]
            };
            for j in 0..n {
                c[j] -= mu * g[j];
            }
        }
        let quad = |lin: Vec<f64>, h: &[f64]| -> Arc<dyn SmoothFunction> {
            let form = DenseForm::new(n, h.to_vec(), 1e-12).unwrap();
            Arc::new(QuadraticFunction::new(w.clone(), 0.0, lin, Arc::new(form)).unwrap())
        };
        let objective = quad(c, &self.f_hessian);
        let constraints = grads
            .iter()
            .zip(&self.hessians)
            .zip(scale)
            .map(|((g, h), s)| {
                let g: Vec<f64> = g.iter().map(|v| v * s).collect();
                let h: Vec<f64> = h.iter().map(|v| v * s).collect();
                quad(g, &h)
            })
            .collect();
        let p = ProblemSpec::new(objective, constraints, self.m1, set, w.clone()).unwrap();
        let x = p.point(vec![0.0; n]).unwrap();
        (p, x)
    }

    pub fn build(&self) -> (ProblemSpec, WeightedVector) {
        self.build_scaled(&vec![1.0; self.m()])
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

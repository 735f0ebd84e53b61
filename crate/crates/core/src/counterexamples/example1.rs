//! Non-unique multipliers on a grid discretization of `L^2(0,1)` with box
//! constraints `-1 <= x <= 1` and one equality constraint.
//!
//! Cells are `((j)/N, (j+1)/N)`; an interval indicator is the cell-constant
//! vector equal to 1 on cells inside the interval. With `N` a multiple of 12
//! every breakpoint (1/4, 1/3, 2/3, 3/4) is a node and all integrals are sums.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{LowRankForm, WeightedVector, Weights};
use crate::model::{AbstractSet, BoxSet, ProblemSpec, QuadraticFunction, SmoothFunction};

pub const A1: [[f64; 2]; 2] = [[1.0, 1.0], [1.0, -1.0]];
pub const A2: [[f64; 2]; 2] = [[-2.0, 1.0], [1.0, 1.0]];

#[derive(Debug, Clone)]
pub struct Example1 {
    pub n: usize,
    pub problem: ProblemSpec,
    pub x_bar: WeightedVector,
}

impl Example1 {
    pub fn indicator(&self, a: f64, b: f64) -> WeightedVector {
        WeightedVector::new(indicator(self.n, a, b), self.problem.weights().clone())
            .expect("grid weights match")
    }

    /// `χ_(0,1/3)`, one of the two directions of the fixed-multiplier argument.
    pub fn h1(&self) -> WeightedVector {
        self.indicator(0.0, 1.0 / 3.0)
    }

    /// `-χ_(3/4,1)`.
    pub fn h2(&self) -> WeightedVector {
        self.indicator(0.75, 1.0).scaled(-1.0)
    }
}

/// Cell-constant indicator of `(a, b)`: cells whose midpoint lies inside.
pub fn indicator(n: usize, a: f64, b: f64) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let t = (j as f64 + 0.5) / n as f64;
            if t > a && t < b {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// `x̄(t)` at cell midpoints: -1 on (0,1/3), `6t - 3` on (1/3,2/3), 1 on (2/3,1).
pub fn x_bar(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let t = (j as f64 + 0.5) / n as f64;
            if t < 1.0 / 3.0 {
                -1.0
            } else if t < 2.0 / 3.0 {
                6.0 * t - 3.0
            } else {
                1.0
            }
        })
        .collect()
}

/// Plain-coefficient functionals `(avg over (0,1/3), -avg over (3/4,1))`.
fn hat_functionals(n: usize) -> Vec<Vec<f64>> {
    let w = 1.0 / n as f64;
    let u1 = indicator(n, 0.0, 1.0 / 3.0)
        .into_iter()
        .map(|v| 3.0 * w * v)
        .collect();
    let u2 = indicator(n, 0.75, 1.0)
        .into_iter()
        .map(|v| -4.0 * w * v)
        .collect();
    vec![u1, u2]
}

/// Core of `f''` in the hat coordinates: the mean-removal terms contribute
/// `-(b - a) avg²` on each outer interval, on top of `2 A1`.
fn f_core() -> Vec<Vec<f64>> {
    vec![
        vec![2.0 * A1[0][0] - 1.0 / 3.0, 2.0 * A1[0][1]],
        vec![2.0 * A1[1][0], 2.0 * A1[1][1] - 0.25],
    ]
}

fn g_core() -> Vec<Vec<f64>> {
    (0..2)
        .map(|i| (0..2).map(|j| 2.0 * (A2[i][j] - A1[i][j])).collect())
        .collect()
}

pub fn build_example1(n: usize) -> Result<Example1> {
    if n == 0 || n % 12 != 0 {
        return Err(Error::InvalidProblem(format!(
            "grid size must be a positive multiple of 12, got {n}"
        )));
    }
    let weights = Weights::uniform_grid(n);
    let w = 1.0 / n as f64;
    let center = x_bar(n);

    let f_lin: Vec<f64> = indicator(n, 2.0 / 3.0, 0.75)
        .into_iter()
        .map(|v| -w * v)
        .collect();
    let g_lin: Vec<f64> = indicator(n, 0.0, 0.25)
        .into_iter()
        .zip(indicator(n, 2.0 / 3.0, 0.75))
        .map(|(a, b)| w * (a + b))
        .collect();
    let f_hess = LowRankForm::new(vec![w; n], hat_functionals(n), f_core())?;
    let g_hess = LowRankForm::new(vec![0.0; n], hat_functionals(n), g_core())?;

    let f: Arc<dyn SmoothFunction> = Arc::new(
        QuadraticFunction::new(weights.clone(), 0.0, f_lin, Arc::new(f_hess))?
            .centered_at(center.clone())?,
    );
    let g: Arc<dyn SmoothFunction> = Arc::new(
        QuadraticFunction::new(weights.clone(), 0.0, g_lin, Arc::new(g_hess))?
            .centered_at(center.clone())?,
    );
    let set = AbstractSet::Box(BoxSet::uniform(n, -1.0, 1.0)?);
    let problem = ProblemSpec::new(f, vec![g], 1, set, weights.clone())?;
    let x_bar = WeightedVector::new(center, weights)?;
    Ok(Example1 { n, problem, x_bar })
}

/// `max(xᵀA1x, xᵀA2x) - ½‖x‖²` for `x >= 0`.
pub fn matrix_margin(x: [f64; 2]) -> f64 {
    let quad = |a: &[[f64; 2]; 2]| {
        a[0][0] * x[0] * x[0] + 2.0 * a[0][1] * x[0] * x[1] + a[1][1] * x[1] * x[1]
    };
    quad(&A1).max(quad(&A2)) - 0.5 * (x[0] * x[0] + x[1] * x[1])
}

/// Diagonal of `B_λ = λ A1 + (1 - λ) A2`.
pub fn b_lambda_diagonal(lambda: f64) -> [f64; 2] {
    [
        lambda * A1[0][0] + (1.0 - lambda) * A2[0][0],
        lambda * A1[1][1] + (1.0 - lambda) * A2[1][1],
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixPropertyReport {
    pub grid_points: usize,
    pub random_samples: usize,
    /// Smallest `max(xᵀA1x, xᵀA2x) - ½‖x‖²` over unit-norm samples.
    pub min_margin: f64,
    pub worst_point: [f64; 2],
    /// `(λ, index of a negative diagonal entry of B_λ)`, `None` when coercive.
    pub non_coercive: Vec<(f64, Option<usize>)>,
    pub passed: bool,
}

/// Checks the two-matrix inequality on an angular grid of the nonnegative
/// quadrant (spacing `angle_step`) plus seeded random nonnegative samples,
/// and that every `B_λ` on `λ = 0, 0.05, ..., 1` has a negative diagonal entry.
pub fn verify_matrix_property(
    samples: usize,
    angle_step: f64,
    seed: u64,
    tol: f64,
) -> MatrixPropertyReport {
    let mut min_margin = f64::INFINITY;
    let mut worst = [0.0, 0.0];
    let mut track = |x: [f64; 2]| {
        let nsq = x[0] * x[0] + x[1] * x[1];
        if nsq == 0.0 {
            return;
        }
        let m = matrix_margin(x) / nsq;
        if m < min_margin {
            min_margin = m;
            worst = x;
        }
    };
    let steps = (std::f64::consts::FRAC_PI_2 / angle_step).ceil() as usize;
    for i in 0..=steps {
        let t = (i as f64 * angle_step).min(std::f64::consts::FRAC_PI_2);
        track([t.cos(), t.sin()]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        track([scale * rng.random::<f64>(), scale * rng.random::<f64>()]);
    }
    let non_coercive: Vec<(f64, Option<usize>)> = (0..=20)
        .map(|i| {
            let l = i as f64 * 0.05;
            let d = b_lambda_diagonal(l);
            (l, d.iter().position(|v| *v < 0.0))
        })
        .collect();
    let passed = min_margin >= -tol && non_coercive.iter().all(|(_, i)| i.is_some());
    MatrixPropertyReport {
        grid_points: steps + 1,
        random_samples: samples,
        min_margin,
        worst_point: worst,
        non_coercive,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::active_set;

    #[test]
    fn rejects_unaligned_grid() {
        assert!(build_example1(10).is_err());
        assert!(build_example1(0).is_err());
    }

    #[test]
    fn derivatives_at_the_base_point() {
        let ex = build_example1(12).unwrap();
        let p = &ex.problem;
        let x = &ex.x_bar;
        assert_eq!(p.objective().value(x), 0.0);
        assert_eq!(p.constraints()[0].value(x), 0.0);
        let g = p.constraints()[0].gradient(x);
        let expect: Vec<f64> = (0..12)
            .map(|j| if j < 3 || j == 8 { 1.0 } else { 0.0 })
            .collect();
        for (a, b) in g.entries().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let f = p.objective().gradient(x);
        assert!((f.entries()[8] + 1.0).abs() < 1e-12);
        assert!(f
            .entries()
            .iter()
            .enumerate()
            .all(|(j, v)| j == 8 || v.abs() < 1e-12));
        let info = active_set(p, x).unwrap();
        assert_eq!(info.box_lower_active, vec![0, 1, 2, 3]);
        assert_eq!(info.box_upper_active, vec![8, 9, 10, 11]);
    }

    #[test]
    fn second_derivatives_on_indicators() {
        for n in [12, 24, 60] {
            let ex = build_example1(n).unwrap();
            let fh = ex.problem.objective().hessian(&ex.x_bar);
            let gh = ex.problem.constraints()[0].hessian(&ex.x_bar);
            let (h1, h2) = (ex.h1(), ex.h2());
            assert!((fh.quad(h1.entries()) - 2.0 * A1[0][0]).abs() < 1e-12);
            assert!((fh.quad(h2.entries()) - 2.0 * A1[1][1]).abs() < 1e-12);
            assert!((gh.quad(h1.entries()) - 2.0 * (A2[0][0] - A1[0][0])).abs() < 1e-12);
            assert!((gh.quad(h2.entries()) - 2.0 * (A2[1][1] - A1[1][1])).abs() < 1e-12);
        }
    }

    #[test]
    fn matrix_property_examples() {
        assert_eq!(matrix_margin([1.0, 0.0]), 0.5);
        assert_eq!(matrix_margin([1.0, 1.0]), 1.0);
        assert_eq!(b_lambda_diagonal(0.5), [-0.5, 0.0]);
        assert!(verify_matrix_property(1000, 1e-3, 3, 1e-9).passed);
    }
}

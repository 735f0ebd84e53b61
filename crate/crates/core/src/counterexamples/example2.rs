//! A polyhedric but not 2-polyhedric convex hull in `R^3`, truncated after `N`
//! generators on each of its two point sequences and completed at the origin
//! by the ray families of the missing generators.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{DenseForm, WeightedVector, Weights};
use crate::model::{
    AbstractSet, HullSet, ProblemSpec, QuadraticFunction, RayFamily, SmoothFunction,
};

/// `(1 + √3) / 2`, the positive root of `2γ² - 2γ - 1`.
pub fn gamma() -> f64 {
    (1.0 + 3f64.sqrt()) / 2.0
}

/// `(γ³ + 1) / (γ (γ + 1)²)`.
pub fn delta() -> f64 {
    let g = gamma();
    (g.powi(3) + 1.0) / (g * (g + 1.0).powi(2))
}

pub fn p_point(n: usize) -> [f64; 3] {
    let n = n as f64;
    [n.powi(-3), n.powi(-2), -n.powi(-4)]
}

pub fn q_point(n: usize) -> [f64; 3] {
    let s = n as f64 / gamma();
    [-s.powi(-3), s.powi(-2), 0.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Label {
    O,
    P(usize),
    Q(usize),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::O => write!(f, "O"),
            Label::P(n) => write!(f, "P{n}"),
            Label::Q(n) => write!(f, "Q{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowSense {
    Le,
    Ge,
}

/// `normal.x <= rhs` (or `>=`), tight exactly at `tight`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfSpace {
    pub name: String,
    pub k: Option<usize>,
    pub normal: [f64; 3],
    pub sense: RowSense,
    pub rhs: f64,
    pub tight: Vec<Label>,
}

impl HalfSpace {
    /// Signed slack, nonnegative when satisfied.
    pub fn slack(&self, x: &[f64; 3]) -> f64 {
        let v: f64 = self.normal.iter().zip(x).map(|(a, b)| a * b).sum();
        match self.sense {
            RowSense::Le => self.rhs - v,
            RowSense::Ge => v - self.rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Example2Set {
    pub trunc: usize,
    pub gamma: f64,
    pub delta: f64,
    pub points: Vec<(Label, [f64; 3])>,
    pub halfspaces: Vec<HalfSpace>,
}

pub fn halfspace_coefficients(k: usize) -> ([f64; 3], [f64; 3]) {
    let g = gamma();
    let g3 = g.powi(3);
    let kf = k as f64;
    let k1 = kf + 1.0;
    let a1 = kf * k1 * (2.0 * kf + 1.0);
    let b1 = g * (3.0 * kf * kf + 3.0 * kf + 1.0);
    let c1 = kf * a1 + kf * kf * b1 - g3 * kf.powi(4);
    let d4 = k1.powi(4) - kf.powi(4);
    let b2 = (g3 * d4 + k1.powi(3)) / (g3 * (2.0 * kf + 1.0) + g * g * k1);
    let a2 = d4 - (2.0 * kf + 1.0) * b2;
    let c2 = kf * a2 + kf * kf * b2 - kf.powi(4);
    ([a1, b1, c1], [a2, b2, c2])
}

impl Example2Set {
    pub fn new(trunc: usize) -> Self {
        let g = gamma();
        let mut points = vec![(Label::O, [0.0; 3])];
        for n in 1..=trunc {
            points.push((Label::P(n), p_point(n)));
            points.push((Label::Q(n), q_point(n)));
        }
        let mut halfspaces = vec![
            HalfSpace {
                name: "x3 <= 0".into(),
                k: None,
                normal: [0.0, 0.0, 1.0],
                sense: RowSense::Le,
                rhs: 0.0,
                tight: std::iter::once(Label::O)
                    .chain((1..=trunc).map(Label::Q))
                    .collect(),
            },
            HalfSpace {
                name: "(1, g, 1+g).x >= 0".into(),
                k: None,
                normal: [1.0, g, 1.0 + g],
                sense: RowSense::Ge,
                rhs: 0.0,
                tight: vec![Label::O, Label::P(1), Label::Q(1)],
            },
        ];
        for k in 1..trunc {
            let kf = k as f64;
            let (r1, r2) = halfspace_coefficients(k);
            halfspaces.push(HalfSpace {
                name: format!("(2k+1, -1, k(k+1)).x <= 0, k={k}"),
                k: Some(k),
                normal: [2.0 * kf + 1.0, -1.0, kf * (kf + 1.0)],
                sense: RowSense::Le,
                rhs: 0.0,
                tight: vec![Label::O, Label::P(k), Label::P(k + 1)],
            });
            halfspaces.push(HalfSpace {
                name: format!("(a1, b1, c1).x <= g^3, k={k}"),
                k: Some(k),
                normal: r1,
                sense: RowSense::Le,
                rhs: g.powi(3),
                tight: vec![Label::P(k), Label::Q(k), Label::Q(k + 1)],
            });
            halfspaces.push(HalfSpace {
                name: format!("(a2, b2, c2).x <= 1, k={k}"),
                k: Some(k),
                normal: r2,
                sense: RowSense::Le,
                rhs: 1.0,
                tight: vec![Label::P(k), Label::P(k + 1), Label::Q(k + 1)],
            });
        }
        for h in &mut halfspaces {
            h.tight.sort();
        }
        Example2Set {
            trunc,
            gamma: g,
            delta: delta(),
            points,
            halfspaces,
        }
    }

    pub fn hull(&self) -> HullSet {
        let g = self.gamma;
        HullSet {
            points: self.points.iter().map(|(_, p)| p.to_vec()).collect(),
            apex: vec![0.0; 3],
            families: vec![
                // n^4 P_n = (n, n², -1)
                RayFamily {
                    coeffs: vec![
                        vec![0.0, 0.0, -1.0],
                        vec![1.0, 0.0, 0.0],
                        vec![0.0, 1.0, 0.0],
                    ],
                    start: self.trunc,
                },
                // n³/γ² Q_n = (-γ, n, 0)
                RayFamily {
                    coeffs: vec![vec![-g, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
                    start: self.trunc,
                },
            ],
            limit_rays: vec![vec![0.0, 1.0, 0.0]],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Example2 {
    pub set: Example2Set,
    pub problem: ProblemSpec,
    pub x_bar: WeightedVector,
}

/// Minimize `-δ x2² - x3` over the truncated hull subject to `x1 = 0`.
pub fn build_example2(trunc: usize) -> Result<Example2> {
    if trunc < 2 {
        return Err(Error::InvalidProblem(format!(
            "truncation must be at least 2, got {trunc}"
        )));
    }
    let set = Example2Set::new(trunc);
    let w = Weights::ones(3);
    let f: Arc<dyn SmoothFunction> = Arc::new(QuadraticFunction::new(
        w.clone(),
        0.0,
        vec![0.0, 0.0, -1.0],
        Arc::new(DenseForm::diagonal(&[0.0, -2.0 * set.delta, 0.0])),
    )?);
    let g: Arc<dyn SmoothFunction> = Arc::new(QuadraticFunction::new(
        w.clone(),
        0.0,
        vec![1.0, 0.0, 0.0],
        Arc::new(DenseForm::zero(3)),
    )?);
    let problem = ProblemSpec::new(f, vec![g], 1, AbstractSet::Hull(set.hull()), w.clone())?;
    let x_bar = WeightedVector::new(vec![0.0; 3], w)?;
    Ok(Example2 {
        set,
        problem,
        x_bar,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowCheck {
    pub name: String,
    pub min_slack: f64,
    /// Points with `|slack| <= tol`.
    pub tight: Vec<Label>,
    pub expected: Vec<Label>,
    pub violators: Vec<Label>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfspaceReport {
    pub rows: Vec<RowCheck>,
    pub passed: bool,
}

impl HalfspaceReport {
    pub fn failures(&self) -> impl Iterator<Item = &RowCheck> {
        self.rows.iter().filter(|r| !r.passed)
    }
}

/// Checks every listed row with `k <= k_max`: all points satisfy it and
/// exactly the annotated points are tight.
pub fn verify_halfspace_representation(
    set: &Example2Set,
    k_max: usize,
    tol: f64,
) -> HalfspaceReport {
    let rows: Vec<RowCheck> = set
        .halfspaces
        .iter()
        .filter(|h| h.k.is_none_or(|k| k <= k_max))
        .map(|h| {
            let mut tight = Vec::new();
            let mut violators = Vec::new();
            let mut min_slack = f64::INFINITY;
            for (label, x) in &set.points {
                let s = h.slack(x);
                min_slack = min_slack.min(s);
                if s < -tol {
                    violators.push(*label);
                } else if s <= tol {
                    tight.push(*label);
                }
            }
            tight.sort();
            let passed = violators.is_empty() && tight == h.tight;
            RowCheck {
                name: h.name.clone(),
                min_slack,
                tight,
                expected: h.tight.clone(),
                violators,
                passed,
            }
        })
        .collect();
    let passed = rows.iter().all(|r| r.passed);
    HalfspaceReport { rows, passed }
}

/// `λ_{k,n} = 1 / (1 + (n / (kγ))³)`.
pub fn lambda_kn(k: usize, n: usize) -> f64 {
    1.0 / (1.0 + (n as f64 / (k as f64 * gamma())).powi(3))
}

/// Intersection of the segment `[P_k, Q_n]` with `x1 = 0`.
pub fn r_point(k: usize, n: usize) -> [f64; 3] {
    let l = lambda_kn(k, n);
    let kf = k as f64;
    let s = n as f64 / gamma();
    [
        0.0,
        l * kf.powi(-2) + (1.0 - l) * s.powi(-2),
        -l * kf.powi(-4),
    ]
}

/// `(γ³k³ + n³)/(γ³ + 1) - k(γk + n)²/(γ + 1)²`, nonnegative exactly when `R_{k,n} ∈ M`.
pub fn m_inequality(k: usize, n: usize) -> f64 {
    let g = gamma();
    let (kf, nf) = (k as f64, n as f64);
    (g.powi(3) * kf.powi(3) + nf.powi(3)) / (g.powi(3) + 1.0)
        - kf * (g * kf + nf).powi(2) / (g + 1.0).powi(2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MContainmentReport {
    pub k_max: usize,
    pub n_max: usize,
    /// Largest `x3 + δ x2²` over `R_{k,n}`; must be `<= tol`.
    pub max_excess: f64,
    /// Largest `|x3 + δ x2²|` over `R_{n,n}`.
    pub max_diagonal_gap: f64,
    /// Smallest value of the scalar inequality, relative to its leading term.
    pub min_relative_inequality: f64,
    pub offending: Vec<(usize, usize)>,
    pub passed: bool,
}

pub fn verify_m_containment(k_max: usize, n_max: usize, tol: f64) -> MContainmentReport {
    let d = delta();
    let mut max_excess = f64::NEG_INFINITY;
    let mut max_diagonal_gap = 0.0f64;
    let mut min_rel = f64::INFINITY;
    let mut offending = Vec::new();
    for k in 1..=k_max {
        for n in 1..=n_max {
            let r = r_point(k, n);
            let excess = r[2] + d * r[1] * r[1];
            max_excess = max_excess.max(excess);
            let scale = (k.max(n) as f64).powi(3);
            let rel = m_inequality(k, n) / scale;
            min_rel = min_rel.min(rel);
            let bad = r[1] < -tol || excess > tol || rel < -tol;
            if k == n {
                max_diagonal_gap = max_diagonal_gap.max(excess.abs());
            }
            if bad || (k == n && (excess.abs() > tol || rel.abs() > tol)) {
                offending.push((k, n));
            }
        }
    }
    MContainmentReport {
        k_max,
        n_max,
        max_excess,
        max_diagonal_gap,
        min_relative_inequality: min_rel,
        passed: offending.is_empty(),
        offending,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        let g = gamma();
        assert!((2.0 * g * g - 2.0 * g - 1.0).abs() < 1e-15);
        assert!((delta() - 0.464_101_615_137_754_6).abs() < 1e-12);
    }

    #[test]
    fn scaled_p_points() {
        let p = p_point(10);
        let s: Vec<f64> = p.iter().map(|v| v * 100.0).collect();
        assert!(
            (s[0] - 0.1).abs() < 1e-15 && (s[1] - 1.0).abs() < 1e-15 && (s[2] + 0.01).abs() < 1e-15
        );
    }

    #[test]
    fn families_reproduce_generators_up_to_scale() {
        let set = Example2Set::new(4);
        let hull = set.hull();
        for n in 5..9 {
            let r = hull.families[0].ray(n);
            let p = p_point(n);
            let s = (n as f64).powi(4);
            assert!(r.iter().zip(&p).all(|(a, b)| (a - s * b).abs() < 1e-9 * s));
            let r = hull.families[1].ray(n);
            let q = q_point(n);
            let s = (n as f64).powi(3) / gamma().powi(2);
            assert!(r
                .iter()
                .zip(&q)
                .all(|(a, b)| (a - s * b).abs() < 1e-9 * (1.0 + s)));
        }
    }

    #[test]
    fn first_rows_by_hand() {
        let set = Example2Set::new(3);
        let row = set
            .halfspaces
            .iter()
            .find(|h| h.name.starts_with("(2k+1") && h.k == Some(1))
            .unwrap();
        assert_eq!(row.slack(&p_point(1)), 0.0);
        assert_eq!(set.halfspaces[0].slack(&q_point(2)), 0.0);
        assert!(set.halfspaces[0].slack(&p_point(2)) > 0.0);
    }

    #[test]
    fn halfspaces_at_small_truncation() {
        let set = Example2Set::new(6);
        let r = verify_halfspace_representation(&set, 4, 1e-10);
        assert!(r.passed, "{:?}", r.failures().collect::<Vec<_>>());
    }

    #[test]
    fn m_containment_small() {
        assert!(m_inequality(1, 1).abs() < 1e-12);
        assert!(m_inequality(1, 2) > 0.0);
        assert!((lambda_kn(3, 3) - 1.0 / (1.0 + gamma().powi(-3))).abs() < 1e-15);
        assert!(verify_m_containment(8, 8, 1e-10).passed);
    }
}

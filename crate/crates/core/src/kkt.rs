//! First-order certification: Lagrangian, multiplier polytope, constraint
//! qualifications and the stationarity residual.

use serde::Serialize;

use crate::cones::{
    image_difference_polar, polar_rows, radial_cone, tangent_cone, tangent_cone_k, SetCone, Sign,
    SignPatternCone,
};
use crate::error::{Error, Result};
use crate::linalg::{
    enumerate_vertices, max_abs, polytope::MAX_VERTEX_DIM, recession_ray, solve_lp, LinearProgram,
    LpOutcome, PolytopeH, WeightedVector,
};
use crate::model::{active_set, ActiveSetInfo, ProblemSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    /// Riesz representative of the abstract-constraint multiplier.
    pub lambda: WeightedVector,
    pub mu: Vec<f64>,
}

/// `Λ(x̄)` parameterized by `μ`, with `λ(μ) = -f'(x̄) - Σ μ_i g_i'(x̄)`.
#[derive(Debug, Clone)]
pub struct MultiplierSet {
    pub x: WeightedVector,
    pub info: ActiveSetInfo,
    pub polytope: PolytopeH,
    pub empty: bool,
    pub bounded: bool,
    /// Vertices in `μ`; `None` when the set is empty, unbounded or too large to enumerate.
    pub vertices: Option<Vec<Vec<f64>>>,
    /// A nonzero recession direction when unbounded.
    pub recession: Option<Vec<f64>>,
    objective_gradient: WeightedVector,
    constraint_gradients: Vec<WeightedVector>,
}

impl MultiplierSet {
    pub fn m(&self) -> usize {
        self.polytope.dim
    }

    pub fn lambda(&self, mu: &[f64]) -> WeightedVector {
        let mut l = self.objective_gradient.scaled(-1.0);
        for (g, m) in self.constraint_gradients.iter().zip(mu) {
            l = l.axpy(-m, g);
        }
        l
    }

    pub fn multipliers(&self, mu: &[f64]) -> Multipliers {
        Multipliers {
            lambda: self.lambda(mu),
            mu: mu.to_vec(),
        }
    }

    pub fn contains(&self, mu: &[f64], tol: f64) -> bool {
        mu.len() == self.m() && self.polytope.contains(mu, tol)
    }

    pub fn vertices(&self) -> Result<&[Vec<f64>]> {
        if self.empty {
            return Err(Error::EmptyMultiplierSet);
        }
        if !self.bounded {
            return Err(Error::UnboundedMultiplierSet);
        }
        self.vertices.as_deref().ok_or_else(|| {
            Error::Unsupported(format!(
                "vertex enumeration above dimension {MAX_VERTEX_DIM}"
            ))
        })
    }

    pub fn is_singleton(&self, tol: f64) -> bool {
        matches!(self.vertices.as_deref(), Some([_])) || self.vertex_spread() <= tol
    }

    fn vertex_spread(&self) -> f64 {
        match self.vertices.as_deref() {
            Some([first, rest @ ..]) if !rest.is_empty() => rest
                .iter()
                .map(|v| {
                    v.iter()
                        .zip(first)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max),
            _ => f64::INFINITY,
        }
    }

    /// `[min μ, max μ]` for a single constraint.
    pub fn interval(&self) -> Option<(f64, f64)> {
        let v = self.vertices.as_ref()?;
        if self.m() != 1 || v.is_empty() {
            return None;
        }
        let lo = v.iter().map(|x| x[0]).fold(f64::INFINITY, f64::min);
        let hi = v.iter().map(|x| x[0]).fold(f64::NEG_INFINITY, f64::max);
        Some((lo, hi))
    }

    /// Mean of the vertices, a relative-interior point for bounded sets.
    pub fn center(&self) -> Result<Vec<f64>> {
        let v = self.vertices()?;
        let k = v.len() as f64;
        Ok((0..self.m())
            .map(|i| v.iter().map(|x| x[i]).sum::<f64>() / k)
            .collect())
    }
}

pub fn lagrangian_value(p: &ProblemSpec, x: &WeightedVector, mult: &Multipliers) -> f64 {
    let g: f64 = p
        .constraints()
        .iter()
        .zip(&mult.mu)
        .map(|(g, m)| m * g.value(x))
        .sum();
    p.objective().value(x) + mult.lambda.dot(x) + g
}

fn identity_cols(m: usize, sign: f64) -> Vec<Vec<f64>> {
    (0..m)
        .map(|i| {
            let mut e = vec![0.0; m];
            e[i] = sign;
            e
        })
        .collect()
}

pub fn multiplier_set(p: &ProblemSpec, x: &WeightedVector) -> Result<MultiplierSet> {
    let info = active_set(p, x)?;
    let m = p.m();
    let tc = tangent_cone(p.set(), x.entries(), p.tol().activity)?;
    let f_plain = p.objective().derivative(x);
    let c0: Vec<f64> = f_plain.iter().map(|v| -v).collect();
    let cols: Vec<Vec<f64>> = p
        .constraints()
        .iter()
        .map(|g| g.derivative(x).into_iter().map(|v| -v).collect())
        .collect();
    let (mut eqs, mut ineqs) = polar_rows(&tc, &c0, &cols);
    let tk = SetCone::Pattern(tangent_cone_k(p, &info));
    let (e2, i2) = polar_rows(&tk, &vec![0.0; m], &identity_cols(m, 1.0));
    eqs.extend(e2);
    ineqs.extend(i2);
    let polytope = PolytopeH::new(m, eqs, ineqs)?;

    let empty = polytope.is_empty()?;
    let recession = recession_ray(&polytope)?;
    let bounded = recession.is_none();
    let vertices = if !empty && bounded && m <= MAX_VERTEX_DIM {
        Some(enumerate_vertices(
            &polytope,
            p.tol().feasibility,
            p.tol().vertex_dedup,
        )?)
    } else {
        None
    };
    Ok(MultiplierSet {
        x: x.clone(),
        info,
        polytope,
        empty,
        bounded,
        vertices,
        recession,
        objective_gradient: p.objective().gradient(x),
        constraint_gradients: p.constraints().iter().map(|g| g.gradient(x)).collect(),
    })
}

/// Largest violation of the multiplier conditions; `<= 1e-9` (relative) means `mult ∈ Λ(x̄)`.
pub fn multiplier_defect(p: &ProblemSpec, x: &WeightedVector, mult: &Multipliers) -> Result<f64> {
    let info = active_set(p, x)?;
    let m = p.m();
    if mult.mu.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: mult.mu.len(),
        });
    }
    let mut residual = p.objective().gradient(x).axpy(1.0, &mult.lambda);
    for (g, mu) in p.constraints().iter().zip(&mult.mu) {
        residual = residual.axpy(*mu, &g.gradient(x));
    }
    let mut defect = residual.max_abs();
    let tk = tangent_cone_k(p, &info);
    for (s, mu) in tk.polar().signs().iter().zip(&mult.mu) {
        let v = match s {
            Sign::NonNeg => (-mu).max(0.0),
            Sign::NonPos => mu.max(0.0),
            Sign::Zero => mu.abs(),
            Sign::Free => 0.0,
        };
        defect = defect.max(v);
    }
    let tc = tangent_cone(p.set(), x.entries(), p.tol().activity)?;
    let plain = plain(&mult.lambda);
    let (eqs, ineqs) = polar_rows(&tc, &plain, &[]);
    for r in &eqs {
        defect = defect.max(r.rhs.abs());
    }
    for r in &ineqs {
        defect = defect.max((-r.rhs).max(0.0));
    }
    Ok(defect)
}

fn require_multiplier(p: &ProblemSpec, x: &WeightedVector, mult: &Multipliers) -> Result<()> {
    let d = multiplier_defect(p, x, mult)?;
    let scale = 1.0 + mult.lambda.max_abs() + max_abs(&mult.mu);
    if d > p.tol().feasibility * scale {
        return Err(Error::NotAMultiplier(format!("defect {d:e}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CqVerdict {
    Holds,
    /// `witness` is a nonzero element of the polar of the image cone.
    Fails {
        witness: Vec<f64>,
    },
}

impl CqVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, CqVerdict::Holds)
    }
}

fn surjectivity(
    p: &ProblemSpec,
    x: &WeightedVector,
    a: &SetCone,
    b: &SignPatternCone,
) -> Result<CqVerdict> {
    let jac: Vec<Vec<f64>> = p.constraints().iter().map(|g| g.derivative(x)).collect();
    let polar = image_difference_polar(a, &jac, b);
    Ok(match recession_ray(&polar)? {
        None => CqVerdict::Holds,
        Some(witness) => CqVerdict::Fails { witness },
    })
}

/// `g'(x̄) R_C(x̄) - R_K(g(x̄)) = R^m`, decided through its polar.
pub fn check_rzkcq(p: &ProblemSpec, x: &WeightedVector) -> Result<CqVerdict> {
    let info = active_set(p, x)?;
    let rc = radial_cone(p.set(), x.entries(), p.tol().activity)?;
    surjectivity(p, x, &rc, &tangent_cone_k(p, &info))
}

/// `g'(x̄) T_C(x̄) - T_K(g(x̄)) = R^m`.
pub fn check_weaker_cq(p: &ProblemSpec, x: &WeightedVector) -> Result<CqVerdict> {
    let info = active_set(p, x)?;
    let tc = tangent_cone(p.set(), x.entries(), p.tol().activity)?;
    surjectivity(p, x, &tc, &tangent_cone_k(p, &info))
}

/// The cone `g'(x̄)[R_C ∩ λ⊥] - [T_K ∩ μ⊥]`, described through its polar.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum AchievedCone {
    Whole,
    /// `(-inf, 0]`
    NonPositive,
    /// `[0, inf)`
    NonNegative,
    Origin,
    /// Contained in the half-space `{z : normal.z <= 0}`.
    Proper {
        normal: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrictCqReport {
    pub holds: bool,
    pub cone: AchievedCone,
    pub mu: Vec<f64>,
}

pub fn check_strict_cq(
    p: &ProblemSpec,
    x: &WeightedVector,
    mult: &Multipliers,
) -> Result<StrictCqReport> {
    require_multiplier(p, x, mult)?;
    let info = active_set(p, x)?;
    let tol = p.tol().feasibility.sqrt();
    let plain = plain(&mult.lambda);
    let a = radial_cone(p.set(), x.entries(), p.tol().activity)?.intersect_annihilator(&plain, tol);
    let b = tangent_cone_k(p, &info).intersect_annihilator(&mult.mu, tol);
    let jac: Vec<Vec<f64>> = p.constraints().iter().map(|g| g.derivative(x)).collect();
    let polar = image_difference_polar(&a, &jac, &b);
    let m = p.m();
    let cone = if m == 1 {
        let probe = |s: f64| -> Result<bool> {
            let lp = LinearProgram::maximize(vec![s]).with_rows(&polar.eq_rows, &polar.ineq_rows);
            Ok(matches!(solve_lp(&lp)?, LpOutcome::Unbounded { .. }))
        };
        match (probe(1.0)?, probe(-1.0)?) {
            (false, false) => AchievedCone::Whole,
            (true, false) => AchievedCone::NonPositive,
            (false, true) => AchievedCone::NonNegative,
            (true, true) => AchievedCone::Origin,
        }
    } else {
        match recession_ray(&polar)? {
            None => AchievedCone::Whole,
            Some(normal) => AchievedCone::Proper { normal },
        }
    };
    Ok(StrictCqReport {
        holds: cone == AchievedCone::Whole,
        cone,
        mu: mult.mu.clone(),
    })
}

#[derive(Debug, Clone)]
pub enum FocVerdict {
    Stationary(Box<MultiplierSet>),
    NotStationary { residual: f64, mu: Vec<f64> },
}

const RESIDUAL_ITERS: usize = 2000;
const DYKSTRA_SWEEPS: usize = 200;

/// Stationarity check. When `Λ(x̄)` is empty, reports `min_μ dist_w(λ(μ), N_C(x̄))`
/// over admissible `μ`.
pub fn foc_residual(p: &ProblemSpec, x: &WeightedVector) -> Result<FocVerdict> {
    let mset = multiplier_set(p, x)?;
    if !mset.empty {
        return Ok(FocVerdict::Stationary(Box::new(mset)));
    }
    let tc = tangent_cone(p.set(), x.entries(), p.tol().activity)?;
    let mu_pattern = tangent_cone_k(p, &mset.info).polar();
    let m = p.m();
    let w = x.weights().clone();
    let grads = &mset.constraint_gradients;

    let dist = |mu: &[f64]| -> (f64, WeightedVector) {
        let lam = mset.lambda(mu);
        let proj = project_normal_cone(&tc, &lam);
        let diff = lam.sub(&proj);
        (diff.norm(), diff)
    };
    // Lipschitz bound of the gradient of 1/2 dist^2 in μ: largest Gram eigenvalue <= trace
    let lip: f64 = grads.iter().map(|g| g.norm_sq()).sum::<f64>().max(1e-300);
    let mut mu = vec![0.0; m];
    let (mut best, _) = dist(&mu);
    let mut best_mu = mu.clone();
    for _ in 0..RESIDUAL_ITERS {
        if m == 0 {
            break;
        }
        let (_, diff) = dist(&mu);
        // d/dμ_i 1/2 |λ(μ) - P(λ(μ))|^2 = -<diff, ∇g_i>
        let grad: Vec<f64> = grads
            .iter()
            .map(|g| -w.dot(diff.entries(), g.entries()))
            .collect();
        for i in 0..m {
            mu[i] -= grad[i] / lip;
        }
        mu_pattern.project(&mut mu);
        let (d, _) = dist(&mu);
        if d < best - 1e-15 {
            best = d;
            best_mu = mu.clone();
        } else if max_abs(&grad) < 1e-14 {
            break;
        }
    }
    Ok(FocVerdict::NotStationary {
        residual: best,
        mu: best_mu,
    })
}

/// Weighted projection onto `T°`.
fn project_normal_cone(tc: &SetCone, v: &WeightedVector) -> WeightedVector {
    match tc {
        SetCone::Pattern(pat) => {
            let mut e = v.entries().to_vec();
            pat.polar().project(&mut e);
            v.with_entries(e)
        }
        SetCone::Generated(g) => {
            // Dykstra over the half-spaces {ν : <ν, r>_w <= 0}, one per generator
            let w = v.weights();
            let gens = g.generators();
            let mut z = v.entries().to_vec();
            let mut incr = vec![vec![0.0; z.len()]; gens.len()];
            for _ in 0..DYKSTRA_SWEEPS {
                let mut moved = 0.0_f64;
                for (r, inc) in gens.iter().zip(incr.iter_mut()) {
                    let y: Vec<f64> = z.iter().zip(inc.iter()).map(|(a, b)| a + b).collect();
                    let s = w.dot(&y, r);
                    let rr = w.norm_sq(r);
                    let proj: Vec<f64> = if s > 0.0 && rr > 0.0 {
                        y.iter().zip(r).map(|(a, b)| a - s / rr * b).collect()
                    } else {
                        y.clone()
                    };
                    for j in 0..z.len() {
                        inc[j] = y[j] - proj[j];
                        moved = moved.max((proj[j] - z[j]).abs());
                    }
                    z = proj;
                }
                if moved < 1e-14 {
                    break;
                }
            }
            v.with_entries(z)
        }
    }
}

/// Plain coefficients `w * v` of the functional represented by `v`.
pub(crate) fn plain(v: &WeightedVector) -> Vec<f64> {
    v.entries()
        .iter()
        .zip(v.weights().as_slice())
        .map(|(a, w)| a * w)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseForm, Weights};
    use crate::model::{AbstractSet, BoxSet, QuadraticFunction, SmoothFunction};
    use std::sync::Arc;

    fn affine(l: &[f64], c: f64) -> Arc<dyn SmoothFunction> {
        let n = l.len();
        Arc::new(
            QuadraticFunction::new(
                Weights::ones(n),
                c,
                l.to_vec(),
                Arc::new(DenseForm::zero(n)),
            )
            .unwrap(),
        )
    }

    fn problem(
        f: Arc<dyn SmoothFunction>,
        g: Vec<Arc<dyn SmoothFunction>>,
        m1: usize,
        b: BoxSet,
    ) -> ProblemSpec {
        let n = b.dim();
        ProblemSpec::new(f, g, m1, AbstractSet::Box(b), Weights::ones(n)).unwrap()
    }

    #[test]
    fn unconstrained_interior_stationary_point() {
        let p = problem(affine(&[0.0, 0.0], 0.0), vec![], 0, BoxSet::unbounded(2));
        let x = p.point(vec![0.3, 0.1]).unwrap();
        let mset = multiplier_set(&p, &x).unwrap();
        assert!(!mset.empty && mset.bounded);
        assert_eq!(mset.vertices().unwrap(), &[Vec::<f64>::new()]);
        assert_eq!(mset.lambda(&[]).entries(), &[0.0, 0.0]);
    }

    #[test]
    fn nonstationary_residual_is_gradient_norm() {
        let p = problem(affine(&[3.0, 4.0], 0.0), vec![], 0, BoxSet::unbounded(2));
        let x = p.point(vec![0.0, 0.0]).unwrap();
        match foc_residual(&p, &x).unwrap() {
            FocVerdict::NotStationary { residual, .. } => assert!((residual - 5.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn residual_minimizes_over_multipliers() {
        // λ(μ) = -(1, 1) - μ(1, 0) with μ >= 0: best μ = 0, residual √2
        let p = problem(
            affine(&[1.0, 1.0], 0.0),
            vec![affine(&[1.0, 0.0], 0.0)],
            0,
            BoxSet::unbounded(2),
        );
        let x = p.point(vec![0.0, 0.0]).unwrap();
        match foc_residual(&p, &x).unwrap() {
            FocVerdict::NotStationary { residual, mu } => {
                assert!((residual - 2f64.sqrt()).abs() < 1e-9, "{residual}");
                assert!(mu[0].abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        // with f' = (-1, 1) the optimum is μ = 1, residual 1
        let p = problem(
            affine(&[-1.0, 1.0], 0.0),
            vec![affine(&[1.0, 0.0], 0.0)],
            0,
            BoxSet::unbounded(2),
        );
        match foc_residual(&p, &x).unwrap() {
            FocVerdict::NotStationary { residual, mu } => {
                assert!((residual - 1.0).abs() < 1e-9, "{residual}");
                assert!((mu[0] - 1.0).abs() < 1e-6);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_jacobian_fails_rzkcq() {
        let p = problem(
            affine(&[0.0, 0.0], 0.0),
            vec![affine(&[0.0, 0.0], 0.0)],
            1,
            BoxSet::unbounded(2),
        );
        let x = p.point(vec![0.0, 0.0]).unwrap();
        assert_eq!(
            check_rzkcq(&p, &x).unwrap(),
            CqVerdict::Fails { witness: vec![1.0] }
        );
        assert!(!check_weaker_cq(&p, &x).unwrap().holds());
        let mset = multiplier_set(&p, &x).unwrap();
        assert!(!mset.bounded);
    }

    #[test]
    fn full_rank_strict_cq_holds() {
        let p = problem(
            affine(&[0.0, 0.0], 0.0),
            vec![affine(&[1.0, 2.0], 0.0)],
            1,
            BoxSet::unbounded(2),
        );
        let x = p.point(vec![0.0, 0.0]).unwrap();
        let mset = multiplier_set(&p, &x).unwrap();
        assert_eq!(mset.vertices().unwrap(), &[vec![0.0]]);
        let r = check_strict_cq(&p, &x, &mset.multipliers(&[0.0])).unwrap();
        assert!(r.holds);
        assert_eq!(r.cone, AchievedCone::Whole);
        assert!(check_strict_cq(&p, &x, &mset.multipliers(&[1.0])).is_err());
    }

    #[test]
    fn lagrangian_reduces_to_objective() {
        let p = problem(affine(&[1.0, -2.0], 0.5), vec![], 0, BoxSet::unbounded(2));
        let x = p.point(vec![1.0, 1.0]).unwrap();
        let mult = Multipliers {
            lambda: WeightedVector::zeros(Weights::ones(2)),
            mu: vec![],
        };
        assert_eq!(lagrangian_value(&p, &x, &mult), -0.5);
    }

    #[test]
    fn lower_bound_multiplier_interval() {
        // min x s.t. x in [0, 1], g(x) = -x <= 0 active: λ = -1 + μ <= 0 and μ >= 0
        let p = problem(
            affine(&[1.0], 0.0),
            vec![affine(&[-1.0], 0.0)],
            0,
            BoxSet::uniform(1, 0.0, 1.0).unwrap(),
        );
        let x = p.point(vec![0.0]).unwrap();
        let mset = multiplier_set(&p, &x).unwrap();
        assert_eq!(mset.interval(), Some((0.0, 1.0)));
        assert!(check_rzkcq(&p, &x).unwrap().holds());
        let r = check_strict_cq(&p, &x, &mset.multipliers(&[0.5])).unwrap();
        assert!(!r.holds);
    }
}

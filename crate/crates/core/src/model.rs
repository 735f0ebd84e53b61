//! Problem data: objective, constraint map, abstract set, active sets and
//! finite-difference validation of user-supplied derivatives.

use std::fmt::Debug;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    dot, max_abs, solve_lp, BilinearForm, LinearProgram, LpOutcome, WeightedVector, Weights,
};
use crate::tolerance::Tolerances;

/// One side of a box component. `Infinite` is `-inf` on a lower and `+inf` on an upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    lower: Vec<Bound>,
    upper: Vec<Bound>,
}

impl BoxSet {
    pub fn new(lower: Vec<Bound>, upper: Vec<Bound>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        let b = BoxSet { lower, upper };
        for i in 0..b.dim() {
            let (lo, hi) = (b.lo(i), b.hi(i));
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::InvalidBox {
                    index: i,
                    lower: lo,
                    upper: hi,
                });
            }
            if lo > hi {
                return Err(Error::InvalidBox {
                    index: i,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(b)
    }

    /// `[lo, hi]^n` with finite bounds.
    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![Bound::Finite(lo); n], vec![Bound::Finite(hi); n])
    }

    pub fn unbounded(n: usize) -> Self {
        BoxSet {
            lower: vec![Bound::Infinite; n],
            upper: vec![Bound::Infinite; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[Bound] {
        &self.lower
    }

    pub fn upper(&self) -> &[Bound] {
        &self.upper
    }

    pub fn lo(&self, i: usize) -> f64 {
        match self.lower[i] {
            Bound::Finite(v) => v,
            Bound::Infinite => f64::NEG_INFINITY,
        }
    }

    pub fn hi(&self, i: usize) -> f64 {
        match self.upper[i] {
            Bound::Finite(v) => v,
            Bound::Infinite => f64::INFINITY,
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        (0..self.dim()).all(|i| x[i] >= self.lo(i) - tol && x[i] <= self.hi(i) + tol)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo(i), self.hi(i));
        }
    }
}

/// Directions `d(n) = sum_k n^k coeffs[k]` for every integer `n > start`,
/// describing generators of a hull beyond its truncation, seen from the apex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayFamily {
    pub coeffs: Vec<Vec<f64>>,
    pub start: usize,
}

impl RayFamily {
    pub fn ray(&self, n: usize) -> Vec<f64> {
        let dim = self.coeffs.first().map_or(0, Vec::len);
        let mut out = vec![0.0; dim];
        let mut p = 1.0;
        for c in &self.coeffs {
            for (o, v) in out.iter_mut().zip(c) {
                *o += p * v;
            }
            p *= n as f64;
        }
        out
    }
}

/// Convex hull of finitely many points, optionally completed at one apex by
/// ray families (generators past the truncation) and limit rays (directions in
/// the closure of the radial cone only).
#[derive(Debug, Clone, PartialEq)]
pub struct HullSet {
    pub points: Vec<Vec<f64>>,
    pub apex: Vec<f64>,
    pub families: Vec<RayFamily>,
    pub limit_rays: Vec<Vec<f64>>,
}

impl HullSet {
    pub fn dim(&self) -> usize {
        self.apex.len()
    }

    /// Max-norm distance from `x` to the hull of `points`.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        let dim = self.dim();
        let k = self.points.len();
        // variables (t_1..t_k, s): min s, |sum t p - x| <= s, sum t = 1, t >= 0
        let mut obj = vec![0.0; k + 1];
        obj[k] = 1.0;
        let mut lp = LinearProgram::minimize(obj);
        let mut ones = vec![1.0; k + 1];
        ones[k] = 0.0;
        lp = lp.eq(ones, 1.0);
        for i in 0..dim {
            let mut row: Vec<f64> = self.points.iter().map(|p| p[i]).collect();
            row.push(-1.0);
            lp = lp.le(row.clone(), x[i]);
            let mut neg: Vec<f64> = self.points.iter().map(|p| -p[i]).collect();
            neg.push(-1.0);
            lp = lp.le(neg, -x[i]);
        }
        lp = lp.nonnegative(0..k);
        match solve_lp(&lp)? {
            LpOutcome::Optimal { value, .. } => Ok(value.max(0.0)),
            _ => Err(Error::Unsupported("empty hull".into())),
        }
    }

    pub fn is_apex(&self, x: &[f64], tol: f64) -> bool {
        x.iter().zip(&self.apex).all(|(a, b)| (a - b).abs() <= tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AbstractSet {
    Box(BoxSet),
    Hull(HullSet),
}

impl AbstractSet {
    pub fn dim(&self) -> usize {
        match self {
            AbstractSet::Box(b) => b.dim(),
            AbstractSet::Hull(h) => h.dim(),
        }
    }

    pub fn as_box(&self) -> Option<&BoxSet> {
        match self {
            AbstractSet::Box(b) => Some(b),
            AbstractSet::Hull(_) => None,
        }
    }
}

/// A twice differentiable function on weighted `R^n`.
///
/// Gradients are Riesz representatives: `f'(x)h = <gradient(x), h>_w`.
pub trait SmoothFunction: Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &WeightedVector) -> f64;
    fn gradient(&self, x: &WeightedVector) -> WeightedVector;
    fn hessian(&self, x: &WeightedVector) -> Arc<dyn BilinearForm>;

    fn is_affine(&self) -> bool {
        false
    }

    /// Plain coefficients of `f'(x)`, i.e. `w * gradient(x)`.
    fn derivative(&self, x: &WeightedVector) -> Vec<f64> {
        let g = self.gradient(x);
        g.entries()
            .iter()
            .zip(x.weights().as_slice())
            .map(|(v, w)| v * w)
            .collect()
    }
}

/// `f(x) = c + l.(x - x0) + 1/2 H[x - x0, x - x0]` with `l` in plain coefficients.
#[derive(Debug, Clone)]
pub struct QuadraticFunction {
    weights: Weights,
    center: Vec<f64>,
    constant: f64,
    linear: Vec<f64>,
    hessian: Arc<dyn BilinearForm>,
}

impl QuadraticFunction {
    pub fn new(
        weights: Weights,
        constant: f64,
        linear: Vec<f64>,
        hessian: Arc<dyn BilinearForm>,
    ) -> Result<Self> {
        let n = weights.len();
        for found in [linear.len(), hessian.dim()] {
            if found != n {
                return Err(Error::DimensionMismatch { expected: n, found });
            }
        }
        if !constant.is_finite() || linear.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("non-finite quadratic data".into()));
        }
        Ok(QuadraticFunction {
            weights,
            center: vec![0.0; n],
            constant,
            linear,
            hessian,
        })
    }

    /// Same data expanded around `center` instead of the origin.
    pub fn centered_at(mut self, center: Vec<f64>) -> Result<Self> {
        if center.len() != self.center.len() {
            return Err(Error::DimensionMismatch {
                expected: self.center.len(),
                found: center.len(),
            });
        }
        self.center = center;
        Ok(self)
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn hessian_form(&self) -> &Arc<dyn BilinearForm> {
        &self.hessian
    }

    fn offset(&self, x: &WeightedVector) -> Vec<f64> {
        x.entries()
            .iter()
            .zip(&self.center)
            .map(|(a, b)| a - b)
            .collect()
    }
}

impl SmoothFunction for QuadraticFunction {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn value(&self, x: &WeightedVector) -> f64 {
        let d = self.offset(x);
        self.constant + dot(&self.linear, &d) + 0.5 * self.hessian.quad(&d)
    }

    fn gradient(&self, x: &WeightedVector) -> WeightedVector {
        let d = self.offset(x);
        let hd = self.hessian.apply(&d);
        let entries = self
            .linear
            .iter()
            .zip(&hd)
            .zip(self.weights.as_slice())
            .map(|((l, h), w)| (l + h) / w)
            .collect();
        x.with_entries(entries)
    }

    fn hessian(&self, _x: &WeightedVector) -> Arc<dyn BilinearForm> {
        self.hessian.clone()
    }

    fn is_affine(&self) -> bool {
        self.hessian.is_zero()
    }
}

/// Problem (P): minimize `f(x)` over `x` in the set with `g_i(x) = 0` for `i < m1`
/// and `g_i(x) <= 0` for the remaining indices.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    objective: Arc<dyn SmoothFunction>,
    constraints: Vec<Arc<dyn SmoothFunction>>,
    m1: usize,
    set: AbstractSet,
    weights: Weights,
    tol: Tolerances,
}

impl ProblemSpec {
    pub fn new(
        objective: Arc<dyn SmoothFunction>,
        constraints: Vec<Arc<dyn SmoothFunction>>,
        m1: usize,
        set: AbstractSet,
        weights: Weights,
    ) -> Result<Self> {
        let n = weights.len();
        if m1 > constraints.len() {
            return Err(Error::InvalidProblem(format!(
                "m1 = {m1} exceeds the number of constraints {}",
                constraints.len()
            )));
        }
        for found in std::iter::once(objective.dim())
            .chain(constraints.iter().map(|g| g.dim()))
            .chain([set.dim()])
        {
            if found != n {
                return Err(Error::DimensionMismatch { expected: n, found });
            }
        }
        Ok(ProblemSpec {
            objective,
            constraints,
            m1,
            set,
            weights,
            tol: Tolerances::default(),
        })
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn objective(&self) -> &Arc<dyn SmoothFunction> {
        &self.objective
    }

    pub fn constraints(&self) -> &[Arc<dyn SmoothFunction>] {
        &self.constraints
    }

    pub fn set(&self) -> &AbstractSet {
        &self.set
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn tol(&self) -> &Tolerances {
        &self.tol
    }

    pub fn point(&self, entries: Vec<f64>) -> Result<WeightedVector> {
        WeightedVector::new(entries, self.weights.clone()).map_err(Error::from)
    }

    pub fn constraint_values(&self, x: &WeightedVector) -> Vec<f64> {
        self.constraints.iter().map(|g| g.value(x)).collect()
    }

    pub fn is_equality(&self, i: usize) -> bool {
        i < self.m1
    }

    /// Same problem with the inequality constraints permuted (`perm` indexes the inequalities).
    pub fn permute_inequalities(&self, perm: &[usize]) -> ProblemSpec {
        let mut cons: Vec<_> = self.constraints[..self.m1].to_vec();
        cons.extend(perm.iter().map(|k| self.constraints[self.m1 + k].clone()));
        ProblemSpec {
            constraints: cons,
            ..self.clone()
        }
    }

    fn check_dim(&self, x: &WeightedVector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok(())
    }
}

/// Constraint and box activity at a point. Indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveSetInfo {
    pub equality: Vec<usize>,
    /// Inequalities with `|g_i(x)| <= activity`.
    pub active: Vec<usize>,
    pub inactive: Vec<usize>,
    pub box_lower_active: Vec<usize>,
    pub box_upper_active: Vec<usize>,
    /// Components where both bounds are active.
    pub box_fixed: Vec<usize>,
    pub box_interior: Vec<usize>,
    pub constraint_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    Box {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    Equality {
        index: usize,
        value: f64,
    },
    Inequality {
        index: usize,
        value: f64,
    },
    Hull {
        distance: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible(ActiveSetInfo),
    Infeasible(Vec<Violation>),
}

impl Feasibility {
    pub fn active_set(&self) -> Option<&ActiveSetInfo> {
        match self {
            Feasibility::Feasible(info) => Some(info),
            Feasibility::Infeasible(_) => None,
        }
    }
}

pub fn check_feasible(p: &ProblemSpec, x: &WeightedVector) -> Result<Feasibility> {
    p.check_dim(x)?;
    let tol = p.tol.activity;
    let mut violations = Vec::new();
    let (mut lower, mut upper, mut fixed, mut interior) = (vec![], vec![], vec![], vec![]);
    match &p.set {
        AbstractSet::Box(b) => {
            for i in 0..p.dim() {
                let (lo, hi, v) = (b.lo(i), b.hi(i), x[i]);
                if v < lo - tol || v > hi + tol {
                    violations.push(Violation::Box {
                        index: i,
                        value: v,
                        lower: lo,
                        upper: hi,
                    });
                }
                let at_lo = (v - lo).abs() <= tol;
                let at_hi = (hi - v).abs() <= tol;
                match (at_lo, at_hi) {
                    (true, true) => fixed.push(i),
                    (true, false) => lower.push(i),
                    (false, true) => upper.push(i),
                    (false, false) => interior.push(i),
                }
            }
        }
        AbstractSet::Hull(h) => {
            let distance = h.distance(x.entries())?;
            if distance > tol {
                violations.push(Violation::Hull { distance });
            }
            interior = (0..p.dim()).collect();
        }
    }
    let values = p.constraint_values(x);
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue {
            what: format!("constraint value {v}"),
        });
    }
    let (mut active, mut inactive) = (vec![], vec![]);
    for (i, v) in values.iter().enumerate() {
        if p.is_equality(i) {
            if v.abs() > tol {
                violations.push(Violation::Equality {
                    index: i,
                    value: *v,
                });
            }
        } else {
            if *v > tol {
                violations.push(Violation::Inequality {
                    index: i,
                    value: *v,
                });
            }
            if v.abs() <= tol {
                active.push(i);
            } else {
                inactive.push(i);
            }
        }
    }
    if !violations.is_empty() {
        return Ok(Feasibility::Infeasible(violations));
    }
    Ok(Feasibility::Feasible(ActiveSetInfo {
        equality: (0..p.m1).collect(),
        active,
        inactive,
        box_lower_active: lower,
        box_upper_active: upper,
        box_fixed: fixed,
        box_interior: interior,
        constraint_values: values,
    }))
}

/// Active set of a point that must be feasible.
pub fn active_set(p: &ProblemSpec, x: &WeightedVector) -> Result<ActiveSetInfo> {
    match check_feasible(p, x)? {
        Feasibility::Feasible(info) => Ok(info),
        Feasibility::Infeasible(_) => Err(Error::Infeasible),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeCheck {
    pub function: String,
    pub gradient_error: f64,
    pub hessian_error: f64,
    pub gradient_ok: bool,
    pub hessian_ok: bool,
}

impl DerivativeCheck {
    pub fn passed(&self) -> bool {
        self.gradient_ok && self.hessian_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeReport {
    pub gradient_step: f64,
    pub hessian_step: f64,
    pub checks: Vec<DerivativeCheck>,
}

impl DerivativeReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(DerivativeCheck::passed)
    }
}

const FD_ABS_TOL: f64 = 1e-6;
const FD_REL_TOL: f64 = 1e-4;
const FD_RANDOM_PROBES: usize = 8;

/// Compares supplied gradients and Hessians with central differences along
/// every coordinate and a few seeded random directions.
pub fn validate_derivatives(p: &ProblemSpec, x: &WeightedVector) -> Result<DerivativeReport> {
    p.check_dim(x)?;
    let scale = 1.0 + x.norm();
    let gstep = 1e-5 * scale;
    let hstep = 1e-3 * scale;
    let n = p.dim();
    let mut dirs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..FD_RANDOM_PROBES {
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = max_abs(&d).max(f64::MIN_POSITIVE);
        dirs.push(d.into_iter().map(|v| v / s).collect());
    }

    let mut checks = Vec::with_capacity(1 + p.m());
    let funcs = std::iter::once(("f".to_string(), &p.objective)).chain(
        p.constraints
            .iter()
            .enumerate()
            .map(|(i, g)| (format!("g{}", i + 1), g)),
    );
    for (name, func) in funcs {
        let f0 = func.value(x);
        if !f0.is_finite() {
            return Err(Error::NonFiniteValue { what: name });
        }
        let deriv = func.derivative(x);
        let hess = func.hessian(x);
        let (mut gerr, mut herr) = (0.0_f64, 0.0_f64);
        let (mut gok, mut hok) = (true, true);
        for d in &dirs {
            let at = |t: f64| -> Result<f64> {
                let y = x.with_entries(x.entries().iter().zip(d).map(|(a, b)| a + t * b).collect());
                let v = func.value(&y);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFiniteValue { what: name.clone() })
                }
            };
            let fd_grad = (at(gstep)? - at(-gstep)?) / (2.0 * gstep);
            let given = dot(&deriv, d);
            let e = (given - fd_grad).abs();
            gerr = gerr.max(e);
            gok &= e <= FD_ABS_TOL.max(FD_REL_TOL * fd_grad.abs());

            let fd_hess = (at(hstep)? - 2.0 * f0 + at(-hstep)?) / (hstep * hstep);
            let given = hess.quad(d);
            let e = (given - fd_hess).abs();
            herr = herr.max(e);
            hok &= e <= FD_ABS_TOL.max(FD_REL_TOL * fd_hess.abs());
        }
        checks.push(DerivativeCheck {
            function: name,
            gradient_error: gerr,
            hessian_error: herr,
            gradient_ok: gok,
            hessian_ok: hok,
        });
    }
    Ok(DerivativeReport {
        gradient_step: gstep,
        hessian_step: hstep,
        checks,
    })
}

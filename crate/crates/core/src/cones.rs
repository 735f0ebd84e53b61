//! Cones at a feasible point: sign patterns for boxes, generated cones for
//! hulls, polars, critical cones and density evidence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    dot, max_abs, solve_lp, LinearProgram, LpOutcome, PolytopeH, Row, WeightedVector, Weights,
};
use crate::model::{
    active_set, AbstractSet, ActiveSetInfo, BoxSet, HullSet, ProblemSpec, RayFamily,
};

/// Terms of each ray family used when a finite generator list is needed.
pub const FAMILY_TERMS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    NonNeg,
    NonPos,
    Zero,
    Free,
}

impl Sign {
    pub fn polar(self) -> Sign {
        match self {
            Sign::NonNeg => Sign::NonPos,
            Sign::NonPos => Sign::NonNeg,
            Sign::Zero => Sign::Free,
            Sign::Free => Sign::Zero,
        }
    }

    pub fn admits(self, v: f64, tol: f64) -> bool {
        match self {
            Sign::NonNeg => v >= -tol,
            Sign::NonPos => v <= tol,
            Sign::Zero => v.abs() <= tol,
            Sign::Free => true,
        }
    }

    /// Nearest admissible value; the same in every diagonal metric.
    pub fn project(self, v: f64) -> f64 {
        match self {
            Sign::NonNeg => v.max(0.0),
            Sign::NonPos => v.min(0.0),
            Sign::Zero => 0.0,
            Sign::Free => v,
        }
    }
}

/// Product cone with one sign constraint per coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignPatternCone {
    signs: Vec<Sign>,
}

impl SignPatternCone {
    pub fn new(signs: Vec<Sign>) -> Self {
        SignPatternCone { signs }
    }

    pub fn free(n: usize) -> Self {
        SignPatternCone {
            signs: vec![Sign::Free; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.signs.len()
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    pub fn polar(&self) -> Self {
        SignPatternCone {
            signs: self.signs.iter().map(|s| s.polar()).collect(),
        }
    }

    /// Membership with tolerance relative to the largest entry of `h`.
    pub fn contains(&self, h: &[f64], tol: f64) -> bool {
        let t = tol * max_abs(h).max(f64::MIN_POSITIVE);
        self.signs.iter().zip(h).all(|(s, v)| s.admits(*v, t))
    }

    pub fn project(&self, h: &mut [f64]) {
        for (v, s) in h.iter_mut().zip(&self.signs) {
            *v = s.project(*v);
        }
    }

    /// `P ∩ ν⊥` for `ν` in the polar of `P`: every coordinate where `ν` is nonzero is pinned to zero.
    pub fn intersect_annihilator(&self, nu: &[f64], tol: f64) -> Self {
        let t = tol * max_abs(nu);
        SignPatternCone {
            signs: self
                .signs
                .iter()
                .zip(nu)
                .map(|(s, v)| if v.abs() > t { Sign::Zero } else { *s })
                .collect(),
        }
    }

    pub fn count(&self, sign: Sign) -> usize {
        self.signs.iter().filter(|s| **s == sign).count()
    }
}

/// Conic hull of finitely many rays plus polynomial ray families and limit rays.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedCone {
    pub dim: usize,
    pub rays: Vec<Vec<f64>>,
    pub families: Vec<RayFamily>,
    pub limit_rays: Vec<Vec<f64>>,
}

impl GeneratedCone {
    /// Finite generator list: rays, the first [`FAMILY_TERMS`] members of each family, limit rays.
    pub fn generators(&self) -> Vec<Vec<f64>> {
        let mut out = self.rays.clone();
        for fam in &self.families {
            for n in fam.start + 1..=fam.start + FAMILY_TERMS {
                out.push(normalize(fam.ray(n)));
            }
        }
        out.extend(self.limit_rays.iter().cloned());
        out
    }

    pub fn contains(&self, h: &[f64], tol: f64) -> Result<bool> {
        let scale = max_abs(h);
        if scale == 0.0 {
            return Ok(true);
        }
        let hn: Vec<f64> = h.iter().map(|v| v / scale).collect();
        Ok(cone_distance(&self.generators(), &hn, &[])? <= tol)
    }

    /// `D ∩ ν⊥` for `ν` nonpositive on `D`: keeps the generators annihilated by `ν`.
    pub fn intersect_annihilator(&self, nu: &[f64], tol: f64) -> Self {
        let perp =
            |r: &[f64]| dot(nu, r).abs() <= tol * max_abs(nu).max(f64::MIN_POSITIVE) * max_abs(r);
        GeneratedCone {
            dim: self.dim,
            rays: self.rays.iter().filter(|r| perp(r)).cloned().collect(),
            families: self
                .families
                .iter()
                .filter(|f| f.coeffs.iter().all(|c| perp(c)))
                .cloned()
                .collect(),
            limit_rays: self
                .limit_rays
                .iter()
                .filter(|r| perp(r))
                .cloned()
                .collect(),
        }
    }
}

/// Radial or tangent cone of the abstract set at a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SetCone {
    Pattern(SignPatternCone),
    Generated(GeneratedCone),
}

impl SetCone {
    pub fn dim(&self) -> usize {
        match self {
            SetCone::Pattern(p) => p.dim(),
            SetCone::Generated(g) => g.dim,
        }
    }

    pub fn contains(&self, h: &[f64], tol: f64) -> Result<bool> {
        match self {
            SetCone::Pattern(p) => Ok(p.contains(h, tol)),
            SetCone::Generated(g) => g.contains(h, tol),
        }
    }

    pub fn intersect_annihilator(&self, nu: &[f64], tol: f64) -> Self {
        match self {
            SetCone::Pattern(p) => SetCone::Pattern(p.intersect_annihilator(nu, tol)),
            SetCone::Generated(g) => SetCone::Generated(g.intersect_annihilator(nu, tol)),
        }
    }

    pub fn as_pattern(&self) -> Option<&SignPatternCone> {
        match self {
            SetCone::Pattern(p) => Some(p),
            SetCone::Generated(_) => None,
        }
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let s = max_abs(&v);
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    v
}

pub fn tangent_cone_box(b: &BoxSet, x: &[f64], tol: f64) -> Result<SignPatternCone> {
    if !b.contains(x, tol) {
        let index = (0..b.dim())
            .find(|i| x[*i] < b.lo(*i) - tol || x[*i] > b.hi(*i) + tol)
            .unwrap_or(0);
        return Err(Error::OutsideSet { index });
    }
    let signs = (0..b.dim())
        .map(|i| {
            let at_lo = (x[i] - b.lo(i)).abs() <= tol;
            let at_hi = (b.hi(i) - x[i]).abs() <= tol;
            match (at_lo, at_hi) {
                (true, true) => Sign::Zero,
                (true, false) => Sign::NonNeg,
                (false, true) => Sign::NonPos,
                (false, false) => Sign::Free,
            }
        })
        .collect();
    Ok(SignPatternCone::new(signs))
}

pub fn normal_cone_box(b: &BoxSet, x: &[f64], tol: f64) -> Result<SignPatternCone> {
    Ok(tangent_cone_box(b, x, tol)?.polar())
}

fn hull_cone(h: &HullSet, x: &[f64], tol: f64, with_limits: bool) -> Result<GeneratedCone> {
    if h.distance(x)? > tol {
        return Err(Error::OutsideSet { index: 0 });
    }
    let rays: Vec<Vec<f64>> = h
        .points
        .iter()
        .map(|p| normalize(p.iter().zip(x).map(|(a, b)| a - b).collect()))
        .filter(|r| max_abs(r) > 0.0)
        .collect();
    let at_apex = h.is_apex(x, tol);
    Ok(GeneratedCone {
        dim: h.dim(),
        rays,
        families: if at_apex { h.families.clone() } else { vec![] },
        limit_rays: if at_apex && with_limits {
            h.limit_rays.clone()
        } else {
            vec![]
        },
    })
}

/// Tangent cone `T_C(x)`.
pub fn tangent_cone(set: &AbstractSet, x: &[f64], tol: f64) -> Result<SetCone> {
    match set {
        AbstractSet::Box(b) => Ok(SetCone::Pattern(tangent_cone_box(b, x, tol)?)),
        AbstractSet::Hull(h) => Ok(SetCone::Generated(hull_cone(h, x, tol, true)?)),
    }
}

/// Radial cone `R_C(x)`; for a box it coincides with the tangent cone.
pub fn radial_cone(set: &AbstractSet, x: &[f64], tol: f64) -> Result<SetCone> {
    match set {
        AbstractSet::Box(b) => Ok(SetCone::Pattern(tangent_cone_box(b, x, tol)?)),
        AbstractSet::Hull(h) => Ok(SetCone::Generated(hull_cone(h, x, tol, false)?)),
    }
}

/// `T_K(g(x))` for `K = {0}^{m1} x (-inf, 0]^{m - m1}`.
pub fn tangent_cone_k(p: &ProblemSpec, info: &ActiveSetInfo) -> SignPatternCone {
    let mut signs = vec![Sign::Free; p.m()];
    for i in &info.equality {
        signs[*i] = Sign::Zero;
    }
    for i in &info.active {
        signs[*i] = Sign::NonPos;
    }
    SignPatternCone::new(signs)
}

pub fn normal_cone_k(p: &ProblemSpec, info: &ActiveSetInfo) -> SignPatternCone {
    tangent_cone_k(p, info).polar()
}

/// Rows in `y` expressing `ν(y) = c0 + sum_i y_i cols[i]` ∈ `D°`.
///
/// For a generated cone each family contributes its leading nonvanishing
/// coefficient as one extra row, the asymptotic part of `ν.d(n) <= 0` for all
/// large `n`.
pub fn polar_rows(cone: &SetCone, c0: &[f64], cols: &[Vec<f64>]) -> (Vec<Row>, Vec<Row>) {
    let m = cols.len();
    let row_for =
        |v: &[f64]| -> (Vec<f64>, f64) { (cols.iter().map(|c| dot(c, v)).collect(), -dot(c0, v)) };
    let (mut eqs, mut ineqs) = (Vec::new(), Vec::new());
    match cone {
        SetCone::Pattern(p) => {
            for (j, s) in p.signs().iter().enumerate() {
                let coeffs: Vec<f64> = cols.iter().map(|c| c[j]).collect();
                let rhs = -c0[j];
                match s {
                    Sign::NonNeg => ineqs.push(Row::new(coeffs, rhs)),
                    Sign::NonPos => ineqs.push(Row::new(coeffs.iter().map(|v| -v).collect(), -rhs)),
                    Sign::Free => eqs.push(Row::new(coeffs, rhs)),
                    Sign::Zero => {}
                }
            }
        }
        SetCone::Generated(g) => {
            for r in g.rays.iter().chain(&g.limit_rays) {
                let (c, b) = row_for(r);
                ineqs.push(Row::new(c, b));
            }
            for fam in &g.families {
                for n in fam.start + 1..=fam.start + 2 {
                    let (c, b) = row_for(&normalize(fam.ray(n)));
                    ineqs.push(Row::new(c, b));
                }
                let lead = fam.coeffs.iter().rev().map(|v| row_for(v)).find(|(c, b)| {
                    let scale = max_abs(c).max(b.abs());
                    scale > 1e-14
                });
                if let Some((c, b)) = lead {
                    ineqs.push(Row::new(c, b));
                }
            }
        }
    }
    debug_assert!(eqs.iter().chain(&ineqs).all(|r: &Row| r.coeffs.len() == m));
    (eqs, ineqs)
}

/// The polar of `J[A] - B` as a polyhedral cone in `ν`, where `J` has the given
/// plain-coefficient rows: `J^T ν ∈ A°` and `-ν ∈ B°`.
pub fn image_difference_polar(
    a: &SetCone,
    jac_rows: &[Vec<f64>],
    b: &SignPatternCone,
) -> PolytopeH {
    let m = jac_rows.len();
    let n = a.dim();
    let (mut eqs, mut ineqs) = polar_rows(a, &vec![0.0; n], jac_rows);
    let neg_id: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut e = vec![0.0; m];
            e[i] = -1.0;
            e
        })
        .collect();
    let (e2, i2) = polar_rows(&SetCone::Pattern(b.clone()), &vec![0.0; m], &neg_id);
    eqs.extend(e2);
    ineqs.extend(i2);
    PolytopeH {
        dim: m,
        eq_rows: eqs,
        ineq_rows: ineqs,
    }
}

/// How `f'(x̄)h` enters the critical cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectiveCut {
    /// `f'(x̄)h <= η‖h‖`.
    Inequality,
    /// `f'(x̄)h = 0` (only meaningful with `η = 0`).
    Equality,
}

/// `K_η(x̄) = {h ∈ T_C(x̄) : g'(x̄)h ∈ T_K(g(x̄)), f'(x̄)h <= η‖h‖}`, rows in plain coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalCone {
    pub base: SetCone,
    pub eq_rows: Vec<Vec<f64>>,
    pub ineq_rows: Vec<Vec<f64>>,
    pub objective: Vec<f64>,
    pub cut: ObjectiveCut,
    pub eta: f64,
    #[serde(skip)]
    pub weights: Weights,
}

impl CriticalCone {
    /// Dual norm of a plain-coefficient functional.
    pub fn dual_norm(&self, row: &[f64]) -> f64 {
        row.iter()
            .zip(self.weights.as_slice())
            .map(|(r, w)| r * r / w)
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, h: &WeightedVector, tol: f64) -> Result<bool> {
        let hn = h.norm();
        if hn == 0.0 {
            return Ok(true);
        }
        if !self.base.contains(h.entries(), tol)? {
            return Ok(false);
        }
        let slack = |row: &[f64]| tol * self.dual_norm(row).max(1e-300) * hn;
        let e = h.entries();
        let rows_ok = self.eq_rows.iter().all(|r| dot(r, e).abs() <= slack(r))
            && self.ineq_rows.iter().all(|r| dot(r, e) <= slack(r));
        let fh = dot(&self.objective, e);
        let cut_ok = match self.cut {
            ObjectiveCut::Inequality => fh <= self.eta * hn + slack(&self.objective),
            ObjectiveCut::Equality => fh.abs() <= self.eta * hn + slack(&self.objective),
        };
        Ok(rows_ok && cut_ok)
    }

    /// The polyhedral part: `η = 0`, objective row kept with its cut.
    pub fn homogeneous(&self) -> CriticalCone {
        CriticalCone {
            eta: 0.0,
            ..self.clone()
        }
    }

    /// Linear rows of `K_0` as `(equalities, inequalities)` over `h`.
    pub fn linear_rows(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut eqs = self.eq_rows.clone();
        let mut ineqs = self.ineq_rows.clone();
        match self.cut {
            ObjectiveCut::Inequality => ineqs.push(self.objective.clone()),
            ObjectiveCut::Equality => eqs.push(self.objective.clone()),
        }
        (eqs, ineqs)
    }
}

pub fn critical_cone(
    p: &ProblemSpec,
    x: &WeightedVector,
    eta: f64,
    cut: ObjectiveCut,
) -> Result<CriticalCone> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidProblem(format!(
            "eta must be nonnegative, got {eta}"
        )));
    }
    let info = active_set(p, x)?;
    let base = tangent_cone(p.set(), x.entries(), p.tol().activity)?;
    let rows = |idx: &[usize]| -> Vec<Vec<f64>> {
        idx.iter()
            .map(|i| p.constraints()[*i].derivative(x))
            .collect()
    };
    Ok(CriticalCone {
        base,
        eq_rows: rows(&info.equality),
        ineq_rows: rows(&info.active),
        objective: p.objective().derivative(x),
        cut,
        eta,
        weights: p.weights().clone(),
    })
}

/// Min over `t >= 0` of `‖sum t_j r_j - h‖_∞` subject to `row.(sum t_j r_j) = 0` for each row.
pub fn cone_distance(rays: &[Vec<f64>], h: &[f64], annihilated: &[Vec<f64>]) -> Result<f64> {
    let k = rays.len();
    let dim = h.len();
    let mut obj = vec![0.0; k + 1];
    obj[k] = 1.0;
    let mut lp = LinearProgram::minimize(obj);
    for i in 0..dim {
        let mut row: Vec<f64> = rays.iter().map(|r| r[i]).collect();
        row.push(-1.0);
        lp = lp.le(row, h[i]);
        let mut neg: Vec<f64> = rays.iter().map(|r| -r[i]).collect();
        neg.push(-1.0);
        lp = lp.le(neg, -h[i]);
    }
    for a in annihilated {
        let mut row: Vec<f64> = rays.iter().map(|r| dot(a, r)).collect();
        row.push(0.0);
        lp = lp.eq(row, 0.0);
    }
    lp = lp.nonnegative(0..k);
    match solve_lp(&lp)? {
        LpOutcome::Optimal { value, .. } => Ok(value.max(0.0)),
        _ => Err(Error::Unsupported("distance program did not solve".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DensityVerdict {
    /// Box sets, or distances that shrink below the threshold.
    Dense { distances: Vec<f64> },
    /// Distance from `h` to the radial section stayed above the threshold at every truncation.
    GapWitness { h: Vec<f64>, distances: Vec<f64> },
}

/// Evidence on whether `h` is approximable by radial directions annihilated by `rows`.
///
/// `sets` lists successive truncations of one hull (or a single box); the
/// distance from `h` (scaled to max-norm one) to `R_C(x) ∩ rows⊥` is measured
/// in each. A box is polyhedral, hence always dense.
pub fn radial_density_gap(
    sets: &[AbstractSet],
    x: &[f64],
    rows: &[Vec<f64>],
    h: &[f64],
    threshold: f64,
) -> Result<DensityVerdict> {
    let scale = max_abs(h);
    if scale == 0.0 {
        return Ok(DensityVerdict::Dense { distances: vec![] });
    }
    let hn: Vec<f64> = h.iter().map(|v| v / scale).collect();
    let mut distances = Vec::with_capacity(sets.len());
    for set in sets {
        match set {
            AbstractSet::Box(_) => return Ok(DensityVerdict::Dense { distances: vec![] }),
            AbstractSet::Hull(hull) => {
                let cone = hull_cone(hull, x, 1e-12, false)?;
                distances.push(cone_distance(&cone.rays, &hn, rows)?);
            }
        }
    }
    if !distances.is_empty() && distances.iter().all(|d| *d >= threshold) {
        Ok(DensityVerdict::GapWitness {
            h: h.to_vec(),
            distances,
        })
    } else {
        Ok(DensityVerdict::Dense { distances })
    }
}

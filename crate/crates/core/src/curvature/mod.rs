//! Second-order certification: the maximized Lagrangian Hessian `q`, the
//! necessary and sufficient conditions over (extended) critical cones, and a
//! direct quadratic-growth sampler.
//!
//! Minimizing `q` over a cone section of the unit sphere is nonconvex. The
//! checks here are falsifiers: structured directions, seeded random samples
//! and projected subgradient descent. A "holds" verdict reports the sampled
//! minimum, never a proof.

mod growth;
mod section;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use growth::{sample_growth, GrowthVerdict};

use crate::cones::{critical_cone, CriticalCone, ObjectiveCut};
use crate::error::{Error, Result};
use crate::kkt::{multiplier_defect, multiplier_set, MultiplierSet};
use crate::linalg::{
    dot, solve_lp, BilinearForm, LinearProgram, LpOutcome, PolytopeH, WeightedVector,
};
use crate::model::ProblemSpec;
use section::Section;

/// `f''(x̄)` and `g_i''(x̄)` together with the vertices of `Λ(x̄)`.
#[derive(Debug, Clone)]
pub struct CurvatureOracle {
    f_hess: Arc<dyn BilinearForm>,
    g_hess: Vec<Arc<dyn BilinearForm>>,
    vertices: Vec<Vec<f64>>,
    polytope: Option<PolytopeH>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QValue {
    pub value: f64,
    /// A maximizing multiplier.
    pub mu: Vec<f64>,
}

impl CurvatureOracle {
    pub fn new(p: &ProblemSpec, x: &WeightedVector, mset: &MultiplierSet) -> Result<Self> {
        let vertices = mset.vertices()?.to_vec();
        if vertices.is_empty() {
            return Err(Error::EmptyMultiplierSet);
        }
        Ok(CurvatureOracle {
            f_hess: p.objective().hessian(x),
            g_hess: p.constraints().iter().map(|g| g.hessian(x)).collect(),
            vertices,
            polytope: Some(mset.polytope.clone()),
        })
    }

    /// Single-multiplier form `L''(x̄, λ(μ), μ)`.
    pub fn fixed(p: &ProblemSpec, x: &WeightedVector, mu: &[f64]) -> Self {
        CurvatureOracle {
            f_hess: p.objective().hessian(x),
            g_hess: p.constraints().iter().map(|g| g.hessian(x)).collect(),
            vertices: vec![mu.to_vec()],
            polytope: None,
        }
    }

    pub fn from_parts(
        f_hess: Arc<dyn BilinearForm>,
        g_hess: Vec<Arc<dyn BilinearForm>>,
        vertices: Vec<Vec<f64>>,
        polytope: Option<PolytopeH>,
    ) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::EmptyMultiplierSet);
        }
        if let Some(v) = vertices.iter().find(|v| v.len() != g_hess.len()) {
            return Err(Error::DimensionMismatch {
                expected: g_hess.len(),
                found: v.len(),
            });
        }
        Ok(CurvatureOracle {
            f_hess,
            g_hess,
            vertices,
            polytope,
        })
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    /// `L''(x̄, λ, μ)h²`; the `λ` term is linear and drops out.
    pub fn lagrangian_quad(&self, mu: &[f64], h: &[f64]) -> f64 {
        self.f_hess.quad(h)
            + self
                .g_hess
                .iter()
                .zip(mu)
                .map(|(g, m)| m * g.quad(h))
                .sum::<f64>()
    }

    /// `q(h) = f''h² + max over vertices of Σ μ_i g_i''h²`.
    pub fn q(&self, h: &[f64]) -> QValue {
        let gq: Vec<f64> = self.g_hess.iter().map(|g| g.quad(h)).collect();
        let (best, _) = self
            .vertices
            .iter()
            .enumerate()
            .map(|(k, v)| (k, dot(v, &gq)))
            .fold((0, f64::NEG_INFINITY), |acc, cur| {
                if cur.1 > acc.1 {
                    cur
                } else {
                    acc
                }
            });
        let value = self.f_hess.quad(h) + dot(&self.vertices[best], &gq);
        QValue {
            value,
            mu: self.vertices[best].clone(),
        }
    }

    /// `q(h)` via an LP over the multiplier polytope instead of its vertices.
    pub fn q_lp(&self, h: &[f64]) -> Result<QValue> {
        let Some(poly) = &self.polytope else {
            return Ok(self.q(h));
        };
        let gq: Vec<f64> = self.g_hess.iter().map(|g| g.quad(h)).collect();
        let lp = LinearProgram::maximize(gq).with_rows(&poly.eq_rows, &poly.ineq_rows);
        match solve_lp(&lp)? {
            LpOutcome::Optimal { value, point } => Ok(QValue {
                value: self.f_hess.quad(h) + value,
                mu: point,
            }),
            LpOutcome::Unbounded { .. } => Err(Error::UnboundedMultiplierSet),
            LpOutcome::Infeasible => Err(Error::EmptyMultiplierSet),
        }
    }

    /// Plain coefficients of `2 L''(μ) h`, the derivative of `h ↦ L''(μ)h²`.
    fn derivative(&self, mu: &[f64], h: &[f64]) -> Vec<f64> {
        let mut d = self.f_hess.apply(h);
        for (g, m) in self.g_hess.iter().zip(mu) {
            if *m != 0.0 {
                for (a, b) in d.iter_mut().zip(g.apply(h)) {
                    *a += m * b;
                }
            }
        }
        d.iter_mut().for_each(|v| *v *= 2.0);
        d
    }
}

pub fn q_of_h(oracle: &CurvatureOracle, h: &WeightedVector) -> QValue {
    oracle.q(h.entries())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchBudget {
    pub structured: usize,
    pub random: usize,
    pub descent_steps: usize,
    pub descent_starts: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            structured: 64,
            random: 512,
            descent_steps: 200,
            descent_starts: 4,
        }
    }
}

pub const DEFAULT_SEED: u64 = 0x6b6b_7432;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Search {
    pub budget: SearchBudget,
    pub seed: u64,
}

impl Default for Search {
    fn default() -> Self {
        Search {
            budget: SearchBudget::default(),
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictKind {
    SncHolds,
    SncViolated,
    SscHolds,
    SscViolated,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub structured: usize,
    pub random: usize,
    pub descent_steps: usize,
    /// Unit directions accepted in the cone and evaluated.
    pub evaluated: usize,
    pub seed: u64,
}

/// Consistency between strict positivity on `K(x̄)` and coercivity on `K_η(x̄)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityCheck {
    /// `None` when the cone sample is empty.
    pub min_on_critical_cone: Option<f64>,
    pub positive: bool,
    /// `(η, sampled min)` for the probed cut levels.
    pub coercivity: Vec<(f64, Option<f64>)>,
    pub coercive: bool,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderVerdict {
    pub kind: VerdictKind,
    pub eta: f64,
    /// Multiplier held fixed instead of maximizing over `Λ(x̄)`.
    pub fixed_mu: Option<Vec<f64>>,
    /// Sampled minimum of `q(h)` over unit `h` in the cone; `None` when no
    /// nonzero direction was found (the cone is `{0}` or the search failed).
    pub min_value: Option<f64>,
    /// Unit minimizer of the sample, the violation witness when violated.
    pub witness: Option<Vec<f64>>,
    pub witness_mu: Option<Vec<f64>>,
    pub alpha_est: Option<f64>,
    pub alpha_target: Option<f64>,
    pub positivity: Option<PositivityCheck>,
    pub stats: SearchStats,
}

impl SecondOrderVerdict {
    pub fn violated(&self) -> bool {
        matches!(
            self.kind,
            VerdictKind::SncViolated | VerdictKind::SscViolated
        )
    }
}

/// Result of a cone search: minimizer and statistics.
#[derive(Debug, Clone)]
struct Minimum {
    value: f64,
    h: Option<Vec<f64>>,
    mu: Option<Vec<f64>>,
    stats: SearchStats,
    /// Every evaluated `(direction, ratio)`, kept for callers that report structured values.
    structured_values: Vec<(Vec<f64>, f64)>,
}

struct Searcher<'a> {
    oracle: &'a CurvatureOracle,
    cone: &'a CriticalCone,
    tol: f64,
    best: Minimum,
    starts: Vec<(f64, Vec<f64>)>,
}

impl<'a> Searcher<'a> {
    fn new(oracle: &'a CurvatureOracle, cone: &'a CriticalCone, tol: f64, seed: u64) -> Self {
        Searcher {
            oracle,
            cone,
            tol,
            best: Minimum {
                value: f64::INFINITY,
                h: None,
                mu: None,
                stats: SearchStats {
                    seed,
                    ..SearchStats::default()
                },
                structured_values: Vec::new(),
            },
            starts: Vec::new(),
        }
    }

    fn unit(&self, h: &[f64]) -> Option<Vec<f64>> {
        let n = self.cone.weights.norm(h);
        (n > 0.0 && n.is_finite()).then(|| h.iter().map(|v| v / n).collect())
    }

    /// Normalizes, verifies membership and evaluates; returns the ratio if accepted.
    fn offer(&mut self, h: &[f64]) -> Result<Option<f64>> {
        let Some(u) = self.unit(h) else {
            return Ok(None);
        };
        let wv = WeightedVector::new(u.clone(), self.cone.weights.clone())?;
        if !self.cone.contains(&wv, self.tol)? {
            return Ok(None);
        }
        let q = self.oracle.q(&u);
        self.best.stats.evaluated += 1;
        if q.value < self.best.value {
            self.best.value = q.value;
            self.best.h = Some(u.clone());
            self.best.mu = Some(q.mu);
        }
        self.starts.push((q.value, u));
        Ok(Some(q.value))
    }

    fn run(mut self, search: &Search) -> Result<Minimum> {
        let b = search.budget;
        let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
        let eta = self.cone.eta;
        let with_cut = Section::new(self.cone, true);
        let relaxed = (eta > 0.0).then(|| Section::new(self.cone, false));

        // structured directions
        let structured = match &with_cut {
            Section::Pattern(s) => s.structured(b.structured),
            Section::Generated(g) => g.structured(b.structured)?,
        };
        let mut extra = match (&relaxed, &with_cut) {
            (Some(Section::Pattern(s)), _) => s.structured(b.structured),
            (Some(Section::Generated(g)), _) => g.structured(b.structured)?,
            _ => Vec::new(),
        };
        let mut accepted = Vec::new();
        for h in structured.iter().chain(extra.iter()) {
            if self.best.stats.structured >= b.structured {
                break;
            }
            if let Some(v) = self.offer(h)? {
                self.best.stats.structured += 1;
                self.best.structured_values.push((h.clone(), v));
                accepted.push(h.clone());
            }
        }
        extra.clear();

        // seeded random directions, alternating between K_0 and K+ when η > 0;
        // structured slots the cone could not fill go to the random phase
        let target = b.random + b.structured.saturating_sub(self.best.stats.structured);
        let max_attempts = 40 * target.max(1);
        let mut attempts = 0;
        while self.best.stats.random < target && attempts < max_attempts {
            attempts += 1;
            let source = match &relaxed {
                Some(r) if attempts % 2 == 0 => r,
                _ => &with_cut,
            };
            let h = match source {
                Section::Pattern(s) => s.random(&mut rng),
                Section::Generated(g) => g.random(&mut rng, &accepted)?,
            };
            if let Some(h) = h {
                if self.offer(&h)?.is_some() {
                    self.best.stats.random += 1;
                }
            }
        }

        // projected subgradient descent from the best starts
        if let Section::Pattern(sec) = &with_cut {
            let mut starts = std::mem::take(&mut self.starts);
            starts.sort_by(|a, b| a.0.total_cmp(&b.0));
            starts.truncate(b.descent_starts);
            let w = self.cone.weights.clone();
            for (_, h0) in starts {
                let mut h = h0;
                let mut q = self.oracle.q(&h);
                let mut step = 0.5;
                for _ in 0..b.descent_steps {
                    self.best.stats.descent_steps += 1;
                    let d = self.oracle.derivative(&q.mu, &h);
                    // Riesz gradient of h ↦ q(h)/‖h‖² at a unit h
                    let g: Vec<f64> = d
                        .iter()
                        .zip(w.as_slice())
                        .zip(&h)
                        .map(|((dv, wv), hv)| dv / wv - 2.0 * q.value * hv)
                        .collect();
                    let y: Vec<f64> = h.iter().zip(&g).map(|(a, b)| a - step * b).collect();
                    let proj = if eta > 0.0 {
                        match &relaxed {
                            Some(Section::Pattern(r)) => {
                                r.with_cut(&self.cone.objective, eta).project(&y)
                            }
                            _ => None,
                        }
                    } else {
                        sec.project(&y)
                    };
                    let accepted = match proj.and_then(|p| self.unit(&p)) {
                        Some(u) => {
                            let wv = WeightedVector::new(u.clone(), w.clone())?;
                            if self.cone.contains(&wv, self.tol)? {
                                let qn = self.oracle.q(&u);
                                (qn.value < q.value).then_some((u, qn))
                            } else {
                                None
                            }
                        }
                        None => None,
                    };
                    match accepted {
                        Some((u, qn)) => {
                            h = u;
                            q = qn;
                            step *= 1.5;
                        }
                        None => {
                            step *= 0.5;
                            if step < 1e-12 {
                                break;
                            }
                        }
                    }
                }
                self.offer(&h)?;
            }
        }
        Ok(self.best)
    }
}

fn search_cone(
    oracle: &CurvatureOracle,
    cone: &CriticalCone,
    tol: f64,
    search: &Search,
) -> Result<Minimum> {
    Searcher::new(oracle, cone, tol, search.seed).run(search)
}

/// Second-order necessary condition: `q(h) >= 0` on `K(x̄)`.
pub fn check_snc(
    p: &ProblemSpec,
    x: &WeightedVector,
    mset: &MultiplierSet,
    search: &Search,
) -> Result<SecondOrderVerdict> {
    let oracle = CurvatureOracle::new(p, x, mset)?;
    let cone = critical_cone(p, x, 0.0, ObjectiveCut::Inequality)?;
    let min = search_cone(&oracle, &cone, p.tol().feasibility, search)?;
    Ok(snc_verdict(p, min, None))
}

fn snc_verdict(p: &ProblemSpec, min: Minimum, fixed_mu: Option<Vec<f64>>) -> SecondOrderVerdict {
    let violated = min.value < -p.tol().violation;
    SecondOrderVerdict {
        kind: if violated {
            VerdictKind::SncViolated
        } else {
            VerdictKind::SncHolds
        },
        eta: 0.0,
        fixed_mu,
        min_value: finite(min.value),
        witness: min.h,
        witness_mu: min.mu,
        alpha_est: None,
        alpha_target: None,
        positivity: None,
        stats: min.stats,
    }
}

/// Same search with the single form `L''(x̄, λ(μ), μ)`; `μ` must lie in `Λ(x̄)`.
///
/// Also returns the values of the accepted structured directions.
pub fn check_snc_fixed_multiplier(
    p: &ProblemSpec,
    x: &WeightedVector,
    mu: &[f64],
    search: &Search,
) -> Result<(SecondOrderVerdict, Vec<(Vec<f64>, f64)>)> {
    let mset = multiplier_set(p, x)?;
    if mu.len() != p.m() {
        return Err(Error::DimensionMismatch {
            expected: p.m(),
            found: mu.len(),
        });
    }
    let mult = mset.multipliers(mu);
    let defect = multiplier_defect(p, x, &mult)?;
    if defect > p.tol().feasibility * (1.0 + mult.lambda.max_abs()) {
        return Err(Error::NotAMultiplier(format!("defect {defect:e}")));
    }
    let oracle = CurvatureOracle::fixed(p, x, mu);
    let cone = critical_cone(p, x, 0.0, ObjectiveCut::Inequality)?;
    let min = search_cone(&oracle, &cone, p.tol().feasibility, search)?;
    let values = min.structured_values.clone();
    Ok((snc_verdict(p, min, Some(mu.to_vec())), values))
}

/// Cut levels probed for the coercivity side of the positivity check, as fractions of `η`.
const COERCIVITY_LEVELS: [f64; 3] = [1.0, 0.1, 0.01];

/// Second-order sufficient condition: `q(h) >= α‖h‖²` on `K_η(x̄)`.
pub fn check_ssc(
    p: &ProblemSpec,
    x: &WeightedVector,
    mset: &MultiplierSet,
    eta: f64,
    alpha_target: f64,
    search: &Search,
) -> Result<SecondOrderVerdict> {
    if !(eta > 0.0) {
        return Err(Error::InvalidProblem(format!(
            "eta must be positive, got {eta}"
        )));
    }
    let oracle = CurvatureOracle::new(p, x, mset)?;
    let tol = p.tol().feasibility;
    let cone = critical_cone(p, x, eta, ObjectiveCut::Inequality)?;
    let min = search_cone(&oracle, &cone, tol, search)?;
    let alpha_est = finite(min.value);

    let k0 = critical_cone(p, x, 0.0, ObjectiveCut::Inequality)?;
    let on_k = finite(search_cone(&oracle, &k0, tol, search)?.value);
    let positive = on_k.is_none_or(|v| v > p.tol().violation);
    let mut coercivity = Vec::new();
    for f in COERCIVITY_LEVELS {
        let v = if f == 1.0 {
            alpha_est
        } else {
            let c = critical_cone(p, x, eta * f, ObjectiveCut::Inequality)?;
            finite(search_cone(&oracle, &c, tol, search)?.value)
        };
        coercivity.push((eta * f, v));
    }
    let coercive = coercivity
        .iter()
        .any(|(_, v)| v.is_none_or(|v| v > p.tol().violation));
    let holds = alpha_est.is_none_or(|a| a >= alpha_target - p.tol().alpha);
    Ok(SecondOrderVerdict {
        kind: if holds {
            VerdictKind::SscHolds
        } else {
            VerdictKind::SscViolated
        },
        eta,
        fixed_mu: None,
        min_value: finite(min.value),
        witness: min.h,
        witness_mu: min.mu,
        alpha_est,
        alpha_target: Some(alpha_target),
        positivity: Some(PositivityCheck {
            min_on_critical_cone: on_k,
            positive,
            coercivity,
            coercive,
            consistent: positive == coercive,
        }),
        stats: min.stats,
    })
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Outcome of replaying a recorded witness from a cold start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replay {
    pub in_cone: bool,
    pub value: f64,
    pub value_matches: bool,
    pub verdict_matches: bool,
}

impl Replay {
    pub fn ok(&self) -> bool {
        self.in_cone && self.value_matches && self.verdict_matches
    }
}

/// Rebuilds cone and oracle from the problem and re-evaluates the witness.
pub fn replay_witness(
    p: &ProblemSpec,
    x: &WeightedVector,
    verdict: &SecondOrderVerdict,
) -> Result<Replay> {
    let h = verdict
        .witness
        .as_ref()
        .ok_or_else(|| Error::Unsupported("verdict carries no witness".into()))?;
    let oracle = match &verdict.fixed_mu {
        Some(mu) => CurvatureOracle::fixed(p, x, mu),
        None => CurvatureOracle::new(p, x, &multiplier_set(p, x)?)?,
    };
    let cone = critical_cone(p, x, verdict.eta, ObjectiveCut::Inequality)?;
    let hv = WeightedVector::new(h.clone(), p.weights().clone())?;
    let in_cone = cone.contains(&hv, p.tol().feasibility)?;
    let value = oracle.q(h).value / hv.norm_sq();
    let value_matches = verdict
        .min_value
        .is_some_and(|v| (value - v).abs() <= 1e-9 * (1.0 + value.abs()));
    let verdict_matches = match verdict.kind {
        VerdictKind::SncViolated => value < -p.tol().violation,
        VerdictKind::SscViolated => verdict
            .alpha_target
            .is_some_and(|a| value < a - p.tol().alpha),
        VerdictKind::SncHolds => value >= -p.tol().violation,
        VerdictKind::SscHolds => verdict
            .alpha_target
            .is_some_and(|a| value >= a - p.tol().alpha),
    };
    Ok(Replay {
        in_cone,
        value,
        value_matches,
        verdict_matches,
    })
}

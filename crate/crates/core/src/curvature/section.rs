//! Sampling and projection on the unit sphere of a critical cone.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cones::{CriticalCone, GeneratedCone, ObjectiveCut, SetCone, Sign};
use crate::error::Result;
use crate::linalg::{dot, max_abs, solve_lp, LinearProgram, LpOutcome, Weights};

const DYKSTRA_SWEEPS: usize = 10;
const POLISH_ROUNDS: usize = 24;
/// Dykstra stops once a full sweep moves the iterate less than this, relative to `y`.
const DYKSTRA_STALL: f64 = 1e-10;

/// The convex part of a critical cone, ready for projection and sampling.
#[derive(Debug, Clone)]
pub(crate) enum Section {
    Pattern(PatternSection),
    Generated(GeneratedSection),
}

impl Section {
    /// `K_0` of the cone, optionally dropping the objective row (giving `K+`).
    pub(crate) fn new(cone: &CriticalCone, with_objective: bool) -> Section {
        let mut eqs = cone.eq_rows.clone();
        let mut ineqs = cone.ineq_rows.clone();
        if with_objective {
            match cone.cut {
                ObjectiveCut::Inequality => ineqs.push(cone.objective.clone()),
                ObjectiveCut::Equality => eqs.push(cone.objective.clone()),
            }
        }
        match &cone.base {
            SetCone::Pattern(p) => Section::Pattern(PatternSection {
                signs: p.signs().to_vec(),
                weights: cone.weights.clone(),
                eq_rows: eqs,
                ineq_rows: ineqs.into_iter().map(|r| (r, 0.0)).collect(),
            }),
            SetCone::Generated(g) => Section::Generated(GeneratedSection::new(g, eqs, ineqs)),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct PatternSection {
    pub signs: Vec<Sign>,
    pub weights: Weights,
    pub eq_rows: Vec<Vec<f64>>,
    /// `row.h <= rhs`
    pub ineq_rows: Vec<(Vec<f64>, f64)>,
}

impl PatternSection {
    pub(crate) fn with_cut(&self, row: &[f64], rhs: f64) -> PatternSection {
        let mut out = self.clone();
        out.ineq_rows.push((row.to_vec(), rhs));
        out
    }

    fn dim(&self) -> usize {
        self.signs.len()
    }

    fn row_scale(&self, row: &[f64]) -> f64 {
        row.iter()
            .zip(self.weights.as_slice())
            .map(|(r, w)| r * r / w)
            .sum::<f64>()
    }

    /// Weighted projection onto the hyperplane/half-space `row.h (=|<=) rhs`.
    fn project_row(&self, h: &mut [f64], row: &[f64], rhs: f64, equality: bool) {
        let s = dot(row, h) - rhs;
        if !equality && s <= 0.0 {
            return;
        }
        let rr = self.row_scale(row);
        if rr == 0.0 {
            return;
        }
        for ((v, r), w) in h.iter_mut().zip(row).zip(self.weights.as_slice()) {
            *v -= s / rr * r / w;
        }
    }

    /// Approximate weighted projection (Dykstra) followed by an active-set
    /// polish that lands exactly on a face of the section. `None` if the
    /// result is (numerically) zero.
    pub(crate) fn project(&self, y: &[f64]) -> Option<Vec<f64>> {
        let n = self.dim();
        let nsets = 1 + self.eq_rows.len() + self.ineq_rows.len();
        let mut h = y.to_vec();
        let mut incr = vec![vec![0.0; n]; nsets];
        let (mut z, mut prev) = (vec![0.0; n], vec![0.0; n]);
        let scale = max_abs(y).max(f64::MIN_POSITIVE);
        for _ in 0..DYKSTRA_SWEEPS {
            prev.copy_from_slice(&h);
            for (k, inc) in incr.iter_mut().enumerate() {
                for j in 0..n {
                    z[j] = h[j] + inc[j];
                }
                h.copy_from_slice(&z);
                if k == 0 {
                    for (v, s) in h.iter_mut().zip(&self.signs) {
                        *v = s.project(*v);
                    }
                } else if k <= self.eq_rows.len() {
                    self.project_row(&mut h, &self.eq_rows[k - 1], 0.0, true);
                } else {
                    let (r, b) = &self.ineq_rows[k - 1 - self.eq_rows.len()];
                    self.project_row(&mut h, r, *b, false);
                }
                for j in 0..n {
                    inc[j] = z[j] - h[j];
                }
            }
            let moved = h
                .iter()
                .zip(&prev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if moved <= DYKSTRA_STALL * scale {
                break;
            }
        }
        self.polish(y, &h)
    }

    fn polish(&self, y: &[f64], approx: &[f64]) -> Option<Vec<f64>> {
        let n = self.dim();
        let scale = max_abs(approx).max(max_abs(y)).max(f64::MIN_POSITIVE);
        let mut pinned: Vec<bool> = (0..n)
            .map(|j| match self.signs[j] {
                Sign::Zero => true,
                Sign::Free => false,
                s => !s.admits(approx[j], 0.0) || approx[j].abs() <= 1e-9 * scale,
            })
            .collect();
        let mut active: Vec<bool> = self
            .ineq_rows
            .iter()
            .map(|(r, b)| {
                let tol = 1e-8 * self.row_scale(r).sqrt() * scale;
                dot(r, approx) - b >= -tol
            })
            .collect();
        for _ in 0..POLISH_ROUNDS {
            let h = self.face_projection(y, &pinned, &active)?;
            let hs = max_abs(&h);
            if hs <= 1e-12 * scale {
                return None;
            }
            let mut changed = false;
            for j in 0..n {
                if !pinned[j] && !self.signs[j].admits(h[j], 0.0) {
                    pinned[j] = true;
                    changed = true;
                }
            }
            for (k, (r, b)) in self.ineq_rows.iter().enumerate() {
                let tol = 1e-12 * self.row_scale(r).sqrt() * hs;
                if !active[k] && dot(r, &h) - b > tol {
                    active[k] = true;
                    changed = true;
                }
            }
            if !changed {
                return Some(h);
            }
        }
        None
    }

    /// Weighted projection of `y` onto `{h : h_j = 0 (pinned), eq rows = 0, active rows = rhs}`.
    fn face_projection(&self, y: &[f64], pinned: &[bool], active: &[bool]) -> Option<Vec<f64>> {
        let n = self.dim();
        let w = self.weights.as_slice();
        let mut rows: Vec<(&[f64], f64)> =
            self.eq_rows.iter().map(|r| (r.as_slice(), 0.0)).collect();
        rows.extend(
            self.ineq_rows
                .iter()
                .zip(active)
                .filter(|(_, a)| **a)
                .map(|((r, b), _)| (r.as_slice(), *b)),
        );
        let mut base: Vec<f64> = (0..n).map(|j| if pinned[j] { 0.0 } else { y[j] }).collect();
        let k = rows.len();
        if k == 0 {
            return Some(base);
        }
        // (R W⁻¹ Rᵀ) ν = R base - b over free coordinates
        let gram = DMatrix::from_fn(k, k, |a, b| {
            (0..n)
                .filter(|j| !pinned[*j])
                .map(|j| rows[a].0[j] * rows[b].0[j] / w[j])
                .sum::<f64>()
        });
        let rhs = DVector::from_iterator(k, rows.iter().map(|(r, b)| dot(r, &base) - b));
        let smax = gram.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let nu = gram
            .svd(true, true)
            .solve(&rhs, 1e-13 * smax.max(f64::MIN_POSITIVE))
            .ok()?;
        for j in 0..n {
            if !pinned[j] {
                let c: f64 = rows.iter().zip(nu.iter()).map(|((r, _), v)| r[j] * v).sum();
                base[j] -= c / w[j];
            }
        }
        // rows whose free part vanished cannot be repaired by moving free coordinates
        if rows.iter().any(|(r, b)| {
            (dot(r, &base) - b).abs()
                > 1e-10 * (self.row_scale(r).sqrt() * max_abs(&base) + b.abs())
        }) {
            return None;
        }
        Some(base)
    }

    /// Sign-respecting indicators of maximal runs with identical sign and row coefficients.
    pub(crate) fn pieces(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let key = |j: usize| -> Vec<f64> {
            self.eq_rows
                .iter()
                .chain(self.ineq_rows.iter().map(|(r, _)| r))
                .map(|r| r[j] / self.weights[j])
                .collect()
        };
        let mut out = Vec::new();
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            let k0 = key(start);
            while end < n && self.signs[end] == self.signs[start] && key(end) == k0 {
                end += 1;
            }
            let sign = self.signs[start];
            let values: &[f64] = match sign {
                Sign::NonNeg => &[1.0],
                Sign::NonPos => &[-1.0],
                Sign::Free => &[1.0, -1.0],
                Sign::Zero => &[],
            };
            for v in values {
                let mut h = vec![0.0; n];
                h[start..end].iter_mut().for_each(|x| *x = *v);
                out.push(h);
            }
            start = end;
        }
        out
    }

    pub(crate) fn structured(&self, limit: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        let pieces = self.pieces();
        let mut raw: Vec<Vec<f64>> = pieces.clone();
        for a in 0..pieces.len() {
            for b in a + 1..pieces.len() {
                raw.push(
                    pieces[a]
                        .iter()
                        .zip(&pieces[b])
                        .map(|(x, y)| x + y)
                        .collect(),
                );
            }
        }
        for j in 0..n {
            for s in [1.0, -1.0] {
                if self.signs[j].admits(s, 0.0) && self.signs[j] != Sign::Zero {
                    let mut e = vec![0.0; n];
                    e[j] = s;
                    raw.push(e);
                }
            }
        }
        let mut out = Vec::new();
        for y in raw {
            if out.len() >= limit {
                break;
            }
            if let Some(h) = self.project(&y) {
                out.push(h);
            }
        }
        out
    }

    pub(crate) fn random(&self, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        let y: Vec<f64> = self
            .weights
            .as_slice()
            .iter()
            .map(|w| {
                let z: f64 = StandardNormal.sample(rng);
                z / w.sqrt()
            })
            .collect();
        self.project(&y)
    }
}

/// `{Σ t_j r_j : t >= 0}` intersected with linear rows, sampled through LPs in `t`.
#[derive(Debug, Clone)]
pub(crate) struct GeneratedSection {
    gens: Vec<Vec<f64>>,
    eq_rows: Vec<Vec<f64>>,
    ineq_rows: Vec<Vec<f64>>,
}

impl GeneratedSection {
    fn new(cone: &GeneratedCone, eq_rows: Vec<Vec<f64>>, ineq_rows: Vec<Vec<f64>>) -> Self {
        GeneratedSection {
            gens: cone.generators(),
            eq_rows,
            ineq_rows,
        }
    }

    fn combine(&self, t: &[f64]) -> Vec<f64> {
        let dim = self.gens.first().map_or(0, Vec::len);
        let mut h = vec![0.0; dim];
        for (g, tj) in self.gens.iter().zip(t) {
            for (v, gi) in h.iter_mut().zip(g) {
                *v += tj * gi;
            }
        }
        h
    }

    /// Maximizes `c.t` over normalized feasible combinations.
    fn extreme(&self, c: Vec<f64>) -> Result<Option<Vec<f64>>> {
        let k = self.gens.len();
        let mut lp = LinearProgram::maximize(c).eq(vec![1.0; k], 1.0);
        for r in &self.eq_rows {
            lp = lp.eq(self.gens.iter().map(|g| dot(r, g)).collect(), 0.0);
        }
        for r in &self.ineq_rows {
            lp = lp.le(self.gens.iter().map(|g| dot(r, g)).collect(), 0.0);
        }
        lp = lp.nonnegative(0..k);
        Ok(match solve_lp(&lp)? {
            LpOutcome::Optimal { point, .. } => {
                let h = self.combine(&point);
                (max_abs(&h) > 1e-12).then_some(h)
            }
            _ => None,
        })
    }

    pub(crate) fn structured(&self, limit: usize) -> Result<Vec<Vec<f64>>> {
        let k = self.gens.len();
        let mut out: Vec<Vec<f64>> = Vec::new();
        for j in 0..k {
            if out.len() >= limit {
                break;
            }
            let mut c = vec![0.0; k];
            c[j] = 1.0;
            if let Some(h) = self.extreme(c)? {
                out.push(h);
            }
        }
        Ok(out)
    }

    pub(crate) fn random(
        &self,
        rng: &mut ChaCha8Rng,
        seeds: &[Vec<f64>],
    ) -> Result<Option<Vec<f64>>> {
        if !seeds.is_empty() && rng.random_bool(0.75) {
            let mut h = vec![0.0; seeds[0].len()];
            for s in seeds {
                let t: f64 = rng.random::<f64>().powi(3);
                for (v, x) in h.iter_mut().zip(s) {
                    *v += t * x;
                }
            }
            return Ok((max_abs(&h) > 1e-12).then_some(h));
        }
        let c: Vec<f64> = (0..self.gens.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        self.extreme(c)
    }
}

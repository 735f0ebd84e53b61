//! Monte-Carlo check of `f(x) >= f(x̄) + (α/2)‖x - x̄‖²` on feasible points near `x̄`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, WeightedVector};
use crate::model::{AbstractSet, HullSet, ProblemSpec};

const NEWTON_STEPS: usize = 30;
const ATTEMPTS_PER_SAMPLE: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GrowthVerdict {
    Consistent {
        samples: usize,
        /// Smallest `f(x) - f(x̄) - (α/2)‖x - x̄‖²` seen.
        min_margin: f64,
    },
    Counterexample {
        point: Vec<f64>,
        value: f64,
        bound: f64,
        samples: usize,
    },
    NoFeasibleSamples {
        attempts: usize,
    },
}

impl GrowthVerdict {
    pub fn consistent(&self) -> bool {
        matches!(self, GrowthVerdict::Consistent { .. })
    }
}

pub fn sample_growth(
    p: &ProblemSpec,
    x: &WeightedVector,
    alpha: f64,
    eps: f64,
    n_samples: usize,
    seed: u64,
) -> Result<GrowthVerdict> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidProblem(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if !alpha.is_finite() {
        return Err(Error::NonFiniteValue {
            what: "alpha".into(),
        });
    }
    let mut sampler = Sampler::new(p, x, eps, seed)?;
    let f0 = p.objective().value(x);
    let growth_tol = 1e-12 * (1.0 + f0.abs());
    let mut samples = 0;
    let mut min_margin = f64::INFINITY;
    let mut attempts = 0;
    let max_attempts = ATTEMPTS_PER_SAMPLE * n_samples.max(1);
    while samples < n_samples && attempts < max_attempts {
        attempts += 1;
        let Some(y) = sampler.next()? else { continue };
        samples += 1;
        let yv = WeightedVector::new(y, p.weights().clone())?;
        let value = p.objective().value(&yv);
        let bound = f0 + 0.5 * alpha * yv.sub(x).norm_sq();
        let margin = value - bound;
        min_margin = min_margin.min(margin);
        if margin < -growth_tol {
            return Ok(GrowthVerdict::Counterexample {
                point: yv.into_entries(),
                value,
                bound,
                samples,
            });
        }
    }
    if samples == 0 {
        return Ok(GrowthVerdict::NoFeasibleSamples { attempts });
    }
    Ok(GrowthVerdict::Consistent {
        samples,
        min_margin,
    })
}

struct Sampler<'a> {
    p: &'a ProblemSpec,
    x: &'a WeightedVector,
    eps: f64,
    rng: ChaCha8Rng,
    /// Extreme points of the hull slice by a single affine equality, evaluated first.
    slice: Option<Vec<Vec<f64>>>,
    queued: usize,
}

impl<'a> Sampler<'a> {
    fn new(p: &'a ProblemSpec, x: &'a WeightedVector, eps: f64, seed: u64) -> Result<Self> {
        let slice = match p.set() {
            AbstractSet::Hull(h) if p.m1() == 1 && p.constraints()[0].is_affine() => {
                Some(affine_slice(p, h)?)
            }
            _ => None,
        };
        Ok(Sampler {
            p,
            x,
            eps,
            rng: ChaCha8Rng::seed_from_u64(seed),
            slice,
            queued: 0,
        })
    }

    fn next(&mut self) -> Result<Option<Vec<f64>>> {
        let candidate = match self.p.set() {
            AbstractSet::Box(b) => {
                let mut y = self.perturbation();
                b.clamp(&mut y);
                if self.p.m1() == 1 {
                    match self.newton(y, |v| b.clamp(v)) {
                        Some(v) => v,
                        None => return Ok(None),
                    }
                } else {
                    y
                }
            }
            AbstractSet::Hull(h) => self.hull_point(h),
        };
        Ok(self.accept(candidate)?)
    }

    fn perturbation(&mut self) -> Vec<f64> {
        let w = self.p.weights();
        let dir: Vec<f64> = w
            .as_slice()
            .iter()
            .map(|wi| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                z / wi.sqrt()
            })
            .collect();
        let n = w.norm(&dir).max(1e-300);
        let r = self.eps * self.rng.random::<f64>();
        self.x
            .entries()
            .iter()
            .zip(&dir)
            .map(|(a, d)| a + r * d / n)
            .collect()
    }

    /// Newton steps along the Riesz gradient of the single equality, re-projected after each.
    fn newton(&self, mut y: Vec<f64>, project: impl Fn(&mut [f64])) -> Option<Vec<f64>> {
        let g = &self.p.constraints()[0];
        let w = self.p.weights().clone();
        let tol = self.p.tol().feasibility;
        for _ in 0..NEWTON_STEPS {
            let yv = WeightedVector::new(y.clone(), w.clone()).ok()?;
            let r = g.value(&yv);
            if r.abs() <= tol {
                return Some(y);
            }
            let grad = g.gradient(&yv);
            let gn = grad.norm_sq();
            if gn <= 1e-300 {
                return None;
            }
            for (a, d) in y.iter_mut().zip(grad.entries()) {
                *a -= r / gn * d;
            }
            project(&mut y);
        }
        None
    }

    fn hull_point(&mut self, h: &HullSet) -> Vec<f64> {
        let pts: &[Vec<f64>] = match &self.slice {
            Some(s) => s,
            None => &h.points,
        };
        if self.slice.is_some() && self.queued < pts.len() {
            self.queued += 1;
            return self.pull_in(pts[self.queued - 1].clone());
        }
        if pts.is_empty() {
            return self.x.entries().to_vec();
        }
        // sparse convex combination: a few random points with exponential weights
        let k = self.rng.random_range(1..=pts.len().min(4));
        let mut y = vec![0.0; h.dim()];
        let mut total = 0.0;
        for _ in 0..k {
            let j = self.rng.random_range(0..pts.len());
            let t: f64 = -self.rng.random::<f64>().max(1e-300).ln();
            total += t;
            for (a, b) in y.iter_mut().zip(&pts[j]) {
                *a += t * b;
            }
        }
        y.iter_mut().for_each(|v| *v /= total);
        let shrink = self.rng.random::<f64>();
        let pulled = self.pull_in(y);
        self.x
            .entries()
            .iter()
            .zip(&pulled)
            .map(|(a, b)| a + shrink * (b - a))
            .collect()
    }

    /// Moves `y` toward `x̄` along the segment until it lies in the eps ball.
    fn pull_in(&self, y: Vec<f64>) -> Vec<f64> {
        let d: Vec<f64> = y.iter().zip(self.x.entries()).map(|(a, b)| a - b).collect();
        let n = self.p.weights().norm(&d);
        if n <= self.eps {
            return y;
        }
        let t = self.eps / n;
        self.x
            .entries()
            .iter()
            .zip(&d)
            .map(|(a, b)| a + t * b)
            .collect()
    }

    fn accept(&self, y: Vec<f64>) -> Result<Option<Vec<f64>>> {
        let p = self.p;
        let tol = p.tol().feasibility;
        let yv = WeightedVector::new(y, p.weights().clone())?;
        if yv.sub(self.x).norm() > self.eps * (1.0 + 1e-12) {
            return Ok(None);
        }
        if let AbstractSet::Box(b) = p.set() {
            if !b.contains(yv.entries(), tol) {
                return Ok(None);
            }
        }
        for (i, g) in p.constraints().iter().enumerate() {
            let v = g.value(&yv);
            let ok = if p.is_equality(i) {
                v.abs() <= tol
            } else {
                v <= tol
            };
            if !ok {
                return Ok(None);
            }
        }
        Ok(Some(yv.into_entries()))
    }
}

/// Extreme points of `hull ∩ {g = 0}` for affine `g`: zero points plus edge crossings.
fn affine_slice(p: &ProblemSpec, h: &HullSet) -> Result<Vec<Vec<f64>>> {
    let g = &p.constraints()[0];
    let vals: Vec<f64> = h
        .points
        .iter()
        .map(|pt| WeightedVector::new(pt.clone(), p.weights().clone()).map(|v| g.value(&v)))
        .collect::<std::result::Result<_, _>>()?;
    let scale = 1.0 + vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = p.tol().feasibility * scale;
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (i, pi) in h.points.iter().enumerate() {
        if vals[i].abs() <= tol {
            out.push(pi.clone());
            continue;
        }
        for j in (i + 1)..h.points.len() {
            if vals[j].abs() > tol && vals[i] * vals[j] < 0.0 {
                let t = vals[i] / (vals[i] - vals[j]);
                out.push(
                    pi.iter()
                        .zip(&h.points[j])
                        .map(|(a, b)| a + t * (b - a))
                        .collect(),
                );
            }
        }
    }
    // nearest to the base point first
    let apex = &h.apex;
    out.sort_by(|a, b| {
        let da: Vec<f64> = a.iter().zip(apex).map(|(u, v)| u - v).collect();
        let db: Vec<f64> = b.iter().zip(apex).map(|(u, v)| u - v).collect();
        dot(&da, &da).total_cmp(&dot(&db, &db))
    });
    Ok(out)
}

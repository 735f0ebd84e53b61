//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Variables are free. Each is split into a nonnegative pair, inequality rows
//! receive a slack and every row an artificial column. Problems here are
//! small (a handful of multiplier coordinates, at most a few hundred rows),
//! so the tableau is dense and exact verdicts take priority over speed.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::vector::{dot, max_abs};
use super::LinalgError;

/// One linear row `coeffs . y (= or <=) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<f64>, rhs: f64) -> Self {
        Row { coeffs, rhs }
    }

    pub fn residual(&self, y: &[f64]) -> f64 {
        dot(&self.coeffs, y) - self.rhs
    }

    /// Row rescaled so its largest coefficient has magnitude one.
    /// `None` when every coefficient is zero.
    pub fn normalized(&self) -> Option<Row> {
        let s = max_abs(&self.coeffs);
        if s == 0.0 {
            return None;
        }
        Some(Row {
            coeffs: self.coeffs.iter().map(|c| c / s).collect(),
            rhs: self.rhs / s,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// `opt c.y` subject to equality and `<=` rows; `y` free except where `nonneg` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub eq_rows: Vec<Row>,
    pub ineq_rows: Vec<Row>,
    pub sense: Sense,
    pub nonneg: Vec<bool>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, sense: Sense) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            eq_rows: Vec::new(),
            ineq_rows: Vec::new(),
            sense,
            nonneg: vec![false; n],
        }
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::new(objective, Sense::Minimize)
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::new(objective, Sense::Maximize)
    }

    pub fn dim(&self) -> usize {
        self.objective.len()
    }

    pub fn eq(mut self, coeffs: Vec<f64>, rhs: f64) -> Self {
        self.eq_rows.push(Row::new(coeffs, rhs));
        self
    }

    pub fn le(mut self, coeffs: Vec<f64>, rhs: f64) -> Self {
        self.ineq_rows.push(Row::new(coeffs, rhs));
        self
    }

    pub fn ge(self, coeffs: Vec<f64>, rhs: f64) -> Self {
        let neg = coeffs.iter().map(|c| -c).collect();
        self.le(neg, -rhs)
    }

    /// Restricts the listed variables to `y_j >= 0` without adding rows.
    pub fn nonnegative(mut self, vars: impl IntoIterator<Item = usize>) -> Self {
        for j in vars {
            self.nonneg[j] = true;
        }
        self
    }

    pub fn with_rows(mut self, eq_rows: &[Row], ineq_rows: &[Row]) -> Self {
        self.eq_rows.extend_from_slice(eq_rows);
        self.ineq_rows.extend_from_slice(ineq_rows);
        self
    }

    pub fn row_count(&self) -> usize {
        self.eq_rows.len() + self.ineq_rows.len()
    }

    /// Checks `y` against every row at the given absolute tolerance on normalized rows.
    pub fn is_feasible(&self, y: &[f64], tol: f64) -> bool {
        let scale = max_abs(y).max(1.0);
        self.eq_rows
            .iter()
            .filter_map(Row::normalized)
            .all(|r| r.residual(y).abs() <= tol * scale)
            && self
                .ineq_rows
                .iter()
                .filter_map(Row::normalized)
                .all(|r| r.residual(y) <= tol * scale)
            && self
                .nonneg
                .iter()
                .zip(y)
                .all(|(nn, v)| !nn || *v >= -tol * scale)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal {
        value: f64,
        point: Vec<f64>,
    },
    /// A recession direction (max-norm one) along which the objective improves without bound.
    Unbounded {
        ray: Vec<f64>,
    },
    Infeasible,
}

impl LpOutcome {
    pub fn optimal_value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn point(&self) -> Option<&[f64]> {
        match self {
            LpOutcome::Optimal { point, .. } => Some(point),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    pub feasibility_tol: f64,
    pub pivot_tol: f64,
    /// Per-phase pivot limit; defaults to `10 * (variables + rows)`.
    pub max_pivots: Option<usize>,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            feasibility_tol: 1e-9,
            pivot_tol: 1e-11,
            max_pivots: None,
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome, LinalgError> {
    solve_lp_with(lp, &LpOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &LpOptions) -> Result<LpOutcome, LinalgError> {
    let m = lp.dim();
    for row in lp.eq_rows.iter().chain(&lp.ineq_rows) {
        if row.coeffs.len() != m {
            return Err(LinalgError::DimensionMismatch {
                expected: m,
                found: row.coeffs.len(),
            });
        }
        if let Some(v) = row.coeffs.iter().chain([&row.rhs]).find(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite(*v));
        }
    }
    if let Some(v) = lp.objective.iter().find(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite(*v));
    }
    let limit = opts.max_pivots.unwrap_or(10 * (m + lp.row_count()).max(1));

    let Some(std) = StandardForm::build(lp, opts.feasibility_tol) else {
        return Ok(LpOutcome::Infeasible);
    };
    std.solve(lp, opts, limit)
}

/// Rows after normalization and deduplication, in `A x = b, x >= 0` form.
struct StandardForm {
    m: usize,
    n_slack: usize,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl StandardForm {
    fn build(lp: &LinearProgram, tol: f64) -> Option<Self> {
        let m = lp.dim();
        let mut eqs: Vec<Row> = Vec::new();
        for row in &lp.eq_rows {
            match row.normalized() {
                None if row.rhs.abs() > tol => return None,
                None => {}
                Some(r) => {
                    if let Some(prev) = eqs.iter().find(|e| same_coeffs(&e.coeffs, &r.coeffs)) {
                        if (prev.rhs - r.rhs).abs() > tol {
                            return None;
                        }
                    } else {
                        eqs.push(r);
                    }
                }
            }
        }
        let mut ineqs: Vec<Row> = Vec::new();
        for row in &lp.ineq_rows {
            match row.normalized() {
                None if row.rhs < -tol => return None,
                None => {}
                Some(r) => {
                    if let Some(prev) = ineqs.iter_mut().find(|e| same_coeffs(&e.coeffs, &r.coeffs))
                    {
                        prev.rhs = prev.rhs.min(r.rhs);
                    } else {
                        ineqs.push(r);
                    }
                }
            }
        }
        let n_slack = ineqs.len();
        let n_std = 2 * m + n_slack;
        let mut a = Vec::with_capacity(eqs.len() + ineqs.len());
        let mut b = Vec::with_capacity(eqs.len() + ineqs.len());
        for (k, row) in eqs.iter().chain(&ineqs).enumerate() {
            let mut r = vec![0.0; n_std];
            for (j, c) in row.coeffs.iter().enumerate() {
                r[j] = *c;
                if !lp.nonneg[j] {
                    r[m + j] = -*c;
                }
            }
            if k >= eqs.len() {
                r[2 * m + (k - eqs.len())] = 1.0;
            }
            let mut rhs = row.rhs;
            if rhs < 0.0 {
                r.iter_mut().for_each(|v| *v = -*v);
                rhs = -rhs;
            }
            a.push(r);
            b.push(rhs);
        }
        Some(StandardForm { m, n_slack, a, b })
    }

    fn n_std(&self) -> usize {
        2 * self.m + self.n_slack
    }

    fn solve(
        &self,
        lp: &LinearProgram,
        opts: &LpOptions,
        limit: usize,
    ) -> Result<LpOutcome, LinalgError> {
        let rows = self.a.len();
        let n_std = self.n_std();
        let cols = n_std + rows;
        let mut tab = Tableau::new(rows, cols);
        for r in 0..rows {
            tab.row_mut(r)[..n_std].copy_from_slice(&self.a[r]);
            tab.row_mut(r)[n_std + r] = 1.0;
            tab.row_mut(r)[cols] = self.b[r];
            tab.basis[r] = n_std + r;
        }

        // phase 1: minimize the sum of artificials
        let mut cost1 = vec![0.0; cols];
        cost1[n_std..].iter_mut().for_each(|c| *c = 1.0);
        let allowed_all: Vec<bool> = (0..cols)
            .map(|j| !(j >= self.m && j < 2 * self.m && lp.nonneg[j - self.m]))
            .collect();
        match tab.run(&cost1, &allowed_all, opts.pivot_tol, limit)? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded(_) => unreachable!("phase one objective is bounded below"),
        }
        let infeasibility: f64 = (0..rows)
            .filter(|r| tab.basis[*r] >= n_std)
            .map(|r| tab.rhs(r))
            .sum();
        if infeasibility > opts.feasibility_tol {
            return Ok(LpOutcome::Infeasible);
        }

        // drive remaining artificials out of the basis; drop redundant rows
        let mut keep = vec![true; rows];
        for r in 0..rows {
            if tab.basis[r] < n_std {
                continue;
            }
            let pivot_col = (0..n_std).find(|j| tab.at(r, *j).abs() > 1e-9);
            match pivot_col {
                Some(j) => tab.pivot(r, j, None),
                None => keep[r] = false,
            }
        }
        let kept: Vec<usize> = (0..rows).filter(|r| keep[*r]).collect();
        let mut tab = tab.retain_rows(&kept);

        // phase 2
        let sign = match lp.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut cost2 = vec![0.0; cols];
        for (j, c) in lp.objective.iter().enumerate() {
            cost2[j] = sign * c;
            cost2[self.m + j] = -sign * c;
        }
        let allowed: Vec<bool> = (0..cols).map(|j| j < n_std && allowed_all[j]).collect();
        match tab.run(&cost2, &allowed, opts.pivot_tol, limit)? {
            PhaseEnd::Unbounded(col) => {
                let mut d = vec![0.0; cols];
                d[col] = 1.0;
                for r in 0..tab.rows {
                    d[tab.basis[r]] -= tab.at(r, col);
                }
                let mut ray: Vec<f64> = (0..self.m).map(|j| d[j] - d[self.m + j]).collect();
                let s = max_abs(&ray);
                if s == 0.0 {
                    return Err(LinalgError::Numerical("degenerate unbounded ray"));
                }
                ray.iter_mut().for_each(|v| *v /= s);
                Ok(LpOutcome::Unbounded { ray })
            }
            PhaseEnd::Optimal => {
                let mut x = vec![0.0; cols];
                for r in 0..tab.rows {
                    x[tab.basis[r]] = tab.rhs(r);
                }
                self.refine(&kept, &tab.basis, &mut x);
                let point: Vec<f64> = (0..self.m).map(|j| x[j] - x[self.m + j]).collect();
                if !lp.is_feasible(&point, opts.feasibility_tol) {
                    return Err(LinalgError::Numerical("simplex point violates rows"));
                }
                let value = dot(&lp.objective, &point);
                Ok(LpOutcome::Optimal { value, point })
            }
        }
    }

    /// Re-solves the final basis system directly to strip accumulated pivoting error.
    fn refine(&self, kept: &[usize], basis: &[usize], x: &mut [f64]) {
        let n_std = self.n_std();
        let k = kept.len();
        if k == 0 || basis.iter().any(|j| *j >= n_std) {
            return;
        }
        let bmat = DMatrix::from_fn(k, k, |i, j| self.a[kept[i]][basis[j]]);
        let rhs = DVector::from_iterator(k, kept.iter().map(|r| self.b[*r]));
        if let Some(sol) = bmat.lu().solve(&rhs) {
            if sol.iter().all(|v| v.is_finite() && *v >= -1e-9) {
                for (j, v) in basis.iter().zip(sol.iter()) {
                    x[*j] = v.max(0.0);
                }
            }
        }
    }
}

fn same_coeffs(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12)
}

enum PhaseEnd {
    Optimal,
    Unbounded(usize),
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows` rows of width `cols + 1`, rhs last.
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn new(rows: usize, cols: usize) -> Self {
        Tableau {
            rows,
            cols,
            data: vec![0.0; rows * (cols + 1)],
            basis: vec![0; rows],
        }
    }

    fn width(&self) -> usize {
        self.cols + 1
    }

    fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let w = self.width();
        &mut self.data[r * w..(r + 1) * w]
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width() + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn retain_rows(self, kept: &[usize]) -> Tableau {
        let w = self.width();
        let mut out = Tableau::new(kept.len(), self.cols);
        for (i, r) in kept.iter().enumerate() {
            out.data[i * w..(i + 1) * w].copy_from_slice(&self.data[r * w..(r + 1) * w]);
            out.basis[i] = self.basis[*r];
        }
        out
    }

    fn pivot(&mut self, pr: usize, pc: usize, reduced: Option<&mut Vec<f64>>) {
        let w = self.width();
        let p = self.at(pr, pc);
        let prow: Vec<f64> = self.data[pr * w..(pr + 1) * w]
            .iter()
            .map(|v| v / p)
            .collect();
        self.data[pr * w..(pr + 1) * w].copy_from_slice(&prow);
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.at(r, pc);
            if f != 0.0 {
                let row = &mut self.data[r * w..(r + 1) * w];
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                row[pc] = 0.0;
            }
        }
        if let Some(d) = reduced {
            let f = d[pc];
            if f != 0.0 {
                for (v, pv) in d.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
                d[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
    }

    fn run(
        &mut self,
        cost: &[f64],
        allowed: &[bool],
        pivot_tol: f64,
        limit: usize,
    ) -> Result<PhaseEnd, LinalgError> {
        // reduced costs d_j = c_j - c_B^T T_j; last slot holds -objective
        let mut d: Vec<f64> = cost.iter().copied().chain([0.0]).collect();
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for j in 0..=self.cols {
                    d[j] -= cb * self.at(r, j);
                }
            }
        }
        let rc_tol = 1e-11;
        for _ in 0..=limit {
            let Some(enter) = (0..self.cols).find(|j| allowed[*j] && d[*j] < -rc_tol) else {
                return Ok(PhaseEnd::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, enter);
                if a <= pivot_tol {
                    continue;
                }
                let ratio = self.rhs(r) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                        if (tie && self.basis[r] < self.basis[lr]) || (!tie && ratio < lratio) {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
            match leave {
                None => return Ok(PhaseEnd::Unbounded(enter)),
                Some((r, _)) => self.pivot(r, enter, Some(&mut d)),
            }
        }
        Err(LinalgError::IterationLimit { limit })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nonnegative_variables_without_rows() {
        let lp = LinearProgram::minimize(vec![1.0, -1.0])
            .le(vec![0.0, 1.0], 2.0)
            .nonnegative([0]);
        let out = solve_lp(&lp).unwrap();
        assert_eq!(out.optimal_value(), Some(-2.0));
        assert_eq!(out.point().unwrap()[0], 0.0);
        let lp = LinearProgram::minimize(vec![0.0, 0.0])
            .eq(vec![1.0, 1.0], -1.0)
            .nonnegative([0, 1]);
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Infeasible);
        let lp = LinearProgram::maximize(vec![1.0]).nonnegative([0]);
        assert!(matches!(
            solve_lp(&lp).unwrap(),
            LpOutcome::Unbounded { .. }
        ));
    }

    #[test]
    fn box_endpoint_minimum() {
        // min mu s.t. 0 <= mu <= 1
        let lp = LinearProgram::minimize(vec![1.0])
            .ge(vec![1.0], 0.0)
            .le(vec![1.0], 1.0);
        match solve_lp(&lp).unwrap() {
            LpOutcome::Optimal { value, point } => {
                assert!(value.abs() < 1e-12);
                assert!(point[0].abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn half_line_is_unbounded() {
        let lp = LinearProgram::maximize(vec![1.0]).ge(vec![1.0], 0.0);
        match solve_lp(&lp).unwrap() {
            LpOutcome::Unbounded { ray } => assert_eq!(ray, vec![1.0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn curvature_line_maximum() {
        // max 1 - 3 mu over [0, 1]; constant handled outside the LP
        let lp = LinearProgram::maximize(vec![-3.0])
            .ge(vec![1.0], 0.0)
            .le(vec![1.0], 1.0);
        let out = solve_lp(&lp).unwrap();
        assert!((1.0 + out.optimal_value().unwrap() - 1.0).abs() < 1e-12);
        assert!(out.point().unwrap()[0].abs() < 1e-12);
    }

    #[test]
    fn detects_infeasibility() {
        let lp = LinearProgram::minimize(vec![0.0, 0.0])
            .le(vec![1.0, 1.0], -1.0)
            .ge(vec![1.0, 0.0], 0.0)
            .ge(vec![0.0, 1.0], 0.0);
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Infeasible);
        let zero_row = LinearProgram::minimize(vec![1.0]).eq(vec![0.0], 2.0);
        assert_eq!(solve_lp(&zero_row).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn equality_and_redundant_rows() {
        // x + y = 1 twice, x - y = 0: redundant row must be dropped after phase one
        let lp = LinearProgram::minimize(vec![1.0, 2.0])
            .eq(vec![1.0, 1.0], 1.0)
            .eq(vec![2.0, 2.0], 2.0)
            .eq(vec![1.0, -1.0], 0.0);
        let out = solve_lp(&lp).unwrap();
        let p = out.point().unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        assert!((out.optimal_value().unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn unbounded_ray_is_a_recession_direction() {
        // min -x - y s.t. x - 2y <= 1, -x + y <= 2
        let lp = LinearProgram::minimize(vec![-1.0, -1.0])
            .le(vec![1.0, -2.0], 1.0)
            .le(vec![-1.0, 1.0], 2.0);
        match solve_lp(&lp).unwrap() {
            LpOutcome::Unbounded { ray } => {
                assert!(ray[0] - 2.0 * ray[1] <= 1e-12);
                assert!(-ray[0] + ray[1] <= 1e-12);
                assert!(-ray[0] - ray[1] < 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_and_iteration_limit() {
        let bad = LinearProgram::minimize(vec![1.0]).le(vec![1.0, 2.0], 0.0);
        assert!(matches!(
            solve_lp(&bad),
            Err(LinalgError::DimensionMismatch { .. })
        ));
        let lp = LinearProgram::minimize(vec![-1.0, -1.0])
            .le(vec![1.0, 0.0], 1.0)
            .le(vec![0.0, 1.0], 1.0);
        let opts = LpOptions {
            max_pivots: Some(0),
            ..LpOptions::default()
        };
        assert!(matches!(
            solve_lp_with(&lp, &opts),
            Err(LinalgError::IterationLimit { limit: 0 })
        ));
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling instance, rewritten with free variables
        let mut lp = LinearProgram::minimize(vec![-0.75, 150.0, -0.02, 6.0])
            .le(vec![0.25, -60.0, -0.04, 9.0], 0.0)
            .le(vec![0.5, -90.0, -0.02, 3.0], 0.0)
            .le(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        for j in 0..4 {
            let mut e = vec![0.0; 4];
            e[j] = -1.0;
            lp = lp.le(e, 0.0);
        }
        let out = solve_lp(&lp).unwrap();
        assert!((out.optimal_value().unwrap() + 0.05).abs() < 1e-9);
    }
}

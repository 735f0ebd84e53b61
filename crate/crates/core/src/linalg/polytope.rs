use nalgebra::{DMatrix, DVector};

use super::lp::{solve_lp, LinearProgram, LpOutcome, Row};
use super::vector::{dot, max_abs};
use super::LinalgError;

/// Largest dimension accepted by [`enumerate_vertices`].
pub const MAX_VERTEX_DIM: usize = 12;

/// Cap on the number of row subsets tried during vertex enumeration.
const MAX_SUBSETS: u64 = 20_000_000;

/// Polyhedron `{y : E y = e, A y <= b}` in `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeH {
    pub dim: usize,
    pub eq_rows: Vec<Row>,
    pub ineq_rows: Vec<Row>,
}

impl PolytopeH {
    pub fn new(dim: usize, eq_rows: Vec<Row>, ineq_rows: Vec<Row>) -> Result<Self, LinalgError> {
        for row in eq_rows.iter().chain(&ineq_rows) {
            if row.coeffs.len() != dim {
                return Err(LinalgError::DimensionMismatch {
                    expected: dim,
                    found: row.coeffs.len(),
                });
            }
        }
        Ok(PolytopeH {
            dim,
            eq_rows,
            ineq_rows,
        })
    }

    /// Box `lo <= y <= hi`.
    pub fn boxed(lo: &[f64], hi: &[f64]) -> Self {
        let dim = lo.len();
        let mut ineq_rows = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            ineq_rows.push(Row::new(e.clone(), hi[i]));
            e[i] = -1.0;
            ineq_rows.push(Row::new(e, -lo[i]));
        }
        PolytopeH {
            dim,
            eq_rows: Vec::new(),
            ineq_rows,
        }
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        self.program(vec![0.0; self.dim]).is_feasible(y, tol)
    }

    /// An LP over this polyhedron minimizing `objective`.
    pub fn program(&self, objective: Vec<f64>) -> LinearProgram {
        LinearProgram::minimize(objective).with_rows(&self.eq_rows, &self.ineq_rows)
    }

    /// The homogeneous system whose solutions form the recession cone.
    pub fn recession_system(&self) -> PolytopeH {
        let zero = |r: &Row| Row::new(r.coeffs.clone(), 0.0);
        PolytopeH {
            dim: self.dim,
            eq_rows: self.eq_rows.iter().map(zero).collect(),
            ineq_rows: self.ineq_rows.iter().map(zero).collect(),
        }
    }

    pub fn is_empty(&self) -> Result<bool, LinalgError> {
        Ok(solve_lp(&self.program(vec![0.0; self.dim]))? == LpOutcome::Infeasible)
    }

    /// Polyhedron with one extra inequality row.
    pub fn with_ineq(&self, row: Row) -> PolytopeH {
        let mut out = self.clone();
        out.ineq_rows.push(row);
        out
    }
}

/// A nonzero recession direction, if any. Decided by `2 dim` LPs maximizing `+-y_i`
/// over the homogeneous system.
pub fn recession_ray(p: &PolytopeH) -> Result<Option<Vec<f64>>, LinalgError> {
    let rec = p.recession_system();
    for i in 0..p.dim {
        for sign in [1.0, -1.0] {
            let mut c = vec![0.0; p.dim];
            c[i] = sign;
            let lp = LinearProgram::maximize(c).with_rows(&rec.eq_rows, &rec.ineq_rows);
            if let LpOutcome::Unbounded { ray } = solve_lp(&lp)? {
                return Ok(Some(ray));
            }
        }
    }
    Ok(None)
}

pub fn recession_cone_trivial(p: &PolytopeH) -> Result<bool, LinalgError> {
    Ok(recession_ray(p)?.is_none())
}

/// All vertices of a bounded polytope, deduplicated at `dedup_tol` in the max-norm.
///
/// Works on the affine hull: inequality rows tight on the whole polytope are
/// promoted to equalities first, the hull is parameterized by a null-space
/// basis, and every `d`-subset of the remaining rows is solved and filtered.
pub fn enumerate_vertices(
    p: &PolytopeH,
    feas_tol: f64,
    dedup_tol: f64,
) -> Result<Vec<Vec<f64>>, LinalgError> {
    if p.dim > MAX_VERTEX_DIM {
        return Err(LinalgError::DimensionTooLarge {
            dim: p.dim,
            max: MAX_VERTEX_DIM,
        });
    }
    if p.is_empty()? {
        return Ok(Vec::new());
    }
    if !recession_cone_trivial(p)? {
        return Err(LinalgError::Unbounded);
    }

    let mut eqs: Vec<Row> = p.eq_rows.iter().filter_map(Row::normalized).collect();
    let mut ineqs: Vec<Row> = Vec::new();
    for row in p.ineq_rows.iter().filter_map(Row::normalized) {
        let min = solve_lp(&p.program(row.coeffs.clone()))?
            .optimal_value()
            .ok_or(LinalgError::Numerical(
                "bounded nonempty polytope gave no optimum",
            ))?;
        if min >= row.rhs - feas_tol {
            eqs.push(row);
        } else {
            ineqs.push(row);
        }
    }

    let (origin, basis) = affine_hull(p.dim, &eqs)?;
    let d = basis.ncols();
    if d == 0 {
        return Ok(vec![origin.iter().copied().collect()]);
    }
    // rows in hull coordinates: (B^T a) z <= b - a.origin
    let reduced: Vec<(Vec<f64>, f64)> = ineqs
        .iter()
        .map(|r| {
            let a = DVector::from_column_slice(&r.coeffs);
            let coeffs: Vec<f64> = (basis.transpose() * &a).iter().copied().collect();
            (coeffs, r.rhs - a.dot(&origin))
        })
        .filter(|(c, _)| max_abs(c) > 1e-12)
        .collect();
    let subsets = binomial(reduced.len() as u64, d as u64);
    if subsets > MAX_SUBSETS {
        return Err(LinalgError::DimensionTooLarge {
            dim: reduced.len(),
            max: MAX_SUBSETS as usize,
        });
    }

    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..d).collect();
    if reduced.len() < d {
        return Err(LinalgError::Numerical(
            "bounded polytope with too few facets",
        ));
    }
    loop {
        let m = DMatrix::from_fn(d, d, |i, j| reduced[idx[i]].0[j]);
        let rhs = DVector::from_iterator(d, idx.iter().map(|i| reduced[*i].1));
        let svd = m.clone().svd(false, false);
        let smin = svd.singular_values.min();
        if smin > 1e-10 {
            if let Some(z) = m.lu().solve(&rhs) {
                let y: Vec<f64> = (&origin + &basis * z).iter().copied().collect();
                let tol = feas_tol * max_abs(&y).max(1.0);
                let feasible = ineqs.iter().all(|r| dot(&r.coeffs, &y) - r.rhs <= tol)
                    && eqs
                        .iter()
                        .all(|r| (dot(&r.coeffs, &y) - r.rhs).abs() <= tol);
                if feasible
                    && !vertices
                        .iter()
                        .any(|v| v.iter().zip(&y).all(|(a, b)| (a - b).abs() <= dedup_tol))
                {
                    vertices.push(y);
                }
            }
        }
        if !next_combination(&mut idx, reduced.len()) {
            break;
        }
    }
    vertices.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(vertices)
}

/// Particular solution and orthonormal null-space basis of the equality rows.
fn affine_hull(dim: usize, eqs: &[Row]) -> Result<(DVector<f64>, DMatrix<f64>), LinalgError> {
    if eqs.is_empty() {
        return Ok((DVector::zeros(dim), DMatrix::identity(dim, dim)));
    }
    let k = eqs.len();
    let a = DMatrix::from_fn(k, dim, |i, j| eqs[i].coeffs[j]);
    let b = DVector::from_iterator(k, eqs.iter().map(|r| r.rhs));
    // full SVD of A^T A-sized problem via the padded square matrix
    let n = k.max(dim);
    let mut padded = DMatrix::zeros(n, dim);
    padded.view_mut((0, 0), (k, dim)).copy_from(&a);
    let svd = padded.svd(true, true);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or(LinalgError::Numerical("svd failed"))?;
    let smax = svd.singular_values.max();
    let rank_tol = 1e-10 * smax.max(1.0);
    let origin = svd
        .solve(
            &{
                let mut pb = DVector::zeros(n);
                pb.rows_mut(0, k).copy_from(&b);
                pb
            },
            rank_tol,
        )
        .map_err(|_| LinalgError::Numerical("least-squares solve failed"))?;
    let null: Vec<DVector<f64>> = (0..dim)
        .filter(|i| svd.singular_values[*i] <= rank_tol)
        .map(|i| v_t.row(i).transpose())
        .collect();
    let basis = if null.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        DMatrix::from_columns(&null)
    };
    Ok((origin, basis))
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

//! The two worked counterexamples with scripted end-to-end certifications.

mod example1;
mod example2;

use std::time::Instant;

pub use example1::{
    b_lambda_diagonal, build_example1, indicator, matrix_margin, verify_matrix_property, x_bar,
    Example1, MatrixPropertyReport, A1, A2,
};
pub use example2::{
    build_example2, delta, gamma, halfspace_coefficients, lambda_kn, m_inequality, p_point,
    q_point, r_point, verify_halfspace_representation, verify_m_containment, Example2, Example2Set,
    HalfSpace, HalfspaceReport, Label, MContainmentReport, RowCheck, RowSense,
};

use crate::cones::{critical_cone, ObjectiveCut};
use crate::curvature::{
    check_snc, check_snc_fixed_multiplier, check_ssc, sample_growth, CurvatureOracle, Search,
};
use crate::error::Result;
use crate::io::{BuiltinName, ProblemFile};
use crate::kkt::{check_rzkcq, check_strict_cq, check_weaker_cq, multiplier_set, AchievedCone};
use crate::report::{
    cq_record, feasibility_record, growth_record, verdict_record, CertificationReport, CheckRecord,
    Outcome,
};

pub const EXAMPLE1_ETA: f64 = 0.1;
pub const EXAMPLE1_ALPHA: f64 = 1.0;
pub const EXAMPLE1_GROWTH_ALPHA: f64 = 0.5;
pub const GROWTH_EPS: f64 = 0.05;
pub const EXAMPLE1_GROWTH_SAMPLES: usize = 10_000;
pub const EXAMPLE2_GROWTH_SAMPLES: usize = 2_000;
/// Quadratic-growth level probed on the second example; any positive level fails there.
pub const EXAMPLE2_GROWTH_ALPHA: f64 = 0.1;

/// Multipliers `0, 0.1, ..., 1` used for the fixed-multiplier stage.
pub fn mu_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

fn guarded(name: &str, f: impl FnOnce() -> Result<CheckRecord>) -> CheckRecord {
    f().unwrap_or_else(|e| CheckRecord::error(name, &e))
}

pub fn run_example1_certification(n: usize, search: &Search) -> Result<CertificationReport> {
    let start = Instant::now();
    let ex = build_example1(n)?;
    let (p, x) = (&ex.problem, &ex.x_bar);
    let file = ProblemFile::builtin(BuiltinName::Example1, n);
    let mut report =
        CertificationReport::new(format!("example1(N={n})"), file.digest(), search.seed);

    report.push(guarded("feasibility", || {
        Ok(feasibility_record(p, x)?.expect(Outcome::Holds))
    }));
    report.push(guarded("rzkcq", || {
        Ok(cq_record("rzkcq", check_rzkcq(p, x)?).expect(Outcome::Holds))
    }));
    report.push(guarded("weaker_cq", || {
        Ok(cq_record("weaker_cq", check_weaker_cq(p, x)?))
    }));

    let mset = multiplier_set(p, x)?;
    report.push(guarded("multiplier_set", || {
        let v = mset.vertices()?.to_vec();
        let (lo, hi) = mset.interval().unwrap_or((f64::NAN, f64::NAN));
        Ok(CheckRecord::holds("multiplier_set", !mset.empty)
            .number("lambda_interval", [lo, hi])
            .number("vertices", &v)
            .expect(Outcome::Holds)
            .require(v.len() == 2)
            .expect_close("mu_min", lo, 0.0, 1e-9)
            .expect_close("mu_max", hi, 1.0, 1e-9)
            .hypothesis("rzkcq"))
    }));

    report.push(guarded("ssc", || {
        let v = check_ssc(p, x, &mset, EXAMPLE1_ETA, EXAMPLE1_ALPHA, search)?;
        Ok(verdict_record("ssc", v)
            .number("eta", EXAMPLE1_ETA)
            .number("alpha_target", EXAMPLE1_ALPHA)
            .expect(Outcome::Holds)
            .hypothesis("multiplier set bounded (weaker_cq)"))
    }));
    report.push(guarded("snc", || {
        let v = check_snc(p, x, &mset, search)?;
        Ok(verdict_record("snc", v)
            .expect(Outcome::Holds)
            .hypothesis("box is polyhedric of every order"))
    }));

    let (h1, h2) = (ex.h1(), ex.h2());
    let k0 = critical_cone(p, x, 0.0, ObjectiveCut::Inequality)?;
    let in_k = (
        k0.contains(&h1, p.tol().feasibility)?,
        k0.contains(&h2, p.tol().feasibility)?,
    );
    for mu in mu_grid() {
        let name = format!("snc_fixed_mu[{mu:.1}]");
        report.push(guarded(&name, || {
            let (v, _) = check_snc_fixed_multiplier(p, x, &[mu], search)?;
            let o = CurvatureOracle::fixed(p, x, &[mu]);
            Ok(verdict_record(&name, v)
                .demonstration()
                .number("mu", mu)
                .number("closed_form_min", (1.0 - 3.0 * mu).min(-1.0 + 2.0 * mu))
                .number("l2_at_h1", o.lagrangian_quad(&[mu], h1.entries()))
                .number("l2_at_h2", o.lagrangian_quad(&[mu], h2.entries()))
                .number("h1_in_critical_cone", in_k.0)
                .number("h2_in_critical_cone", in_k.1)
                .expect(Outcome::Violated))
        }));
    }

    report.push(guarded("growth", || {
        let v = sample_growth(
            p,
            x,
            EXAMPLE1_GROWTH_ALPHA,
            GROWTH_EPS,
            EXAMPLE1_GROWTH_SAMPLES,
            search.seed,
        )?;
        Ok(growth_record("growth", v, EXAMPLE1_GROWTH_ALPHA, GROWTH_EPS).expect(Outcome::Holds))
    }));
    report.push(guarded("matrix_property", || {
        let m = verify_matrix_property(10_000, 1e-3, search.seed, 1e-9);
        Ok(CheckRecord::holds("matrix_property", m.passed)
            .demonstration()
            .number("min_margin", m.min_margin)
            .number("grid_points", m.grid_points)
            .number("random_samples", m.random_samples)
            .expect(Outcome::Holds))
    }));

    report.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

pub fn run_example2_certification(n: usize, search: &Search) -> Result<CertificationReport> {
    let start = Instant::now();
    let ex = build_example2(n)?;
    let (p, x) = (&ex.problem, &ex.x_bar);
    let file = ProblemFile::builtin(BuiltinName::Example2, n);
    let mut report =
        CertificationReport::new(format!("example2(N={n})"), file.digest(), search.seed);
    let d = ex.set.delta;

    report.push(guarded("feasibility", || {
        Ok(feasibility_record(p, x)?.expect(Outcome::Holds))
    }));
    report.push(guarded("growth", || {
        let v = sample_growth(p, x, 0.0, GROWTH_EPS, EXAMPLE2_GROWTH_SAMPLES, search.seed)?;
        Ok(growth_record("growth", v, 0.0, GROWTH_EPS).expect(Outcome::Holds))
    }));
    report.push(guarded("growth_positive_alpha", || {
        let v = sample_growth(p, x, EXAMPLE2_GROWTH_ALPHA, GROWTH_EPS, EXAMPLE2_GROWTH_SAMPLES, search.seed)?;
        Ok(growth_record("growth_positive_alpha", v, EXAMPLE2_GROWTH_ALPHA, GROWTH_EPS)
            .demonstration()
            .note("the objective vanishes at the boundary points R(n,n), so no positive growth level holds"))
    }));
    report.push(guarded("rzkcq", || {
        Ok(cq_record("rzkcq", check_rzkcq(p, x)?).expect(Outcome::Holds))
    }));
    report.push(guarded("weaker_cq", || {
        Ok(cq_record("weaker_cq", check_weaker_cq(p, x)?))
    }));

    let mset = multiplier_set(p, x)?;
    report.push(guarded("multiplier_set", || {
        let v = mset.vertices()?.to_vec();
        let mu = v.first().map_or(f64::NAN, |m| m[0]);
        let lambda = mset.lambda(&[mu]).into_entries();
        let lambda_err = lambda
            .iter()
            .zip([0.0, 0.0, 1.0])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Ok(CheckRecord::holds("multiplier_set", !mset.empty)
            .number("vertices", &v)
            .number("lambda", &lambda)
            .expect(Outcome::Holds)
            .require(v.len() == 1)
            .expect_close("mu", mu, 0.0, 1e-10)
            .expect_close("lambda_error", lambda_err, 0.0, 1e-10)
            .hypothesis("rzkcq"))
    }));

    report.push(guarded("q_limit_direction", || {
        let h = vec![0.0, 1.0, 0.0];
        let o = CurvatureOracle::new(p, x, &mset)?;
        let q = o.q(&h).value;
        let k0 = critical_cone(p, x, 0.0, ObjectiveCut::Inequality)?;
        let hv = p.point(h)?;
        let in_k = k0.contains(&hv, p.tol().feasibility)?;
        Ok(
            CheckRecord::holds("q_limit_direction", q >= -p.tol().violation)
                .demonstration()
                .number("h", [0.0, 1.0, 0.0])
                .number("in_critical_cone", in_k)
                .expect(Outcome::Violated)
                .require(in_k)
                .expect_close("q", q, -2.0 * d, 1e-9),
        )
    }));
    report.push(guarded("snc", || {
        let v = check_snc(p, x, &mset, search)?;
        Ok(verdict_record("snc", v)
            .expect(Outcome::Violated)
            .hypothesis("set is polyhedric but not 2-polyhedric at the base point"))
    }));
    report.push(guarded("strict_cq", || {
        let mult = mset.multipliers(&mset.center()?);
        let s = check_strict_cq(p, x, &mult)?;
        Ok(CheckRecord::holds("strict_cq", s.holds)
            .number("achieved_cone", &s.cone)
            .number("mu", &s.mu)
            .expect(Outcome::Violated)
            .require(s.cone == AchievedCone::NonPositive))
    }));
    report.push(guarded("halfspaces", || {
        let r = verify_halfspace_representation(&ex.set, n.saturating_sub(2), 1e-10);
        let failures: Vec<String> = r.failures().map(|f| f.name.clone()).collect();
        Ok(CheckRecord::holds("halfspaces", r.passed)
            .demonstration()
            .number("rows", r.rows.len())
            .number("failures", failures)
            .expect(Outcome::Holds))
    }));
    report.push(guarded("m_containment", || {
        let r = verify_m_containment(30, 30, 1e-10);
        Ok(CheckRecord::holds("m_containment", r.passed)
            .demonstration()
            .number("max_excess", r.max_excess)
            .number("max_diagonal_gap", r.max_diagonal_gap)
            .number("offending", &r.offending)
            .expect(Outcome::Holds))
    }));

    report.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

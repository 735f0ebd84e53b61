//! Acceptance criteria, one PASS/FAIL line each. Tolerances are pinned here.
//!
//! Criteria listed in `EXPECTED_FAILURES` fail for reasons documented in the
//! README; the process exits nonzero on any other failure, or if one of those
//! starts passing.

#[path = "common/mod.rs"]
mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use kkt2_core::cones::{Sign, SignPatternCone};
use kkt2_core::counterexamples::{
    build_example1, build_example2, mu_grid, run_example1_certification,
    verify_halfspace_representation, verify_m_containment, verify_matrix_property, A1, A2,
};
use kkt2_core::curvature::{
    check_snc, check_snc_fixed_multiplier, check_ssc, replay_witness, CurvatureOracle, Search,
};
use kkt2_core::kkt::{check_rzkcq, check_strict_cq, multiplier_set, AchievedCone};
use kkt2_core::linalg::{enumerate_vertices, solve_lp, PolytopeH, Row};
use kkt2_core::model::validate_derivatives;
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;
const EXPECTED_FAILURES: &[u32] = &[2];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

/// Independent closed forms for the second example.
fn gamma() -> f64 {
    (1.0 + 3f64.sqrt()) / 2.0
}

fn delta() -> f64 {
    let g = gamma();
    (g.powi(3) + 1.0) / (g * (g + 1.0).powi(2))
}

fn criterion_1() -> Outcome {
    let (report, elapsed) = timed(|| run_example1_certification(120, &Search::default()));
    let report = match report {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("error: {e}")),
    };
    let Some(rec) = report.check("multiplier_set") else {
        return outcome(false, "no multiplier_set record");
    };
    let vertices: Vec<Vec<f64>> =
        serde_json::from_value(rec.numbers["vertices"].clone()).unwrap_or_default();
    let mut vs: Vec<f64> = vertices.iter().map(|v| v[0]).collect();
    vs.sort_by(f64::total_cmp);
    let exact = vs.len() == 2 && vs[0].abs() <= 1e-9 && (vs[1] - 1.0).abs() <= 1e-9;
    let fast = elapsed < Duration::from_secs(1);
    outcome(
        exact && fast,
        format!(
            "vertices {vs:?}, full repro {:.0} ms (< 1000)",
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

fn criterion_2() -> Outcome {
    let ex = build_example1(120).unwrap();
    let (p, x) = (&ex.problem, &ex.x_bar);
    let mut bad = Vec::new();
    for mu in mu_grid() {
        let closed = (1.0 - 3.0 * mu).min(-1.0 + 2.0 * mu);
        let verdict = match check_snc_fixed_multiplier(p, x, &[mu], &Search::default()) {
            Ok((v, _)) => v,
            Err(e) => return outcome(false, format!("mu={mu}: {e}")),
        };
        let o = CurvatureOracle::fixed(p, x, &[mu]);
        let value = o
            .lagrangian_quad(&[mu], ex.h1().entries())
            .min(o.lagrangian_quad(&[mu], ex.h2().entries()));
        if !verdict.violated() || (value - closed).abs() > 1e-9 {
            bad.push(format!(
                "mu={mu:.1}: violated={} value={value:.6} closed={closed:.6}",
                verdict.violated()
            ));
        }
    }
    let detail = if bad.is_empty() {
        "all 11 multipliers violated with the closed-form value".to_string()
    } else {
        format!(
            "{} of 11 mismatched; first {}; last {}",
            bad.len(),
            bad[0],
            bad[bad.len() - 1]
        )
    };
    outcome(bad.is_empty(), detail)
}

fn criterion_3() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for n in [12, 60, 120] {
        let ex = build_example1(n).unwrap();
        let (p, x) = (&ex.problem, &ex.x_bar);
        let (v, elapsed) = timed(|| {
            let mset = multiplier_set(p, x)?;
            check_ssc(p, x, &mset, 0.1, 1.0, &Search::default())
        });
        let v = match v {
            Ok(v) => v,
            Err(e) => return outcome(false, format!("N={n}: {e}")),
        };
        let min = v.min_value.unwrap_or(f64::NEG_INFINITY);
        let ok = min >= 1.0 - 1e-6
            && v.stats.evaluated >= 576
            && (n != 120 || elapsed < Duration::from_secs(10));
        pass &= ok;
        parts.push(format!(
            "N={n}: min {min:.9} over {} dirs in {:.0} ms",
            v.stats.evaluated,
            elapsed.as_secs_f64() * 1e3
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_4() -> Outcome {
    let target = -2.0 * delta();
    let mut parts = Vec::new();
    let mut pass = (target + 0.92820).abs() <= 1e-5;
    for n in [2, 5, 10] {
        let ex = build_example2(n).unwrap();
        let mset = multiplier_set(&ex.problem, &ex.x_bar).unwrap();
        let q = CurvatureOracle::new(&ex.problem, &ex.x_bar, &mset)
            .unwrap()
            .q(&[0.0, 1.0, 0.0])
            .value;
        pass &= (q - target).abs() <= 1e-5;
        parts.push(format!("N={n}: {q:.9}"));
    }
    outcome(pass, format!("-2δ = {target:.9}; {}", parts.join(", ")))
}

fn criterion_5() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [2, 5, 8, 10] {
        let ex = build_example2(n).unwrap();
        let (p, x) = (&ex.problem, &ex.x_bar);
        let mset = multiplier_set(p, x).unwrap();
        let Ok(v) = mset.vertices() else {
            return outcome(false, format!("N={n}: no vertices"));
        };
        let single = v.len() == 1 && v[0][0].abs() <= 1e-10;
        let lambda = mset.lambda(&v[0]);
        let lam_ok = lambda
            .entries()
            .iter()
            .zip([0.0, 0.0, 1.0])
            .all(|(a, b)| (a - b).abs() <= 1e-10);
        let strict = check_strict_cq(p, x, &mset.multipliers(&v[0])).unwrap();
        let cone_ok = !strict.holds && strict.cone == AchievedCone::NonPositive;
        pass &= single && lam_ok && cone_ok;
        parts.push(format!("N={n}: mu={:?} cone={:?}", v, strict.cone));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_6() -> Outcome {
    let ex = build_example2(12).unwrap();
    let r = verify_halfspace_representation(&ex.set, 10, 1e-10);
    let failed: Vec<&str> = r.failures().map(|f| f.name.as_str()).collect();
    outcome(
        r.passed,
        format!("{} rows checked, failures {failed:?}", r.rows.len()),
    )
}

fn criterion_7() -> Outcome {
    let r = verify_m_containment(30, 30, 1e-10);
    // independent evaluation of the points and the set
    let (g, d) = (gamma(), delta());
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut diag: f64 = 0.0;
    for k in 1..=30 {
        for n in 1..=30 {
            let (kf, nf) = (k as f64, n as f64);
            let lam = 1.0 / (1.0 + (nf / (kf * g)).powi(3));
            let x2 = lam / (kf * kf) + (1.0 - lam) * (g / nf).powi(2);
            let x3 = -lam / kf.powi(4);
            let excess = x3 + d * x2 * x2;
            worst = worst.max(excess);
            if k == n {
                diag = diag.max(excess.abs());
            }
        }
    }
    let pass = r.passed && r.max_diagonal_gap <= 1e-10 && worst <= 1e-10 && diag <= 1e-10;
    outcome(
        pass,
        format!(
            "library excess {:.2e} diag {:.2e}; direct excess {worst:.2e} diag {diag:.2e}",
            r.max_excess, r.max_diagonal_gap
        ),
    )
}

fn criterion_8() -> Outcome {
    let r = verify_matrix_property(10_000, 1e-3, SEED, 1e-9);
    let quad = |a: &[[f64; 2]; 2], x: [f64; 2]| {
        a[0][0] * x[0] * x[0] + 2.0 * a[0][1] * x[0] * x[1] + a[1][1] * x[1] * x[1]
    };
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut direct = f64::INFINITY;
    for _ in 0..10_000 {
        let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        let n2 = x[0] * x[0] + x[1] * x[1];
        if n2 > 0.0 {
            direct = direct.min((quad(&A1, x).max(quad(&A2, x)) - 0.5 * n2) / n2);
        }
    }
    let diag_negative = r.non_coercive.iter().all(|(l, idx)| {
        let d = [-2.0 + 3.0 * l, 1.0 - 2.0 * l];
        idx.is_some() && d.iter().any(|v| *v < 0.0)
    });
    let pass = r.passed
        && r.min_margin >= -1e-9
        && direct >= -1e-9
        && diag_negative
        && !r.non_coercive.is_empty();
    outcome(
        pass,
        format!(
            "{} grid + {} samples, min margin {:.3e} (direct {:.3e}); {} B_λ checked",
            r.grid_points,
            r.random_samples,
            r.min_margin,
            direct,
            r.non_coercive.len()
        ),
    )
}

fn runner() -> TestRunner {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&SEED.to_le_bytes());
    TestRunner::new_with_rng(
        Config::default(),
        TestRng::from_seed(RngAlgorithm::ChaCha, &seed),
    )
}

fn random_problems(count: usize) -> Vec<common::Raw> {
    let mut r = runner();
    let strategy = common::raw_problem();
    (0..count)
        .map(|_| strategy.new_tree(&mut r).unwrap().current())
        .collect()
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut failures = Vec::new();

    let signs = [Sign::NonNeg, Sign::NonPos, Sign::Zero, Sign::Free];
    let bipolar = (0..100).all(|_| {
        let len = rng.random_range(1..20);
        let p = SignPatternCone::new((0..len).map(|_| signs[rng.random_range(0..4)]).collect());
        p.polar().polar() == p
    });
    if !bipolar {
        failures.push("bipolar");
    }

    let mut lp_ok = true;
    for _ in 0..50 {
        let dim = rng.random_range(1..=5);
        let mut p = PolytopeH::boxed(&vec![-1.0; dim], &vec![1.0; dim]);
        for _ in 0..rng.random_range(1..=6) {
            let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            p.ineq_rows.push(Row::new(a, rng.random_range(0.05..1.0)));
        }
        let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let by_vertex = enumerate_vertices(&p, 1e-9, 1e-8).map(|vs| {
            vs.iter()
                .map(|v| common::dot(&c, v))
                .fold(f64::INFINITY, f64::min)
        });
        let by_lp = solve_lp(&p.program(c.clone()))
            .ok()
            .and_then(|o| o.optimal_value());
        lp_ok &= matches!((by_vertex, by_lp), (Ok(a), Some(b)) if (a - b).abs() <= 1e-8);
    }
    if !lp_ok {
        failures.push("lp-vs-vertex");
    }

    let mut q_ok = true;
    let mut replay_ok = true;
    let mut pairs = 0;
    for raw in random_problems(1000) {
        if pairs == 200 {
            break;
        }
        let (p, x) = raw.build();
        let Ok(mset) = multiplier_set(&p, &x) else {
            q_ok = false;
            continue;
        };
        if !mset.bounded {
            continue;
        }
        pairs += 1;
        let o = CurvatureOracle::new(&p, &x, &mset).unwrap();
        let q = o.q(&raw.h).value;
        let q2 = o
            .q(&raw.h.iter().map(|v| 2.0 * v).collect::<Vec<_>>())
            .value;
        let by_vertex = o
            .vertices()
            .iter()
            .map(|mu| o.lagrangian_quad(mu, &raw.h))
            .fold(f64::NEG_INFINITY, f64::max);
        let lp = o.q_lp(&raw.h).map(|v| v.value).unwrap_or(f64::NAN);
        q_ok &= (q2 - 4.0 * q).abs() <= 1e-9 * (1.0 + q2.abs())
            && (lp - by_vertex).abs() <= 1e-8 * (1.0 + by_vertex.abs());

        if pairs <= 40 {
            let s = Search {
                seed: SEED,
                ..Search::default()
            };
            let a = check_snc(&p, &x, &mset, &s).unwrap();
            let b = check_snc(&p, &x, &mset, &s).unwrap();
            replay_ok &= a == b;
            if a.violated() {
                replay_ok &= replay_witness(&p, &x, &a).is_ok_and(|r| r.ok());
            }
        }
    }
    if !q_ok {
        failures.push("q-homogeneity/vertex-attainment");
    }
    if !replay_ok {
        failures.push("witness-replay");
    }

    let builtins_ok = [12, 24, 60].iter().all(|&n| {
        let ex = build_example1(n).unwrap();
        validate_derivatives(&ex.problem, &ex.x_bar).is_ok_and(|r| r.passed())
    }) && [2, 5, 10].iter().all(|&n| {
        let ex = build_example2(n).unwrap();
        validate_derivatives(&ex.problem, &ex.x_bar).is_ok_and(|r| r.passed())
    });
    if !builtins_ok {
        failures.push("builtin-derivatives");
    }

    outcome(
        failures.is_empty(),
        format!("100 patterns, 50 polytopes, {pairs} bounded (problem, direction) pairs; failures {failures:?}"),
    )
}

fn criterion_10() -> Outcome {
    let mut counterexamples = 0;
    let (mut rz, mut strict) = (0, 0);
    for raw in random_problems(50) {
        let (p, x) = raw.build();
        let Ok(mset) = multiplier_set(&p, &x) else {
            counterexamples += 1;
            continue;
        };
        if check_rzkcq(&p, &x).is_ok_and(|v| v.holds()) {
            rz += 1;
            if !mset.bounded {
                counterexamples += 1;
            }
        }
        if mset.bounded {
            let mult = mset.multipliers(&mset.center().unwrap());
            if check_strict_cq(&p, &x, &mult).is_ok_and(|s| s.holds) {
                strict += 1;
                if mset.vertices().map_or(true, |v| v.len() != 1) {
                    counterexamples += 1;
                }
            }
        }
    }
    outcome(
        counterexamples == 0,
        format!("50 problems, rzkcq held on {rz}, strict on {strict}, counterexamples {counterexamples}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut unexpected = 0;
    for (id, f) in criteria {
        let o = f();
        let expected_fail = EXPECTED_FAILURES.contains(&id);
        let tag = match (o.pass, expected_fail) {
            (true, false) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
            (true, true) => "PASS (unexpected)",
        };
        if o.pass == expected_fail {
            unexpected += 1;
        }
        println!("criterion {id:>2}: {tag} - {}", o.detail);
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

use std::fs;
use std::path::Path;
use std::time::Instant;

use kkt2_core::counterexamples::{run_example1_certification, run_example2_certification};
use kkt2_core::curvature::{
    check_snc, check_ssc, replay_witness, sample_growth, Search, DEFAULT_SEED,
};
use kkt2_core::io::{parse_point, parse_problem, FileError, LoadedProblem, PointFile, ProblemFile};
use kkt2_core::kkt::{
    check_rzkcq, check_strict_cq, check_weaker_cq, foc_residual, FocVerdict, MultiplierSet,
};
use kkt2_core::linalg::WeightedVector;
use kkt2_core::model::{check_feasible, validate_derivatives, ProblemSpec};
use kkt2_core::report::{
    cq_record, feasibility_record, growth_record, verdict_record, CertificationReport, CheckRecord,
    Outcome, Witness,
};

use crate::{Cli, Command, Repro, Target};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    File { path: String, source: FileError },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Numeric(#[from] kkt2_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::File { .. } | CliError::Io { .. } => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn file_err(path: &Path) -> impl Fn(FileError) -> CliError + '_ {
    move |source| CliError::File {
        path: path.display().to_string(),
        source,
    }
}

/// A problem and the point under certification.
struct Session {
    file: ProblemFile,
    loaded: LoadedProblem,
    x: WeightedVector,
    point: Option<PointFile>,
    search: Search,
}

impl Session {
    fn open(cli: &Cli, target: &Target) -> Result<Self> {
        let file = parse_problem(&read(&target.file)?).map_err(file_err(&target.file))?;
        let loaded = file.load().map_err(file_err(&target.file))?;
        let point = match &target.at {
            Some(path) => Some(parse_point(&read(path)?).map_err(file_err(path))?),
            None => None,
        };
        let x = match (&point, &loaded.base_point) {
            (Some(pt), _) => {
                let n = loaded.spec.dim();
                if pt.x.len() != n {
                    return Err(CliError::Usage(format!(
                        "point has {} entries, problem dimension is {n}",
                        pt.x.len()
                    )));
                }
                if pt.mu.as_ref().is_some_and(|mu| mu.len() != loaded.spec.m()) {
                    return Err(CliError::Usage(format!(
                        "mu must have {} entries",
                        loaded.spec.m()
                    )));
                }
                loaded.spec.point(pt.x.clone())?
            }
            (None, Some(base)) => base.clone(),
            (None, None) => return Err(CliError::Usage("--at <point-file> is required".into())),
        };
        let search = Search {
            budget: file.search.unwrap_or_default(),
            seed: cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        };
        Ok(Session {
            file,
            loaded,
            x,
            point,
            search,
        })
    }

    fn p(&self) -> &ProblemSpec {
        &self.loaded.spec
    }

    fn report(&self) -> CertificationReport {
        CertificationReport::new(
            self.loaded.name.clone(),
            self.file.digest(),
            self.search.seed,
        )
    }

    /// Pushes the feasibility record; `false` when the point is infeasible.
    fn feasibility(&self, report: &mut CertificationReport) -> Result<bool> {
        let r = feasibility_record(self.p(), &self.x)?;
        let ok = r.outcome == Outcome::Holds;
        report.push(r);
        Ok(ok)
    }

    /// Pushes the stationarity record and returns the multiplier set when nonempty.
    fn stationarity(&self, report: &mut CertificationReport) -> Result<Option<MultiplierSet>> {
        match foc_residual(self.p(), &self.x)? {
            FocVerdict::Stationary(mset) => {
                let mut r = CheckRecord::holds("foc", true).number("bounded", mset.bounded);
                if let Some(v) = &mset.vertices {
                    r = r.number("vertices", v);
                }
                report.push(r);
                Ok(Some(*mset))
            }
            FocVerdict::NotStationary { residual, mu } => {
                report.push(
                    CheckRecord::holds("foc", false)
                        .number("residual", residual)
                        .witness(Witness::Residual { mu, residual }),
                );
                Ok(None)
            }
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--{name} must be positive and finite, got {v}"
        )))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--{name} must be nonnegative and finite, got {v}"
        )))
    }
}

pub fn run(cli: &Cli) -> Result<CertificationReport> {
    if let Command::Repro { which } = &cli.command {
        let search = Search {
            seed: cli.seed.unwrap_or(DEFAULT_SEED),
            ..Search::default()
        };
        return Ok(match *which {
            Repro::Example1 { grid } => run_example1_certification(grid, &search),
            Repro::Example2 { trunc } => run_example2_certification(trunc, &search),
        }
        .map_err(|e| CliError::Usage(e.to_string()))?);
    }

    let start = Instant::now();
    let target = match &cli.command {
        Command::CheckFoc(t)
        | Command::Multipliers(t)
        | Command::CheckSnc(t)
        | Command::ValidateDerivatives(t) => t,
        Command::CheckCq { target, .. }
        | Command::CheckSsc { target, .. }
        | Command::Growth { target, .. }
        | Command::Replay { target, .. } => target,
        Command::Repro { .. } => unreachable!(),
    };
    match &cli.command {
        Command::CheckSsc { eta, alpha, .. } => {
            nonnegative("eta", *eta)?;
            positive("alpha", *alpha)?;
        }
        Command::Growth {
            alpha,
            eps,
            samples,
            ..
        } => {
            nonnegative("alpha", *alpha)?;
            positive("eps", *eps)?;
            if *samples == 0 {
                return Err(CliError::Usage("--samples must be positive".into()));
            }
        }
        _ => {}
    }
    let s = Session::open(cli, target)?;
    let mut report = s.report();
    if s.feasibility(&mut report)? {
        dispatch(cli, &s, &mut report)?;
    }
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

fn guarded(report: &mut CertificationReport, name: &str, r: kkt2_core::Result<CheckRecord>) {
    report.push(r.unwrap_or_else(|e| CheckRecord::error(name, &e)));
}

fn dispatch(cli: &Cli, s: &Session, report: &mut CertificationReport) -> Result<()> {
    let (p, x) = (s.p(), &s.x);
    match &cli.command {
        Command::CheckFoc(_) => {
            s.stationarity(report)?;
        }
        Command::CheckCq {
            rzkcq,
            weaker,
            strict,
            ..
        } => {
            let all = !(*rzkcq || *weaker || *strict);
            if all || *rzkcq {
                guarded(
                    report,
                    "rzkcq",
                    check_rzkcq(p, x).map(|v| cq_record("rzkcq", v)),
                );
            }
            if all || *weaker {
                guarded(
                    report,
                    "weaker_cq",
                    check_weaker_cq(p, x).map(|v| cq_record("weaker_cq", v)),
                );
            }
            if all || *strict {
                strict_cq(s, report)?;
            }
        }
        Command::Multipliers(_) => {
            if let Some(mset) = s.stationarity(report)? {
                let mut r = CheckRecord::holds("multiplier_set", true)
                    .number("bounded", mset.bounded)
                    .number("vertices", &mset.vertices);
                if let Some((lo, hi)) = mset.interval() {
                    r = r.number("lambda_interval", [lo, hi]);
                }
                if let Some(d) = &mset.recession {
                    r = r.number("recession", d);
                }
                report.push(r);
            }
        }
        Command::CheckSnc(_) => {
            if let Some(mset) = s.stationarity(report)? {
                guarded(
                    report,
                    "snc",
                    check_snc(p, x, &mset, &s.search).map(|v| verdict_record("snc", v)),
                );
            }
        }
        Command::CheckSsc { eta, alpha, .. } => {
            if let Some(mset) = s.stationarity(report)? {
                guarded(
                    report,
                    "ssc",
                    check_ssc(p, x, &mset, *eta, *alpha, &s.search).map(|v| {
                        verdict_record("ssc", v)
                            .number("eta", *eta)
                            .number("alpha_target", *alpha)
                    }),
                );
            }
        }
        Command::Growth {
            alpha,
            eps,
            samples,
            ..
        } => {
            guarded(
                report,
                "growth",
                sample_growth(p, x, *alpha, *eps, *samples, s.search.seed)
                    .map(|v| growth_record("growth", v, *alpha, *eps)),
            );
        }
        Command::ValidateDerivatives(_) => {
            guarded(
                report,
                "derivatives",
                validate_derivatives(p, x).map(|d| {
                    CheckRecord::holds("derivatives", d.passed())
                        .number("gradient_step", d.gradient_step)
                        .number("hessian_step", d.hessian_step)
                        .number("checks", &d.checks)
                }),
            );
        }
        Command::Replay { report: path, .. } => replay(s, path, report)?,
        Command::Repro { .. } => unreachable!(),
    }
    Ok(())
}

fn strict_cq(s: &Session, report: &mut CertificationReport) -> Result<()> {
    let (p, x) = (s.p(), &s.x);
    let mset = kkt2_core::kkt::multiplier_set(p, x)?;
    if mset.empty {
        report.push(CheckRecord::holds("strict_cq", false).note("the point is not stationary"));
        return Ok(());
    }
    let mu = match s.point.as_ref().and_then(|pt| pt.mu.clone()) {
        Some(mu) => mu,
        None => mset.center()?,
    };
    let mult = mset.multipliers(&mu);
    guarded(
        report,
        "strict_cq",
        check_strict_cq(p, x, &mult).map(|r| {
            CheckRecord::holds("strict_cq", r.holds)
                .number("achieved_cone", &r.cone)
                .number("mu", &r.mu)
        }),
    );
    Ok(())
}

/// Relative agreement used when re-evaluating recorded numbers.
const REPLAY_TOL: f64 = 1e-9;

fn replay(s: &Session, path: &Path, report: &mut CertificationReport) -> Result<()> {
    let text = read(path)?;
    let recorded = CertificationReport::from_json(&text).map_err(|e| CliError::File {
        path: path.display().to_string(),
        source: e.into(),
    })?;
    let (p, x) = (s.p(), &s.x);
    report.push(
        CheckRecord::holds("digest", recorded.problem_digest == report.problem_digest)
            .number("recorded", &recorded.problem_digest),
    );
    for c in &recorded.checks {
        let name = format!("replay:{}", c.name);
        match &c.witness {
            Some(Witness::Direction { verdict }) if verdict.witness.is_some() => {
                guarded(
                    report,
                    &name,
                    replay_witness(p, x, verdict).map(|r| {
                        CheckRecord::holds(&name, r.ok())
                            .number("in_cone", r.in_cone)
                            .number("value", r.value)
                            .number("value_matches", r.value_matches)
                            .number("verdict_matches", r.verdict_matches)
                    }),
                );
            }
            Some(Witness::Point {
                point,
                value,
                bound,
            }) => {
                let alpha = c.numbers.get("alpha").and_then(|v| v.as_f64());
                guarded(
                    report,
                    &name,
                    replay_point(&name, p, x, point, *value, *bound, alpha),
                );
            }
            _ => {}
        }
    }
    Ok(())
}

fn replay_point(
    name: &str,
    p: &ProblemSpec,
    x: &WeightedVector,
    point: &[f64],
    value: f64,
    bound: f64,
    alpha: Option<f64>,
) -> kkt2_core::Result<CheckRecord> {
    let y = p.point(point.to_vec())?;
    let feasible = check_feasible(p, &y)?.active_set().is_some();
    let f = p.objective().value(&y);
    let close = |a: f64, b: f64| (a - b).abs() <= REPLAY_TOL * (1.0 + a.abs().max(b.abs()));
    let expected_bound = alpha.map(|a| p.objective().value(x) + 0.5 * a * y.sub(x).norm_sq());
    let ok =
        feasible && close(f, value) && f < bound && expected_bound.is_none_or(|b| close(b, bound));
    Ok(CheckRecord::holds(name, ok)
        .number("feasible", feasible)
        .number("value", f)
        .number("bound", expected_bound.unwrap_or(bound)))
}

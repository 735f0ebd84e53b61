//! Certification reports: one record per check, serialized as versioned JSON
//! or aligned text.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::curvature::{GrowthVerdict, SecondOrderVerdict};
use crate::kkt::CqVerdict;
use crate::linalg::WeightedVector;
use crate::model::{check_feasible, Feasibility, ProblemSpec};

pub const SCHEMA: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Holds,
    Violated,
    Error,
}

/// Data sufficient to re-verify a verdict without rerunning the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Witness {
    /// A unit direction with its second-order verdict.
    Direction { verdict: SecondOrderVerdict },
    /// A feasible point breaking quadratic growth.
    Point {
        point: Vec<f64>,
        value: f64,
        bound: f64,
    },
    /// Best multiplier candidate when stationarity fails.
    Residual { mu: Vec<f64>, residual: f64 },
    /// A nonzero element of the polar of the achieved cone.
    Ray { ray: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRecord {
    pub name: String,
    pub outcome: Outcome,
    /// Whether a violation of this check is a violation at the given point (as
    /// opposed to a demonstration whose violation is the point of the stage).
    pub condition: bool,
    /// Expected outcome for scripted reproductions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Outcome>,
    /// Whether the observed numbers match the scripted expectation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matches: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default)]
    pub numbers: BTreeMap<String, Value>,
    #[serde(default)]
    pub hypotheses: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, outcome: Outcome) -> Self {
        CheckRecord {
            name: name.into(),
            outcome,
            condition: true,
            expected: None,
            matches: None,
            witness: None,
            numbers: BTreeMap::new(),
            hypotheses: Vec::new(),
            note: None,
        }
    }

    pub fn holds(name: impl Into<String>, holds: bool) -> Self {
        Self::new(
            name,
            if holds {
                Outcome::Holds
            } else {
                Outcome::Violated
            },
        )
    }

    pub fn error(name: impl Into<String>, err: &crate::Error) -> Self {
        let mut r = Self::new(name, Outcome::Error);
        r.note = Some(err.to_string());
        r
    }

    pub fn demonstration(mut self) -> Self {
        self.condition = false;
        self
    }

    /// Sets the expected outcome; `matches` is the outcome comparison unless already refuted.
    pub fn expect(mut self, expected: Outcome) -> Self {
        self.expected = Some(expected);
        let ok = self.outcome == expected;
        self.matches = Some(self.matches.unwrap_or(true) && ok);
        self
    }

    /// Adds a numeric expectation; a miss makes the record a mismatch.
    pub fn expect_close(mut self, key: &str, value: f64, target: f64, tol: f64) -> Self {
        let ok = (value - target).abs() <= tol;
        self = self
            .number(key, value)
            .number(&format!("{key}_expected"), target);
        self.matches = Some(self.matches.unwrap_or(true) && ok);
        self
    }

    pub fn require(mut self, ok: bool) -> Self {
        self.matches = Some(self.matches.unwrap_or(true) && ok);
        self
    }

    pub fn number(mut self, key: &str, value: impl Serialize) -> Self {
        self.numbers.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
        self
    }

    pub fn witness(mut self, w: Witness) -> Self {
        self.witness = Some(w);
        self
    }

    pub fn hypothesis(mut self, h: impl Into<String>) -> Self {
        self.hypotheses.push(h.into());
        self
    }

    pub fn note(mut self, n: impl Into<String>) -> Self {
        self.note = Some(n.into());
        self
    }

    pub fn failed(&self) -> bool {
        self.matches == Some(false) || (self.condition && self.outcome == Outcome::Violated)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificationReport {
    pub schema: u32,
    pub tool_version: String,
    pub problem: String,
    pub problem_digest: String,
    pub seed: u64,
    /// Excluded from determinism comparisons.
    pub wall_time_ms: f64,
    pub checks: Vec<CheckRecord>,
}

impl CertificationReport {
    pub fn new(problem: impl Into<String>, problem_digest: String, seed: u64) -> Self {
        CertificationReport {
            schema: SCHEMA,
            tool_version: TOOL_VERSION.to_string(),
            problem: problem.into(),
            problem_digest,
            seed,
            wall_time_ms: 0.0,
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, r: CheckRecord) {
        self.checks.push(r);
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn has_error(&self) -> bool {
        self.checks.iter().any(|c| c.outcome == Outcome::Error)
    }

    /// All records hold or match their expectations.
    pub fn passed(&self) -> bool {
        !self.has_error() && !self.checks.iter().any(CheckRecord::failed)
    }

    /// 0 all checks pass, 1 a check is violated or mismatched, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        if self.has_error() {
            3
        } else if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        let r: CertificationReport = serde_json::from_str(s)?;
        if r.schema != SCHEMA {
            return Err(serde::de::Error::custom(format!(
                "unsupported schema {}",
                r.schema
            )));
        }
        Ok(r)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "problem  {}  sha256 {}",
            self.problem, &self.problem_digest
        );
        let _ = writeln!(out, "seed     {}", self.seed);
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let status = match (c.outcome, c.matches) {
                (Outcome::Error, _) => "ERROR",
                (_, Some(false)) => "MISMATCH",
                (Outcome::Holds, _) => "holds",
                (Outcome::Violated, _) if !c.condition => "violated (expected)",
                (Outcome::Violated, _) => "VIOLATED",
            };
            let _ = writeln!(out, "{:<width$}  {}", c.name, status);
            for (k, v) in &c.numbers {
                let _ = writeln!(out, "{:<width$}    {k} = {}", "", compact(v));
            }
            if let Some(w) = &c.witness {
                let _ = writeln!(out, "{:<width$}    witness: {}", "", witness_summary(w));
            }
            if !c.hypotheses.is_empty() {
                let _ = writeln!(
                    out,
                    "{:<width$}    assumes: {}",
                    "",
                    c.hypotheses.join(", ")
                );
            }
            if let Some(n) = &c.note {
                let _ = writeln!(out, "{:<width$}    note: {n}", "");
            }
        }
        let _ = writeln!(
            out,
            "result   {}",
            if self.passed() { "pass" } else { "fail" }
        );
        out
    }
}

fn compact(v: &Value) -> String {
    let s = v.to_string();
    if s.chars().count() > 120 {
        format!("{}...", s.chars().take(117).collect::<String>())
    } else {
        s
    }
}

fn witness_summary(w: &Witness) -> String {
    let head = |v: &[f64]| -> String {
        let shown: Vec<String> = v.iter().take(8).map(|x| format!("{x:.6}")).collect();
        let tail = if v.len() > 8 { ", ..." } else { "" };
        format!("({}{tail})", shown.join(", "))
    };
    match w {
        Witness::Direction { verdict } => match (&verdict.witness, verdict.min_value) {
            (Some(h), Some(v)) => format!("h = {} with q(h)/|h|^2 = {v:.9}", head(h)),
            _ => "none".into(),
        },
        Witness::Point {
            point,
            value,
            bound,
        } => {
            format!("x = {} with f = {value:.12} < {bound:.12}", head(point))
        }
        Witness::Residual { mu, residual } => format!("mu = {} residual {residual:.3e}", head(mu)),
        Witness::Ray { ray } => format!("polar ray {}", head(ray)),
    }
}

pub fn feasibility_record(p: &ProblemSpec, x: &WeightedVector) -> crate::Result<CheckRecord> {
    Ok(match check_feasible(p, x)? {
        Feasibility::Feasible(info) => CheckRecord::holds("feasibility", true)
            .number("active_inequalities", info.active.len())
            .number(
                "box_active",
                info.box_lower_active.len() + info.box_upper_active.len(),
            ),
        Feasibility::Infeasible(v) => {
            CheckRecord::holds("feasibility", false).note(format!("{} violations", v.len()))
        }
    })
}

pub fn cq_record(name: &str, v: CqVerdict) -> CheckRecord {
    match v {
        CqVerdict::Holds => CheckRecord::holds(name, true),
        CqVerdict::Fails { witness } => {
            CheckRecord::holds(name, false).witness(Witness::Ray { ray: witness })
        }
    }
}

pub fn verdict_record(name: &str, v: SecondOrderVerdict) -> CheckRecord {
    let mut r = CheckRecord::holds(name, !v.violated())
        .number("min_value", v.min_value)
        .number("directions", v.stats.evaluated)
        .note("sampled search; a holding verdict is not a proof");
    if let Some(a) = v.alpha_est {
        r = r.number("alpha_est", a);
    }
    if let Some(pc) = &v.positivity {
        r = r
            .number("positive_on_critical_cone", pc.positive)
            .number("coercive", pc.coercive)
            .number("positivity_consistent", pc.consistent);
    }
    r.witness(Witness::Direction { verdict: v })
}

pub fn growth_record(name: &str, v: GrowthVerdict, alpha: f64, eps: f64) -> CheckRecord {
    let r = match &v {
        GrowthVerdict::Consistent {
            samples,
            min_margin,
        } => CheckRecord::holds(name, true)
            .number("samples", samples)
            .number("min_margin", min_margin),
        GrowthVerdict::Counterexample {
            point,
            value,
            bound,
            samples,
        } => CheckRecord::holds(name, false)
            .number("samples", samples)
            .witness(Witness::Point {
                point: point.clone(),
                value: *value,
                bound: *bound,
            }),
        GrowthVerdict::NoFeasibleSamples { attempts } => CheckRecord::new(name, Outcome::Holds)
            .number("attempts", attempts)
            .note("no feasible samples found"),
    };
    r.number("alpha", alpha).number("eps", eps)
}

/// Hex SHA-256 of a byte string.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

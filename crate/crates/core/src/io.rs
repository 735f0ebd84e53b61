//! JSON problem and point files.
//!
//! A problem is either a builtin or quadratic data
//! `g(x) = constant + linear.x + ½ xᵀHx` in plain coordinates, with `H` given
//! as `[row, col, value]` triplets listing both halves of every off-diagonal
//! entry.

use std::fmt;
use std::sync::Arc;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::counterexamples::{build_example1, build_example2};
use crate::curvature::SearchBudget;
use crate::linalg::{DenseForm, WeightedVector, Weights};
use crate::model::{AbstractSet, Bound, BoxSet, ProblemSpec, QuadraticFunction, SmoothFunction};
use crate::report::digest;
use crate::Tolerances;

/// Off-diagonal pairs may differ by at most this much before symmetrization.
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FileError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl From<serde_json::Error> for FileError {
    fn from(e: serde_json::Error) -> Self {
        let message = e.to_string();
        // serde_json appends " at line L column C"; keep the bare message
        let message = match message.rfind(" at line ") {
            Some(i) => message[..i].to_string(),
            None => message,
        };
        FileError::Syntax {
            line: e.line(),
            column: e.column(),
            message,
        }
    }
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> FileError {
    FileError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

/// A box bound: a JSON number, or the strings `"inf"` / `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FileBound(pub f64);

impl Serialize for FileBound {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for FileBound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = FileBound;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a finite number or \"inf\" / \"-inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<FileBound, E> {
                if v.is_finite() {
                    Ok(FileBound(v))
                } else {
                    Err(E::custom("bound must be finite or a sentinel string"))
                }
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<FileBound, E> {
                Ok(FileBound(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<FileBound, E> {
                Ok(FileBound(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<FileBound, E> {
                match v {
                    "inf" | "+inf" => Ok(FileBound(f64::INFINITY)),
                    "-inf" => Ok(FileBound(f64::NEG_INFINITY)),
                    _ => Err(E::custom(format!("unknown bound sentinel {v:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinName {
    Example1,
    Example2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Builtin {
    pub name: BuiltinName,
    /// Grid size for `example1`, truncation for `example2`.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticData {
    #[serde(default)]
    pub constant: f64,
    /// Plain coefficients; zeros when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<Vec<f64>>,
    #[serde(default)]
    pub hessian: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<Builtin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<FileBound>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<FileBound>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<QuadraticData>,
    #[serde(default)]
    pub constraints: Vec<QuadraticData>,
    /// Number of leading equality constraints.
    #[serde(default)]
    pub m1: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchBudget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A problem ready for certification, with the natural base point of builtins.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub name: String,
    pub spec: ProblemSpec,
    pub base_point: Option<WeightedVector>,
    pub digest: String,
}

pub fn parse_problem(text: &str) -> Result<ProblemFile, FileError> {
    let file: ProblemFile = serde_json::from_str(text)?;
    file.validate()?;
    Ok(file)
}

impl ProblemFile {
    pub fn builtin(name: BuiltinName, size: usize) -> Self {
        ProblemFile {
            builtin: Some(Builtin { name, size }),
            ..ProblemFile::default()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem file serializes")
    }

    /// SHA-256 of the compact canonical serialization.
    pub fn digest(&self) -> String {
        digest(&serde_json::to_vec(self).expect("problem file serializes"))
    }

    fn validate(&self) -> Result<(), FileError> {
        if let Some(t) = &self.tolerances {
            let vals = [
                ("feasibility", t.feasibility),
                ("activity", t.activity),
                ("vertex_dedup", t.vertex_dedup),
                ("symmetry", t.symmetry),
                ("violation", t.violation),
                ("alpha", t.alpha),
            ];
            for (k, v) in vals {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(invalid(
                        format!("tolerances.{k}"),
                        "must be finite and nonnegative",
                    ));
                }
            }
        }
        if let Some(b) = &self.builtin {
            let quadratic = self.n.is_some()
                || self.weights.is_some()
                || self.lower.is_some()
                || self.upper.is_some()
                || self.objective.is_some()
                || !self.constraints.is_empty()
                || self.m1 != 0;
            if quadratic {
                return Err(invalid(
                    "builtin",
                    "a builtin problem takes no quadratic data",
                ));
            }
            let ok = match b.name {
                BuiltinName::Example1 => b.size >= 12 && b.size % 12 == 0,
                BuiltinName::Example2 => b.size >= 2,
            };
            if !ok {
                return Err(invalid(
                    "builtin.size",
                    "example1 needs a positive multiple of 12, example2 at least 2",
                ));
            }
            if b.size > 100_000 {
                return Err(invalid("builtin.size", "too large"));
            }
            return Ok(());
        }
        let n = self.n.ok_or_else(|| invalid("n", "missing dimension"))?;
        if n == 0 {
            return Err(invalid("n", "dimension must be positive"));
        }
        if n > 4096 {
            return Err(invalid(
                "n",
                "dimension above 4096 is not supported by the dense file format",
            ));
        }
        let len = |path: &str, got: usize| {
            if got == n {
                Ok(())
            } else {
                Err(invalid(path, format!("expected {n} entries, found {got}")))
            }
        };
        if let Some(w) = &self.weights {
            len("weights", w.len())?;
            if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(invalid(format!("weights[{i}]"), "weights must be positive"));
            }
        }
        if let Some(l) = &self.lower {
            len("lower", l.len())?;
            if let Some(i) = l.iter().position(|b| b.0 == f64::INFINITY) {
                return Err(invalid(format!("lower[{i}]"), "lower bound cannot be +inf"));
            }
        }
        if let Some(u) = &self.upper {
            len("upper", u.len())?;
            if let Some(i) = u.iter().position(|b| b.0 == f64::NEG_INFINITY) {
                return Err(invalid(format!("upper[{i}]"), "upper bound cannot be -inf"));
            }
        }
        if let (Some(l), Some(u)) = (&self.lower, &self.upper) {
            if let Some(i) = (0..n).find(|&i| l[i].0 > u[i].0) {
                return Err(invalid(
                    format!("lower[{i}]"),
                    "lower bound exceeds upper bound",
                ));
            }
        }
        if self.m1 > self.constraints.len() {
            return Err(invalid("m1", "more equalities than constraints"));
        }
        let obj = self
            .objective
            .as_ref()
            .ok_or_else(|| invalid("objective", "missing objective"))?;
        validate_quadratic("objective", obj, n)?;
        for (i, c) in self.constraints.iter().enumerate() {
            validate_quadratic(&format!("constraints[{i}]"), c, n)?;
        }
        Ok(())
    }

    pub fn load(&self) -> Result<LoadedProblem, FileError> {
        self.validate()?;
        let tol = self.tolerances.unwrap_or_default();
        let build = |e: crate::Error| invalid("problem", e.to_string());
        if let Some(b) = &self.builtin {
            let (name, spec, x) = match b.name {
                BuiltinName::Example1 => {
                    let ex = build_example1(b.size).map_err(build)?;
                    (format!("example1(N={})", b.size), ex.problem, ex.x_bar)
                }
                BuiltinName::Example2 => {
                    let ex = build_example2(b.size).map_err(build)?;
                    (format!("example2(N={})", b.size), ex.problem, ex.x_bar)
                }
            };
            return Ok(LoadedProblem {
                name,
                spec: spec.with_tolerances(tol),
                base_point: Some(x),
                digest: self.digest(),
            });
        }
        let n = self.n.expect("validated");
        let weights = match &self.weights {
            Some(w) => Weights::new(w.clone()).map_err(|e| invalid("weights", e.to_string()))?,
            None => Weights::ones(n),
        };
        let bounds = |v: &Option<Vec<FileBound>>| -> Vec<Bound> {
            match v {
                Some(v) => v
                    .iter()
                    .map(|b| {
                        if b.0.is_finite() {
                            Bound::Finite(b.0)
                        } else {
                            Bound::Infinite
                        }
                    })
                    .collect(),
                None => vec![Bound::Infinite; n],
            }
        };
        let set = BoxSet::new(bounds(&self.lower), bounds(&self.upper)).map_err(build)?;
        let quad = |path: &str, q: &QuadraticData| -> Result<Arc<dyn SmoothFunction>, FileError> {
            let h = symmetric_hessian(path, q, n)?;
            let form =
                DenseForm::new(n, h, tol.symmetry).map_err(|e| invalid(path, e.to_string()))?;
            let f = QuadraticFunction::new(
                weights.clone(),
                q.constant,
                q.linear.clone().unwrap_or_else(|| vec![0.0; n]),
                Arc::new(form),
            )
            .map_err(build)?;
            Ok(Arc::new(f))
        };
        let objective = quad("objective", self.objective.as_ref().expect("validated"))?;
        let constraints = self
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| quad(&format!("constraints[{i}]"), c))
            .collect::<Result<Vec<_>, _>>()?;
        let spec = ProblemSpec::new(
            objective,
            constraints,
            self.m1,
            AbstractSet::Box(set),
            weights,
        )
        .map_err(build)?
        .with_tolerances(tol);
        Ok(LoadedProblem {
            name: format!("quadratic(n={n}, m={})", self.constraints.len()),
            spec,
            base_point: None,
            digest: self.digest(),
        })
    }
}

fn validate_quadratic(path: &str, q: &QuadraticData, n: usize) -> Result<(), FileError> {
    if !q.constant.is_finite() {
        return Err(invalid(format!("{path}.constant"), "must be finite"));
    }
    if let Some(l) = &q.linear {
        if l.len() != n {
            return Err(invalid(
                format!("{path}.linear"),
                format!("expected {n} entries, found {}", l.len()),
            ));
        }
    }
    symmetric_hessian(path, q, n).map(|_| ())
}

/// Dense row-major `H` from triplets: indices in range, no duplicates, and
/// mirrored off-diagonal entries within [`SYMMETRY_TOL`], averaged.
fn symmetric_hessian(path: &str, q: &QuadraticData, n: usize) -> Result<Vec<f64>, FileError> {
    let mut h = vec![0.0; n * n];
    let mut seen = vec![false; n * n];
    for (k, &(i, j, v)) in q.hessian.iter().enumerate() {
        let at = format!("{path}.hessian[{k}]");
        if i >= n || j >= n {
            return Err(invalid(
                at,
                format!("index ({i}, {j}) out of range for n = {n}"),
            ));
        }
        if !v.is_finite() {
            return Err(invalid(at, "entry must be finite"));
        }
        if std::mem::replace(&mut seen[i * n + j], true) {
            return Err(invalid(at, format!("duplicate entry ({i}, {j})")));
        }
        h[i * n + j] = v;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (h[i * n + j], h[j * n + i]);
            if (a - b).abs() > SYMMETRY_TOL {
                return Err(invalid(
                    format!("{path}.hessian"),
                    format!("asymmetric at ({i}, {j}): {a} vs {b}"),
                ));
            }
            let m = 0.5 * (a + b);
            h[i * n + j] = m;
            h[j * n + i] = m;
        }
    }
    Ok(h)
}

/// A point `x`, optionally with a multiplier `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointFile {
    pub x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
}

pub fn parse_point(text: &str) -> Result<PointFile, FileError> {
    let p: PointFile = serde_json::from_str(text)?;
    if p.x.is_empty() {
        return Err(invalid("x", "empty point"));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"n": 1, "objective": {"hessian": [[0, 0, 2.0]]}}"#;

    #[test]
    fn minimal_quadratic_parses() {
        let f = parse_problem(MINIMAL).unwrap();
        let p = f.load().unwrap();
        let x = p.spec.point(vec![3.0]).unwrap();
        assert_eq!(p.spec.objective().value(&x), 9.0);
    }

    #[test]
    fn inf_sentinels() {
        let f = parse_problem(
            r#"{"n": 2, "lower": [0, "-inf"], "upper": ["inf", 1.5], "objective": {"linear": [1, 0]}}"#,
        )
        .unwrap();
        let p = f.load().unwrap();
        let b = p.spec.set().as_box().unwrap();
        assert_eq!(b.upper()[0], Bound::Infinite);
        assert_eq!(b.lower()[1], Bound::Infinite);
        assert_eq!(b.hi(1), 1.5);
        assert!(parse_problem(r#"{"n": 1, "lower": ["inf"], "objective": {}}"#).is_err());
        assert!(parse_problem(r#"{"n": 1, "lower": ["infinity"], "objective": {}}"#).is_err());
    }

    #[test]
    fn asymmetric_hessian_rejected() {
        let e = parse_problem(r#"{"n": 2, "objective": {"hessian": [[0, 1, 1.0], [1, 0, 1.1]]}}"#)
            .unwrap_err();
        assert!(matches!(e, FileError::Invalid { .. }), "{e}");
        let e = parse_problem(r#"{"n": 2, "objective": {"hessian": [[0, 1, 1.0]]}}"#).unwrap_err();
        assert!(e.to_string().contains("asymmetric"));
        let e = parse_problem(r#"{"n": 2, "objective": {"hessian": [[0, 0, 1.0], [0, 0, 1.0]]}}"#)
            .unwrap_err();
        assert!(e.to_string().contains("duplicate"));
        assert!(parse_problem(
            r#"{"n": 2, "objective": {"hessian": [[0, 1, 1.0], [1, 0, 1.0000000001]]}}"#
        )
        .is_ok());
    }

    #[test]
    fn unknown_keys_and_positions() {
        let e = parse_problem("{\n  \"n\": 1,\n  \"objectve\": {}\n}").unwrap_err();
        match e {
            FileError::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
        assert!(parse_problem(r#"{"builtin": {"name": "example1", "size": 12}, "n": 3}"#).is_err());
        assert!(parse_problem(r#"{"builtin": {"name": "example1", "size": 10}}"#).is_err());
    }

    #[test]
    fn round_trip() {
        let f = parse_problem(
            r#"{"n": 2, "weights": [0.5, 2], "lower": [-1, "-inf"], "upper": [1, "inf"],
                "objective": {"constant": 1, "linear": [1, 2], "hessian": [[0, 0, 1], [0, 1, 0.5], [1, 0, 0.5]]},
                "constraints": [{"linear": [1, 1]}], "m1": 1, "seed": 4,
                "tolerances": {"violation": 1e-6}, "search": {"random": 10}}"#,
        )
        .unwrap();
        let again = parse_problem(&f.to_json()).unwrap();
        assert_eq!(again, f);
        assert_eq!(again.digest(), f.digest());
    }

    #[test]
    fn builtins_load() {
        let p = ProblemFile::builtin(BuiltinName::Example2, 4)
            .load()
            .unwrap();
        assert_eq!(p.spec.dim(), 3);
        assert!(p.base_point.is_some());
    }

    #[test]
    fn point_file() {
        let p = parse_point(r#"{"x": [1, 2], "mu": [0]}"#).unwrap();
        assert_eq!(p.mu, Some(vec![0.0]));
        assert!(parse_point(r#"{"x": []}"#).is_err());
        assert!(parse_point(r#"{"x": [1], "y": 2}"#).is_err());
    }
}

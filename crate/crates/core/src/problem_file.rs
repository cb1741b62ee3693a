//! JSON problem documents.
//!
//! ```json
//! {
//!   "junction": {"edges": 2, "lengths": [1, 1]},
//!   "coefficients": {
//!     "sigma": ["1", "1"], "hamiltonian": ["u", "u"],
//!     "vertex_condition": "p1 + p2", "initial": ["..", ".."],
//!     "outer_boundary": ["..", ".."], "forcing": ["..", ".."]
//!   },
//!   "envelope": {"m": 2, "nu_lower": 1, "nu_upper": 1, "c_h": 1,
//!                "root_b": 0, "root_B": [0, 0], "mu_bound": "1"},
//!   "horizon": 1,
//!   "reference": {"solution": ["..", ".."]}
//! }
//! ```
//!
//! `forcing`, the four bound expressions and `reference` are optional;
//! `name` and `description` are accepted and ignored.

use std::path::Path;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::expr::{CoefficientKind, ParseError};
use crate::graph::build_junction;
use crate::model::{parse_coefficient, Coefficient, GrowthEnvelope, ModelError, ProblemParts, ProblemSpec};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum ProblemFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("{pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("{pointer}: {source}")]
    Parse {
        pointer: String,
        #[source]
        source: ParseError,
    },
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("unknown built-in problem `{0}`")]
    UnknownBuiltin(String),
}

impl ProblemFileError {
    /// JSON pointer of the offending value, when there is one.
    pub fn pointer(&self) -> Option<&str> {
        match self {
            ProblemFileError::Schema { pointer, .. } | ProblemFileError::Parse { pointer, .. } => Some(pointer),
            _ => None,
        }
    }
}

/// A problem together with an optional exact solution.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedProblem<T> {
    pub spec: ProblemSpec<T>,
    /// `u_i(t, x)` per edge.
    pub reference: Option<Vec<Coefficient>>,
}

/// Problem documents compiled into the library, by name.
pub const BUILTIN_PROBLEMS: &[(&str, &str)] = &[
    ("heat_neumann_1edge", include_str!("../fixtures/heat_neumann_1edge.json")),
    ("kirchhoff_heat_3edge", include_str!("../fixtures/kirchhoff_heat_3edge.json")),
    ("kirchhoff_cosh_2edge", include_str!("../fixtures/kirchhoff_cosh_2edge.json")),
    ("quasilinear_2edge", include_str!("../fixtures/quasilinear_2edge.json")),
    ("zero_solution", include_str!("../fixtures/zero_solution.json")),
    ("compact_support_heat", include_str!("../fixtures/compact_support_heat.json")),
    ("broken_monotone", include_str!("../fixtures/broken_monotone.json")),
];

pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTIN_PROBLEMS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load_builtin<T: Real>(name: &str) -> Result<LoadedProblem<T>, ProblemFileError> {
    let source = builtin_source(name).ok_or_else(|| ProblemFileError::UnknownBuiltin(name.to_string()))?;
    parse_problem(source)
}

/// Reads a problem document from disk, or a built-in one when `path` has
/// the form `builtin:<name>`.
pub fn load_problem_file<T: Real>(path: impl AsRef<Path>) -> Result<LoadedProblem<T>, ProblemFileError> {
    let path = path.as_ref();
    if let Some(name) = path.to_str().and_then(|s| s.strip_prefix("builtin:")) {
        return load_builtin(name);
    }
    let text = std::fs::read_to_string(path).map_err(|source| ProblemFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_problem(&text)
}

/// [`load_problem_file`] without the reference solution.
pub fn load_problem<T: Real>(path: impl AsRef<Path>) -> Result<ProblemSpec<T>, ProblemFileError> {
    Ok(load_problem_file(path)?.spec)
}

pub fn parse_problem<T: Real>(text: &str) -> Result<LoadedProblem<T>, ProblemFileError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| ProblemFileError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    from_value(&doc)
}

fn schema(pointer: &str, message: impl Into<String>) -> ProblemFileError {
    ProblemFileError::Schema {
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

struct Obj<'a> {
    map: &'a Map<String, Value>,
    pointer: String,
}

impl<'a> Obj<'a> {
    fn new(value: &'a Value, pointer: &str, allowed: &[&str]) -> Result<Self, ProblemFileError> {
        let map = value
            .as_object()
            .ok_or_else(|| schema(if pointer.is_empty() { "/" } else { pointer }, "expected an object"))?;
        if let Some(key) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(schema(&format!("{pointer}/{key}"), "unknown key"));
        }
        Ok(Self {
            map,
            pointer: pointer.to_string(),
        })
    }

    fn path(&self, key: &str) -> String {
        format!("{}/{key}", self.pointer)
    }

    fn get(&self, key: &str) -> Result<&'a Value, ProblemFileError> {
        self.map.get(key).ok_or_else(|| schema(&self.path(key), "missing required key"))
    }

    fn opt(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn object(&self, key: &str, allowed: &[&str]) -> Result<Obj<'a>, ProblemFileError> {
        Obj::new(self.get(key)?, &self.path(key), allowed)
    }

    fn real(&self, key: &str) -> Result<f64, ProblemFileError> {
        number(self.get(key)?, &self.path(key))
    }

    fn reals(&self, key: &str, len: usize) -> Result<Vec<f64>, ProblemFileError> {
        let pointer = self.path(key);
        array(self.get(key)?, &pointer, len)?
            .iter()
            .enumerate()
            .map(|(i, v)| number(v, &format!("{pointer}/{i}")))
            .collect()
    }

    fn coefficient(&self, key: &str, kind: CoefficientKind) -> Result<Coefficient, ProblemFileError> {
        coefficient(self.get(key)?, &self.path(key), kind)
    }

    fn coefficients(&self, key: &str, len: usize, kind: CoefficientKind) -> Result<Vec<Coefficient>, ProblemFileError> {
        coefficient_list(self.get(key)?, &self.path(key), len, kind)
    }

    fn bound(&self, key: &str, kind: CoefficientKind) -> Result<Option<Coefficient>, ProblemFileError> {
        self.opt(key).map(|v| coefficient(v, &self.path(key), kind)).transpose()
    }
}

fn number(v: &Value, pointer: &str) -> Result<f64, ProblemFileError> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| schema(pointer, "expected a finite number"))
}

fn array<'a>(v: &'a Value, pointer: &str, len: usize) -> Result<&'a Vec<Value>, ProblemFileError> {
    let items = v.as_array().ok_or_else(|| schema(pointer, "expected an array"))?;
    if items.len() != len {
        return Err(schema(pointer, format!("expected {len} entries (one per edge), got {}", items.len())));
    }
    Ok(items)
}

fn coefficient(v: &Value, pointer: &str, kind: CoefficientKind) -> Result<Coefficient, ProblemFileError> {
    let text = v.as_str().ok_or_else(|| schema(pointer, "expected an expression string"))?;
    parse_coefficient(text, kind).map_err(|source| ProblemFileError::Parse {
        pointer: pointer.to_string(),
        source,
    })
}

fn coefficient_list(v: &Value, pointer: &str, len: usize, kind: CoefficientKind) -> Result<Vec<Coefficient>, ProblemFileError> {
    array(v, pointer, len)?
        .iter()
        .enumerate()
        .map(|(i, item)| coefficient(item, &format!("{pointer}/{i}"), kind))
        .collect()
}

fn from_value<T: Real>(doc: &Value) -> Result<LoadedProblem<T>, ProblemFileError> {
    let root = Obj::new(
        doc,
        "",
        &["name", "description", "junction", "coefficients", "envelope", "horizon", "reference"],
    )?;

    let junction = root.object("junction", &["edges", "lengths"])?;
    let edges = junction
        .get("edges")?
        .as_u64()
        .filter(|&e| e >= 1)
        .ok_or_else(|| schema("/junction/edges", "expected a positive integer"))? as usize;
    let lengths = junction.reals("lengths", edges)?;
    let junction = build_junction(edges, &lengths.iter().map(|&a| T::lit(a)).collect::<Vec<_>>())
        .map_err(|e| schema("/junction/lengths", e.to_string()))?;

    let c = root.object(
        "coefficients",
        &["sigma", "hamiltonian", "vertex_condition", "initial", "outer_boundary", "forcing"],
    )?;
    let sigma = c.coefficients("sigma", edges, CoefficientKind::Sigma)?;
    let hamiltonian = c.coefficients("hamiltonian", edges, CoefficientKind::Hamiltonian)?;
    let vertex_condition = c.coefficient("vertex_condition", CoefficientKind::VertexCondition { edges })?;
    let initial = c.coefficients("initial", edges, CoefficientKind::Initial)?;
    let outer_boundary = c.coefficients("outer_boundary", edges, CoefficientKind::OuterBoundary)?;
    let forcing = c
        .opt("forcing")
        .map(|v| coefficient_list(v, "/coefficients/forcing", edges, CoefficientKind::Forcing))
        .transpose()?;

    let e = root.object(
        "envelope",
        &[
            "m", "nu_lower", "nu_upper", "c_h", "root_b", "root_B", "mu_bound", "gamma_bound", "epsilon_bound", "p_bound",
        ],
    )?;
    let mut envelope = GrowthEnvelope::new(
        T::lit(e.real("m")?),
        T::lit(e.real("nu_lower")?),
        T::lit(e.real("nu_upper")?),
        T::lit(e.real("c_h")?),
    )
    .map_err(|err| schema("/envelope", err.to_string()))?
    .with_root_pair(
        T::lit(e.real("root_b")?),
        e.reals("root_B", edges)?.into_iter().map(T::lit).collect(),
    );
    envelope.mu = e.bound("mu_bound", CoefficientKind::GrowthBound)?;
    envelope.gamma = e.bound("gamma_bound", CoefficientKind::GrowthBound)?;
    envelope.epsilon = e.bound("epsilon_bound", CoefficientKind::GrowthBound)?;
    envelope.p_decay = e.bound("p_bound", CoefficientKind::DecayBound)?;

    let horizon = root.real("horizon")?;
    if !(horizon > 0.0) {
        return Err(schema("/horizon", "must be positive"));
    }

    let reference = root
        .opt("reference")
        .map(|v| {
            let r = Obj::new(v, "/reference", &["solution"])?;
            r.coefficients("solution", edges, CoefficientKind::Solution)
        })
        .transpose()?;

    let spec = ProblemSpec::new(ProblemParts {
        junction,
        sigma,
        hamiltonian,
        vertex_condition,
        initial,
        outer_boundary,
        forcing,
        horizon: T::lit(horizon),
        envelope,
    })?;
    Ok(LoadedProblem { spec, reference })
}

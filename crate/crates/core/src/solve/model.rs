//! Solver-neutral mixed-integer second-order cone models.
//!
//! Models serialize to the `sbr-conic/1` JSON schema:
//!
//! ```text
//! {
//!   "version":   "sbr-conic/1",
//!   "sense":     "min" | "max",
//!   "objective": {"constant": c, "terms": [{"var": name, "coef": a}, ...]},
//!   "variables": [{"name", "lower", "upper", "kind": "continuous" | "binary"}, ...],
//!   "linear":    [{"name", "terms": [...], "sense": "<=" | ">=" | "==", "rhs"}, ...],
//!   "soc":       [{"name", "args": [affine, ...], "bound": affine}, ...]
//! }
//! ```
//!
//! An SOC entry states `||(args)||_2 <= bound`. Infinite bounds are written
//! as `null`. Keys are sorted and numbers use the shortest round-trip form,
//! so identical models produce identical bytes.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "sbr-conic/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

/// `constant + sum coef * var`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Affine {
    pub constant: f64,
    pub terms: Vec<(String, f64)>,
}

impl Affine {
    pub fn var(name: impl Into<String>) -> Self {
        Self {
            constant: 0.0,
            terms: vec![(name.into(), 1.0)],
        }
    }

    pub fn term(mut self, name: impl Into<String>, coef: f64) -> Self {
        self.terms.push((name.into(), coef));
        self
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn eval(&self, x: &HashMap<&str, f64>) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|(n, a)| a * x.get(n.as_str()).copied().unwrap_or(f64::NAN))
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "==",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub name: String,
    pub terms: Vec<(String, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocConstraint {
    pub name: String,
    pub args: Vec<Affine>,
    pub bound: Affine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicModel {
    pub minimize: bool,
    pub objective: Affine,
    pub variables: Vec<Variable>,
    pub linear: Vec<LinearConstraint>,
    pub soc: Vec<SocConstraint>,
}

impl ConicModel {
    pub fn new() -> Self {
        Self {
            minimize: true,
            objective: Affine::default(),
            variables: Vec::new(),
            linear: Vec::new(),
            soc: Vec::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, kind: VarKind) {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            kind,
        });
    }

    pub fn add_linear(&mut self, name: impl Into<String>, terms: Vec<(String, f64)>, sense: Sense, rhs: f64) {
        self.linear.push(LinearConstraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
    }

    pub fn add_soc(&mut self, name: impl Into<String>, args: Vec<Affine>, bound: Affine) {
        self.soc.push(SocConstraint {
            name: name.into(),
            args,
            bound,
        });
    }

    pub fn binary_count(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn var(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    /// Checks that every referenced variable is declared and names are unique.
    pub fn validate(&self) -> Result<()> {
        let mut names = std::collections::HashSet::new();
        for v in &self.variables {
            if !names.insert(v.name.as_str()) {
                return Err(Error::InvalidParams(format!("duplicate variable {}", v.name)));
            }
        }
        let check = |terms: &[(String, f64)]| -> Result<()> {
            for (n, _) in terms {
                if !names.contains(n.as_str()) {
                    return Err(Error::InvalidParams(format!("unknown variable {n}")));
                }
            }
            Ok(())
        };
        check(&self.objective.terms)?;
        for l in &self.linear {
            check(&l.terms)?;
        }
        for s in &self.soc {
            for a in &s.args {
                check(&a.terms)?;
            }
            check(&s.bound.terms)?;
        }
        Ok(())
    }

    /// Objective value and largest constraint violation at an assignment
    /// (bounds, integrality, linear rows and cones).
    pub fn evaluate(&self, assignment: &BTreeMap<String, f64>) -> Result<(f64, f64)> {
        let x: HashMap<&str, f64> = assignment.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        for v in &self.variables {
            if !x.contains_key(v.name.as_str()) {
                return Err(Error::InvalidParams(format!("no value for {}", v.name)));
            }
        }
        let mut viol: f64 = 0.0;
        for v in &self.variables {
            let val = x[v.name.as_str()];
            viol = viol.max(v.lower - val).max(val - v.upper);
            if v.kind == VarKind::Binary {
                viol = viol.max((val - val.round()).abs());
            }
        }
        for l in &self.linear {
            let lhs: f64 = l.terms.iter().map(|(n, a)| a * x[n.as_str()]).sum();
            let e = match l.sense {
                Sense::Le => lhs - l.rhs,
                Sense::Ge => l.rhs - lhs,
                Sense::Eq => (lhs - l.rhs).abs(),
            };
            viol = viol.max(e);
        }
        for s in &self.soc {
            let n = s.args.iter().map(|a| a.eval(&x).powi(2)).sum::<f64>().sqrt();
            viol = viol.max(n - s.bound.eval(&x));
        }
        Ok((self.objective.eval(&x), viol.max(0.0)))
    }

    pub fn to_json(&self) -> Value {
        let vars: Vec<Value> = self
            .variables
            .iter()
            .map(|v| {
                json!({
                    "name": v.name,
                    "lower": num(v.lower),
                    "upper": num(v.upper),
                    "kind": match v.kind { VarKind::Continuous => "continuous", VarKind::Binary => "binary" },
                })
            })
            .collect();
        let linear: Vec<Value> = self
            .linear
            .iter()
            .map(|l| {
                json!({
                    "name": l.name,
                    "terms": terms_json(&l.terms),
                    "sense": l.sense.symbol(),
                    "rhs": num(l.rhs),
                })
            })
            .collect();
        let soc: Vec<Value> = self
            .soc
            .iter()
            .map(|s| {
                json!({
                    "name": s.name,
                    "args": s.args.iter().map(affine_json).collect::<Vec<_>>(),
                    "bound": affine_json(&s.bound),
                })
            })
            .collect();
        json!({
            "version": SCHEMA_VERSION,
            "sense": if self.minimize { "min" } else { "max" },
            "objective": affine_json(&self.objective),
            "variables": vars,
            "linear": linear,
            "soc": soc,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |what: &str| Error::Parse {
            line: 0,
            col: None,
            msg: format!("model: {what}"),
        };
        let obj = v.as_object().ok_or_else(|| bad("top level is not an object"))?;
        if obj.get("version").and_then(Value::as_str) != Some(SCHEMA_VERSION) {
            return Err(bad("unsupported version"));
        }
        let minimize = match obj.get("sense").and_then(Value::as_str) {
            Some("min") => true,
            Some("max") => false,
            _ => return Err(bad("sense")),
        };
        let objective = affine_from(obj.get("objective").ok_or_else(|| bad("objective"))?)?;
        let mut model = ConicModel {
            minimize,
            objective,
            variables: Vec::new(),
            linear: Vec::new(),
            soc: Vec::new(),
        };
        for var in array(obj, "variables")? {
            let name = string(var, "name")?;
            let kind = match var.get("kind").and_then(Value::as_str) {
                Some("continuous") => VarKind::Continuous,
                Some("binary") => VarKind::Binary,
                _ => return Err(bad("variable kind")),
            };
            let lower = bound_from(var.get("lower"), f64::NEG_INFINITY)?;
            let upper = bound_from(var.get("upper"), f64::INFINITY)?;
            model.add_var(name, lower, upper, kind);
        }
        for row in array(obj, "linear")? {
            let sense = match row.get("sense").and_then(Value::as_str) {
                Some("<=") => Sense::Le,
                Some(">=") => Sense::Ge,
                Some("==") => Sense::Eq,
                _ => return Err(bad("linear sense")),
            };
            let rhs = row.get("rhs").and_then(Value::as_f64).ok_or_else(|| bad("rhs"))?;
            model.add_linear(string(row, "name")?, terms_from(row.get("terms"))?, sense, rhs);
        }
        for cone in array(obj, "soc")? {
            let args = cone
                .get("args")
                .and_then(Value::as_array)
                .ok_or_else(|| bad("soc args"))?
                .iter()
                .map(affine_from)
                .collect::<Result<Vec<_>>>()?;
            let bound = affine_from(cone.get("bound").ok_or_else(|| bad("soc bound"))?)?;
            model.add_soc(string(cone, "name")?, args, bound);
        }
        model.validate()?;
        Ok(model)
    }

    /// Canonical text form: pretty JSON with sorted keys and a trailing newline.
    pub fn to_canonical_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("model serializes");
        s.push('\n');
        s
    }
}

impl Default for ConicModel {
    fn default() -> Self {
        Self::new()
    }
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn terms_json(terms: &[(String, f64)]) -> Value {
    Value::Array(
        terms
            .iter()
            .map(|(n, a)| json!({"var": n, "coef": a}))
            .collect(),
    )
}

fn affine_json(a: &Affine) -> Value {
    json!({"constant": a.constant, "terms": terms_json(&a.terms)})
}

fn parse_err(msg: &str) -> Error {
    Error::Parse {
        line: 0,
        col: None,
        msg: format!("model: {msg}"),
    }
}

fn array<'v>(obj: &'v Map<String, Value>, key: &str) -> Result<&'v Vec<Value>> {
    obj.get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err(key))
}

fn string(v: &Value, key: &str) -> Result<String> {
    v.get(key)
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| parse_err(key))
}

fn bound_from(v: Option<&Value>, inf: f64) -> Result<f64> {
    match v {
        Some(Value::Null) => Ok(inf),
        Some(x) => x.as_f64().ok_or_else(|| parse_err("bound")),
        None => Err(parse_err("bound")),
    }
}

fn terms_from(v: Option<&Value>) -> Result<Vec<(String, f64)>> {
    v.and_then(Value::as_array)
        .ok_or_else(|| parse_err("terms"))?
        .iter()
        .map(|t| {
            let n = string(t, "var")?;
            let c = t.get("coef").and_then(Value::as_f64).ok_or_else(|| parse_err("coef"))?;
            Ok((n, c))
        })
        .collect()
}

fn affine_from(v: &Value) -> Result<Affine> {
    Ok(Affine {
        constant: v
            .get("constant")
            .and_then(Value::as_f64)
            .ok_or_else(|| parse_err("constant"))?,
        terms: terms_from(v.get("terms"))?,
    })
}

pub fn write_model(model: &ConicModel, path: &Path) -> Result<()> {
    model.validate()?;
    std::fs::write(path, model.to_canonical_string())?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<ConicModel> {
    let text = std::fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        col: Some(e.column()),
        msg: e.to_string(),
    })?;
    ConicModel::from_json(&v)
}

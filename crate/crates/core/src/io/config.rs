//! Configuration documents: schema validation that reports every
//! violation, dotted overrides, and construction of the [`ProblemSpec`].

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::estimates::BarrierParams;
use crate::functions::AnalyticFn;
use crate::geom::{ChiForm, MetricField};
use crate::grid::{GridSpec, ScalarField};
use crate::solver::{equation_psi_field, mms_generate, ProblemSpec, SolveOptions};

use super::field::read_field;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    /// Grid sizes for convergence studies; `problem.m` alone if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub n: usize,
    #[serde(rename = "box")]
    pub domain: BoxConfig,
    pub m: usize,
    pub metric: NamedSpec,
    #[serde(default = "NamedSpec::zero")]
    pub chi: NamedSpec,
    pub psi: PsiSpec,
    pub phi: PhiSpec,
    pub subsolution: SubsolutionSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lo: Bound,
    pub hi: Bound,
}

/// A box corner: one value for every axis, or one per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Bound {
    fn expand(&self, dims: usize) -> Vec<f64> {
        match self {
            Bound::Scalar(v) => vec![*v; dims],
            Bound::Vector(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedSpec {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl NamedSpec {
    fn zero() -> Self {
        Self { name: "zero".into(), params: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PsiSpec {
    Constant { value: f64 },
    File { path: String },
    /// `psi` manufactured from the analytic Hessian of `u_star`.
    Mms { u_star: NamedSpec },
    /// `factor` times the `psi` for which the subsolution solves the equation.
    SubsolutionScaled { factor: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhiSpec {
    Subsolution,
    Mms,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SubsolutionSpec {
    Mms,
    Function {
        name: String,
        #[serde(default)]
        params: Vec<f64>,
    },
    File {
        path: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "VerifyConfig::default_theta")]
    pub theta: f64,
    #[serde(rename = "N", default = "VerifyConfig::default_n")]
    pub n_threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barrier: Option<BarrierParams>,
}

impl VerifyConfig {
    fn default_theta() -> f64 {
        0.05
    }

    fn default_n() -> f64 {
        100.0
    }
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { theta: Self::default_theta(), n_threshold: Self::default_n(), barrier: None }
    }
}

const SOLVER_KEYS: &[&str] = &[
    "tol_residual",
    "max_newton",
    "damping",
    "min_step",
    "continuation_steps",
    "max_continuation_steps",
    "linear_rtol",
    "gmres_restart",
    "max_linear_iters",
    "serial",
];

struct Checker {
    errors: Vec<String>,
}

impl Checker {
    fn object<'a>(&mut self, v: &'a Value, path: &str, allowed: &[&str], required: &[&str]) -> Option<&'a Map<String, Value>> {
        let Some(obj) = v.as_object() else {
            self.errors.push(format!("{path}: expected an object"));
            return None;
        };
        for k in obj.keys() {
            if !allowed.contains(&k.as_str()) {
                self.errors.push(format!("{path}: unknown key '{k}' (allowed: {})", allowed.join(", ")));
            }
        }
        for r in required {
            if !obj.contains_key(*r) {
                self.errors.push(format!("{path}: missing required key '{r}'"));
            }
        }
        Some(obj)
    }

    fn number(&mut self, obj: &Map<String, Value>, key: &str, path: &str) -> Option<f64> {
        let v = obj.get(key)?;
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.errors.push(format!("{path}.{key}: expected a finite number, got {v}"));
                None
            }
        }
    }

    fn uint(&mut self, obj: &Map<String, Value>, key: &str, path: &str) -> Option<usize> {
        let v = obj.get(key)?;
        match v.as_u64() {
            Some(x) => Some(x as usize),
            None => {
                self.errors.push(format!("{path}.{key}: expected a non-negative integer, got {v}"));
                None
            }
        }
    }

    fn string<'a>(&mut self, obj: &'a Map<String, Value>, key: &str, path: &str) -> Option<&'a str> {
        let v = obj.get(key)?;
        match v.as_str() {
            Some(s) => Some(s),
            None => {
                self.errors.push(format!("{path}.{key}: expected a string, got {v}"));
                None
            }
        }
    }

    fn numbers(&mut self, obj: &Map<String, Value>, key: &str, path: &str) -> Option<Vec<f64>> {
        let v = obj.get(key)?;
        let arr = v.as_array().and_then(|a| a.iter().map(|x| x.as_f64().filter(|f| f.is_finite())).collect::<Option<Vec<f64>>>());
        if arr.is_none() {
            self.errors.push(format!("{path}.{key}: expected an array of finite numbers, got {v}"));
        }
        arr
    }

    /// `{name, params}`; returns the pair when well-typed.
    fn named(&mut self, v: &Value, path: &str) -> Option<(String, Vec<f64>)> {
        let obj = self.object(v, path, &["name", "params"], &["name"])?;
        let name = self.string(obj, "name", path)?.to_string();
        let params = if obj.contains_key("params") { self.numbers(obj, "params", path)? } else { Vec::new() };
        Some((name, params))
    }

    fn grid_size(&mut self, m: usize, path: &str) {
        if m < 5 || m.is_multiple_of(2) {
            self.errors.push(format!("{path}: points per axis must be odd and at least 5, got {m}"));
        }
    }
}

/// Collects every schema violation of a configuration document.
pub fn validate_config(doc: &Value) -> Vec<String> {
    let mut c = Checker { errors: Vec::new() };
    let Some(top) = c.object(doc, "config", &["problem", "solver", "verify", "output_dir", "refinement"], &["problem"]) else {
        return c.errors;
    };
    let mut psi_kind = None;
    let mut n_valid = None;

    if let Some(p) = top.get("problem") {
        let allowed = ["n", "box", "m", "metric", "chi", "psi", "phi", "subsolution"];
        let required = ["n", "box", "m", "metric", "psi", "phi", "subsolution"];
        if let Some(prob) = c.object(p, "problem", &allowed, &required) {
            if let Some(n) = c.uint(prob, "n", "problem") {
                if (2..=3).contains(&n) {
                    n_valid = Some(n);
                } else {
                    c.errors.push(format!("problem.n: complex dimension must be 2 or 3, got {n}"));
                }
            }
            if let Some(m) = c.uint(prob, "m", "problem") {
                c.grid_size(m, "problem.m");
            }
            if let Some(b) = prob.get("box") {
                if let Some(bx) = c.object(b, "problem.box", &["lo", "hi"], &["lo", "hi"]) {
                    let mut corner = |key: &str| -> Option<Vec<f64>> {
                        let v = bx.get(key)?;
                        if let Some(x) = v.as_f64() {
                            return n_valid.map(|n| vec![x; 2 * n]);
                        }
                        let arr = c.numbers(bx, key, "problem.box")?;
                        if let Some(n) = n_valid {
                            if arr.len() != 2 * n {
                                c.errors.push(format!("problem.box.{key}: expected {} entries, got {}", 2 * n, arr.len()));
                                return None;
                            }
                        }
                        Some(arr)
                    };
                    if let (Some(lo), Some(hi)) = (corner("lo"), corner("hi")) {
                        for (a, (l, h)) in lo.iter().zip(&hi).enumerate() {
                            if !(h > l) {
                                c.errors.push(format!("problem.box: axis {a} is empty (lo {l} >= hi {h})"));
                            }
                        }
                    }
                }
            }
            if let Some(v) = prob.get("metric") {
                if let Some((name, params)) = c.named(v, "problem.metric") {
                    if let Some(n) = n_valid {
                        if let Err(e) = MetricField::builtin(&name, &params, n) {
                            c.errors.push(format!("problem.metric: {e}"));
                        }
                    }
                }
            }
            if let Some(v) = prob.get("chi") {
                if let Some((name, params)) = c.named(v, "problem.chi") {
                    if let Err(e) = ChiForm::from_name(&name, &params) {
                        c.errors.push(format!("problem.chi: {e}"));
                    }
                }
            }
            if let Some(v) = prob.get("psi") {
                psi_kind = check_psi(&mut c, v, n_valid);
            }
            if let Some(v) = prob.get("phi") {
                if let Some(obj) = c.object(v, "problem.phi", &["kind"], &["kind"]) {
                    match c.string(obj, "kind", "problem.phi") {
                        Some("subsolution") => {}
                        Some("mms") => {
                            if psi_kind.as_deref().is_some_and(|k| k != "mms") {
                                c.errors.push("problem.phi.kind 'mms' requires problem.psi.kind 'mms'".into());
                            }
                        }
                        Some(k) => c.errors.push(format!("problem.phi.kind: unknown kind '{k}' (supported: subsolution, mms)")),
                        None => {}
                    }
                }
            }
            if let Some(v) = prob.get("subsolution") {
                check_subsolution(&mut c, v, psi_kind.as_deref(), n_valid);
            }
        }
    }

    if let Some(s) = top.get("solver") {
        if let Some(obj) = c.object(s, "solver", SOLVER_KEYS, &[]) {
            let known: Map<String, Value> =
                obj.iter().filter(|(k, _)| SOLVER_KEYS.contains(&k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect();
            match serde_json::from_value::<SolveOptions>(Value::Object(known)) {
                Ok(opts) => {
                    if let Err(Error::Config(list)) = opts.validate() {
                        c.errors.extend(list.into_iter().map(|e| format!("solver: {e}")));
                    }
                }
                Err(e) => c.errors.push(format!("solver: {e}")),
            }
        }
    }

    if let Some(v) = top.get("verify") {
        if let Some(obj) = c.object(v, "verify", &["theta", "N", "barrier"], &[]) {
            if let Some(t) = c.number(obj, "theta", "verify") {
                if t < 0.0 {
                    c.errors.push(format!("verify.theta must be non-negative, got {t}"));
                }
            }
            if let Some(nn) = c.number(obj, "N", "verify") {
                if nn <= 0.0 {
                    c.errors.push(format!("verify.N must be positive, got {nn}"));
                }
            }
            if let Some(b) = obj.get("barrier") {
                if let Some(bo) = c.object(b, "verify.barrier", &["t", "T", "delta"], &["t", "T", "delta"]) {
                    for key in ["t", "T"] {
                        if let Some(x) = c.number(bo, key, "verify.barrier") {
                            if x < 0.0 {
                                c.errors.push(format!("verify.barrier.{key} must be non-negative, got {x}"));
                            }
                        }
                    }
                    if let Some(d) = c.number(bo, "delta", "verify.barrier") {
                        if d <= 0.0 {
                            c.errors.push(format!("verify.barrier.delta must be positive, got {d}"));
                        }
                    }
                }
            }
        }
    }

    if top.contains_key("output_dir") {
        c.string(top, "output_dir", "config");
    }
    if let Some(r) = top.get("refinement") {
        match r.as_array().and_then(|a| a.iter().map(Value::as_u64).collect::<Option<Vec<u64>>>()) {
            Some(list) if !list.is_empty() => {
                for m in list {
                    c.grid_size(m as usize, "refinement");
                }
            }
            _ => c.errors.push(format!("refinement: expected a non-empty array of grid sizes, got {r}")),
        }
    }
    c.errors
}

fn check_psi(c: &mut Checker, v: &Value, n: Option<usize>) -> Option<String> {
    let obj = c.object(v, "problem.psi", &["kind", "value", "path", "u_star", "factor"], &["kind"])?;
    let kind = c.string(obj, "kind", "problem.psi")?.to_string();
    let extra = |c: &mut Checker, allowed: &[&str]| {
        for k in obj.keys() {
            if k != "kind" && !allowed.contains(&k.as_str()) {
                c.errors.push(format!("problem.psi: key '{k}' does not apply to kind '{kind}'"));
            }
        }
        for r in allowed {
            if !obj.contains_key(*r) {
                c.errors.push(format!("problem.psi: kind '{kind}' requires key '{r}'"));
            }
        }
    };
    match kind.as_str() {
        "constant" => {
            extra(c, &["value"]);
            if let Some(x) = c.number(obj, "value", "problem.psi") {
                if x <= 0.0 {
                    c.errors.push(format!(
                        "problem.psi.value = {x}: degenerate ψ not supported (ellipticity requires psi > 0 everywhere)"
                    ));
                }
            }
        }
        "file" => {
            extra(c, &["path"]);
            c.string(obj, "path", "problem.psi");
        }
        "mms" => {
            extra(c, &["u_star"]);
            if let Some(u) = obj.get("u_star") {
                if let Some((name, params)) = c.named(u, "problem.psi.u_star") {
                    check_function(c, &name, &params, n, "problem.psi.u_star");
                }
            }
        }
        "subsolution-scaled" => {
            extra(c, &["factor"]);
            if let Some(f) = c.number(obj, "factor", "problem.psi") {
                if f <= 0.0 {
                    c.errors.push(format!("problem.psi.factor = {f}: degenerate ψ not supported (factor must be positive)"));
                }
            }
        }
        other => {
            c.errors.push(format!("problem.psi.kind: unknown kind '{other}' (supported: constant, file, mms, subsolution-scaled)"));
            return None;
        }
    }
    Some(kind)
}

fn check_function(c: &mut Checker, name: &str, params: &[f64], n: Option<usize>, path: &str) {
    match AnalyticFn::from_name(name, params) {
        Ok(f) => {
            if let Some(n) = n {
                if f.min_dimension() > n {
                    c.errors.push(format!("{path}: '{name}' needs n >= {}", f.min_dimension()));
                }
            }
        }
        Err(e) => c.errors.push(format!("{path}: {e}")),
    }
}

fn check_subsolution(c: &mut Checker, v: &Value, psi_kind: Option<&str>, n: Option<usize>) {
    let path = "problem.subsolution";
    let Some(obj) = c.object(v, path, &["kind", "name", "params", "path"], &["kind"]) else {
        return;
    };
    let Some(kind) = c.string(obj, "kind", path) else {
        return;
    };
    let only = |c: &mut Checker, allowed: &[&str], required: &[&str]| {
        for k in obj.keys() {
            if k != "kind" && !allowed.contains(&k.as_str()) {
                c.errors.push(format!("{path}: key '{k}' does not apply to kind '{kind}'"));
            }
        }
        for r in required {
            if !obj.contains_key(*r) {
                c.errors.push(format!("{path}: kind '{kind}' requires key '{r}'"));
            }
        }
    };
    match kind {
        "mms" => {
            only(c, &[], &[]);
            if psi_kind.is_some_and(|k| k != "mms") {
                c.errors.push(format!("{path}.kind 'mms' requires problem.psi.kind 'mms'"));
            }
        }
        "function" => {
            only(c, &["name", "params"], &["name"]);
            let name = c.string(obj, "name", path).map(str::to_string);
            let params = if obj.contains_key("params") { c.numbers(obj, "params", path) } else { Some(Vec::new()) };
            if let (Some(name), Some(params)) = (name, params) {
                check_function(c, &name, &params, n, path);
            }
        }
        "file" => {
            only(c, &["path"], &["path"]);
            c.string(obj, "path", path);
        }
        other => c.errors.push(format!("{path}.kind: unknown kind '{other}' (supported: mms, function, file)")),
    }
}

/// Sets `key.sub.leaf = value` in a JSON document; `value` is parsed as JSON
/// when possible and taken as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(vec![format!("override '{assignment}' is not of the form key=value")]))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(vec![format!("override '{assignment}' has an empty key")]));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    for k in &keys[..keys.len() - 1] {
        if !cur.is_object() {
            return Err(Error::Config(vec![format!("override '{assignment}': '{k}' is not inside an object")]));
        }
        cur = cur.as_object_mut().expect("checked object").entry(k.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    match cur.as_object_mut() {
        Some(obj) => {
            obj.insert(keys[keys.len() - 1].to_string(), value);
            Ok(())
        }
        None => Err(Error::Config(vec![format!("override '{assignment}': parent of the last key is not an object")])),
    }
}

/// Validates a JSON value and converts it to a typed document.
pub fn parse_config(doc: &Value) -> Result<ConfigDoc> {
    let errors = validate_config(doc);
    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    serde_json::from_value(doc.clone()).map_err(|e| Error::Config(vec![e.to_string()]))
}

/// Reads, overrides and validates a configuration file. Also returns the
/// JSON value after overrides.
pub fn load_config_with_overrides(path: &Path, overrides: &[String]) -> Result<(ConfigDoc, Value)> {
    let text = std::fs::read_to_string(path)?;
    let mut doc: Value = serde_json::from_str(&text)?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    Ok((parse_config(&doc)?, doc))
}

pub fn load_config(path: &Path) -> Result<ConfigDoc> {
    Ok(load_config_with_overrides(path, &[])?.0)
}

/// A constructed problem, with the exact solution for manufactured cases.
#[derive(Clone, Debug)]
pub struct BuiltProblem {
    pub problem: ProblemSpec,
    pub exact: Option<ScalarField>,
}

impl ConfigDoc {
    pub fn grid(&self, m: usize) -> Result<GridSpec> {
        let p = &self.problem;
        GridSpec::new(p.n, p.domain.lo.expand(2 * p.n), p.domain.hi.expand(2 * p.n), m)
    }

    pub fn metric(&self) -> Result<MetricField> {
        MetricField::builtin(&self.problem.metric.name, &self.problem.metric.params, self.problem.n)
    }

    pub fn chi(&self) -> Result<ChiForm> {
        ChiForm::from_name(&self.problem.chi.name, &self.problem.chi.params)
    }

    /// Grid sizes of a refinement study.
    pub fn refinement_levels(&self) -> Vec<usize> {
        self.refinement.clone().unwrap_or_else(|| vec![self.problem.m])
    }

    /// Builds the problem on an `m`-point grid; relative file paths are
    /// resolved against `base_dir`.
    pub fn build_problem(&self, m: usize, base_dir: &Path) -> Result<BuiltProblem> {
        let grid = self.grid(m)?;
        let metric = self.metric()?;
        let chi = self.chi()?;
        let load = |path: &str, what: &str| -> Result<ScalarField> {
            let full = base_dir.join(path);
            let (f, _) = read_field(&full)?;
            if f.spec() != &grid {
                return Err(Error::GridMismatch(format!(
                    "{what} file {} has n={} m={}, configured grid has n={} m={}",
                    full.display(),
                    f.spec().n(),
                    f.spec().m(),
                    grid.n(),
                    grid.m()
                )));
            }
            Ok(f)
        };

        let mms = match &self.problem.psi {
            PsiSpec::Mms { u_star } => {
                let f = AnalyticFn::from_name(&u_star.name, &u_star.params)?;
                Some(mms_generate(&metric, &chi, &f, &grid)?)
            }
            _ => None,
        };
        let usub = match &self.problem.subsolution {
            SubsolutionSpec::Mms => mms.as_ref().map(|p| p.exact.clone()).ok_or_else(|| {
                Error::Config(vec!["problem.subsolution.kind 'mms' requires problem.psi.kind 'mms'".into()])
            })?,
            SubsolutionSpec::Function { name, params } => ScalarField::sample(grid.clone(), &AnalyticFn::from_name(name, params)?)?,
            SubsolutionSpec::File { path } => load(path, "subsolution")?,
        };
        let psi = match &self.problem.psi {
            PsiSpec::Constant { value } => ScalarField::constant(grid.clone(), *value),
            PsiSpec::File { path } => load(path, "psi")?,
            PsiSpec::Mms { .. } => mms.as_ref().expect("built above").problem.psi.clone(),
            PsiSpec::SubsolutionScaled { factor } => {
                let base = equation_psi_field(&grid, &metric, &chi, &usub)?;
                ScalarField::new(grid.clone(), base.values().iter().map(|v| factor * v).collect())?
            }
        };
        let phi = match self.problem.phi {
            PhiSpec::Subsolution => usub.clone(),
            PhiSpec::Mms => mms.as_ref().map(|p| p.exact.clone()).ok_or_else(|| {
                Error::Config(vec!["problem.phi.kind 'mms' requires problem.psi.kind 'mms'".into()])
            })?,
        };
        let exact = mms.map(|p| p.exact);
        Ok(BuiltProblem { problem: ProblemSpec::new(metric, chi, psi, phi, usub)?, exact })
    }
}

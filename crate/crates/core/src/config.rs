//! JSON problem descriptions.
//!
//! A config names the past interval, the model, the initial history and the
//! solve window. Expressions are parsed while loading so that a typo fails
//! before any numerical work starts.

use std::collections::BTreeMap;
use std::path::Path as FsPath;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{self, Expr, ParseError, Scope};
use crate::functional::{
    build_constant_lag, build_ode, build_state_dependent, build_trivial, DelayFunctional, FunctionalError,
    HistoryFunctional, VectorField,
};
use crate::history::{HistoryError, InitialHistory, PastInterval, Segment};
use crate::solver::{LipschitzSource, SolveOptions};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("invalid config: {0}")]
    Schema(String),
    #[error("in {field}: {source}")]
    Parse { field: String, source: ParseError },
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    History(#[from] HistoryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum IntervalSpec {
    #[serde(rename = "compact")]
    Compact(f64),
    #[serde(rename = "whole")]
    Whole,
    #[serde(rename = "point")]
    Point,
}

/// A delay given either as a number or as an expression in `t` and `x[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DelaySpec {
    Constant(f64),
    Expr(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// `trivial`, `constant_lag`, `state_dependent`, `ode` or `builtin:pantograph`.
    pub kind: String,
    #[serde(default)]
    pub f: Vec<String>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub tau: Option<DelaySpec>,
    /// Velocity of the trivial functional.
    #[serde(default)]
    pub v: Option<Vec<f64>>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Known solution `x(t)` per component, used by the `ode_closed_form` oracle.
    #[serde(default)]
    pub closed_form: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HistorySpec {
    ClosedForm {
        expr: Vec<String>,
    },
    /// Uniform nodes on `[-r, 0]`; `values[j]` is the state at `grid[j]`.
    Sampled {
        grid: Vec<f64>,
        values: Vec<Vec<f64>>,
        #[serde(default)]
        derivatives: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveOverrides {
    pub grid_nodes_per_unit: Option<usize>,
    pub fixed_point_tol: Option<f64>,
    pub max_picard_iters: Option<usize>,
    pub radius: Option<f64>,
    pub t_cap: Option<f64>,
    pub t_min: Option<f64>,
    pub blow_threshold: Option<f64>,
    /// A fixed Lipschitz constant; otherwise it is estimated.
    pub lipschitz: Option<f64>,
    pub lipschitz_samples: Option<usize>,
    pub seed: Option<u64>,
    pub bound_samples: Option<usize>,
    pub max_refinements: Option<usize>,
    pub refine_tol: Option<f64>,
}

impl SolveOverrides {
    pub fn apply(&self, base: SolveOptions) -> SolveOptions {
        let mut o = base;
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { o.$f = v; })* };
        }
        set!(grid_nodes_per_unit, fixed_point_tol, max_picard_iters, radius, t_cap, t_min, blow_threshold, bound_samples, max_refinements, refine_tol);
        if let Some(l) = self.lipschitz {
            o.lipschitz_source = LipschitzSource::UserProvided(l);
        } else if self.lipschitz_samples.is_some() || self.seed.is_some() {
            let (mut samples, mut seed) = match o.lipschitz_source {
                LipschitzSource::Estimated { samples, seed } => (samples, seed),
                LipschitzSource::UserProvided(_) => (32, 0x5eed),
            };
            samples = self.lipschitz_samples.unwrap_or(samples);
            seed = self.seed.unwrap_or(seed);
            o.lipschitz_source = LipschitzSource::Estimated { samples, seed };
        }
        o
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub schema: u32,
    pub n: usize,
    pub past_interval: IntervalSpec,
    pub model: ModelSpec,
    pub initial_history: HistorySpec,
    #[serde(default)]
    pub t0: f64,
    /// Absolute end time of the solve window.
    pub horizon: f64,
    #[serde(default)]
    pub solve: SolveOverrides,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelKind {
    Trivial,
    ConstantLag,
    StateDependent,
    Ode,
    Pantograph,
}

/// Pantograph parameters for `x'(t) = a·x(λt) + b·x(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PantographParams {
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
}

/// A validated config with every expression compiled.
#[derive(Clone)]
pub struct Problem {
    pub config: ProblemConfig,
    pub interval: PastInterval,
    pub kind: ModelKind,
    pub functional: HistoryFunctional,
    pub initial: InitialHistory,
    pub options: SolveOptions,
    /// `f(t, x, y)` and `r` for constant-lag models.
    pub lag_field: Option<(VectorField, f64)>,
    pub pantograph: Option<PantographParams>,
    pub closed_form: Option<Vec<Expr>>,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn interval(&self) -> Result<PastInterval, ConfigError> {
        match self.past_interval {
            IntervalSpec::Compact(r) => Ok(PastInterval::compact(r)?),
            IntervalSpec::Whole => Ok(PastInterval::WholePast),
            IntervalSpec::Point => Ok(PastInterval::Point),
        }
    }

    pub fn compile(&self) -> Result<Problem, ConfigError> {
        Problem::new(self.clone())
    }
}

fn schema(msg: impl Into<String>) -> ConfigError {
    ConfigError::Schema(msg.into())
}

fn parse_all(srcs: &[String], scope: Scope, field: &str) -> Result<Vec<Expr>, ConfigError> {
    srcs.iter()
        .enumerate()
        .map(|(i, s)| {
            dsl::parse_in(s, scope).map_err(|source| ConfigError::Parse { field: format!("{field}[{i}]"), source })
        })
        .collect()
}

fn expect_len<T>(v: &[T], n: usize, field: &str) -> Result<(), ConfigError> {
    if v.len() != n {
        return Err(schema(format!("{field} has {} entries, expected n = {n}", v.len())));
    }
    Ok(())
}

impl Problem {
    pub fn new(config: ProblemConfig) -> Result<Self, ConfigError> {
        if config.schema != SCHEMA_VERSION {
            return Err(schema(format!("unsupported schema {}, expected {SCHEMA_VERSION}", config.schema)));
        }
        let n = config.n;
        if n == 0 {
            return Err(schema("n must be positive"));
        }
        if !(config.t0.is_finite() && config.horizon.is_finite() && config.horizon > config.t0) {
            return Err(schema(format!("horizon {} must exceed t0 {}", config.horizon, config.t0)));
        }
        let interval = config.interval()?;
        let options = config.solve.apply(SolveOptions::default());
        options.validate().map_err(|e| schema(e.to_string()))?;
        let model = &config.model;

        let closed_form = match &model.closed_form {
            Some(srcs) => {
                expect_len(srcs, n, "model.closed_form")?;
                Some(parse_all(srcs, Scope::time(), "model.closed_form")?)
            }
            None => None,
        };

        let field = |srcs: &[String]| -> Result<VectorField, ConfigError> {
            expect_len(srcs, n, "model.f")?;
            Ok(dsl::vector_field(parse_all(srcs, Scope::field(n), "model.f")?))
        };

        let mut lag_field = None;
        let mut pantograph = None;
        let (kind, functional) = match model.kind.as_str() {
            "trivial" => {
                let v = model.v.clone().unwrap_or_else(|| vec![0.0; n]);
                expect_len(&v, n, "model.v")?;
                (ModelKind::Trivial, build_trivial(v, interval).with_dim(n))
            }
            "constant_lag" => {
                let r = model.r.ok_or_else(|| schema("constant_lag needs model.r"))?;
                let f = field(&model.f)?;
                lag_field = Some((f.clone(), r));
                (ModelKind::ConstantLag, build_constant_lag(f, r, interval)?.with_dim(n))
            }
            "state_dependent" => {
                let tau = match &model.tau {
                    Some(DelaySpec::Constant(r)) => DelayFunctional::constant(*r),
                    Some(DelaySpec::Expr(src)) => dsl::delay(
                        dsl::parse_in(src, Scope::delay(n))
                            .map_err(|source| ConfigError::Parse { field: "model.tau".into(), source })?,
                    ),
                    None => return Err(schema("state_dependent needs model.tau")),
                };
                let f = field(&model.f)?;
                (ModelKind::StateDependent, build_state_dependent(f, tau, interval)?.with_dim(n))
            }
            "ode" => {
                expect_len(&model.f, n, "model.f")?;
                let exprs = parse_all(&model.f, Scope::delay(n), "model.f")?;
                (ModelKind::Ode, build_ode(dsl::ode_field(exprs), interval)?.with_dim(n))
            }
            "builtin:pantograph" => {
                if n != 1 {
                    return Err(schema("builtin:pantograph is scalar (n = 1)"));
                }
                if config.t0 < 0.0 {
                    return Err(schema("builtin:pantograph needs t0 >= 0"));
                }
                let p = |k: &str, d: f64| model.params.get(k).copied().unwrap_or(d);
                let params = PantographParams { a: p("a", 1.0), b: p("b", 0.0), lambda: p("lambda", 0.5) };
                if let Some(k) = model.params.keys().find(|k| !["a", "b", "lambda"].contains(&k.as_str())) {
                    return Err(schema(format!("unknown pantograph parameter '{k}'")));
                }
                if !(params.lambda > 0.0 && params.lambda < 1.0) {
                    return Err(schema("pantograph lambda must lie in (0, 1)"));
                }
                pantograph = Some(params);
                let PantographParams { a, b, lambda } = params;
                let f: VectorField = Arc::new(move |_t, x, y, out| {
                    out[0] = a * y[0] + b * x[0];
                    Ok(())
                });
                // x(λt) sits at lag (1 - λ)t behind t
                let tau = DelayFunctional::time_varying(Arc::new(move |t| Ok((1.0 - lambda) * t)));
                (ModelKind::Pantograph, build_state_dependent(f, tau, interval)?.with_dim(n).with_name("pantograph"))
            }
            other => return Err(schema(format!("unknown model kind '{other}'"))),
        };

        let initial = build_history(&config.initial_history, interval, n)?;
        Ok(Problem { config, interval, kind, functional, initial, options, lag_field, pantograph, closed_form })
    }

    pub fn t0(&self) -> f64 {
        self.config.t0
    }

    pub fn horizon(&self) -> f64 {
        self.config.horizon
    }

    pub fn dim(&self) -> usize {
        self.config.n
    }
}

fn build_history(spec: &HistorySpec, interval: PastInterval, n: usize) -> Result<InitialHistory, ConfigError> {
    match spec {
        HistorySpec::ClosedForm { expr } => {
            expect_len(expr, n, "initial_history.expr")?;
            Ok(dsl::history(interval, parse_all(expr, Scope::history(), "initial_history.expr")?)?)
        }
        HistorySpec::Sampled { grid, values, derivatives } => {
            let PastInterval::Compact(r) = interval else {
                return Err(schema("sampled histories need a compact past interval"));
            };
            let m = grid.len();
            if m < 2 || values.len() != m {
                return Err(schema("sampled history needs at least two grid points and one value per point"));
            }
            let h = r / (m - 1) as f64;
            for (j, &g) in grid.iter().enumerate() {
                if (g - (-r + j as f64 * h)).abs() > 1e-9 * r.max(1.0) {
                    return Err(schema(format!("sampled grid must be uniform on [-{r}, 0]; grid[{j}] = {g}")));
                }
            }
            for row in values {
                expect_len(row, n, "initial_history.values[*]")?;
            }
            let flat: Vec<f64> = values.iter().flatten().copied().collect();
            let derivs = match derivatives {
                Some(d) => {
                    if d.len() != m {
                        return Err(schema("initial_history.derivatives needs one row per grid point"));
                    }
                    for row in d {
                        expect_len(row, n, "initial_history.derivatives[*]")?;
                    }
                    d.iter().flatten().copied().collect()
                }
                None => finite_difference(&flat, m, n, h),
            };
            let seg = Segment::new(-r, 0.0, n, flat, derivs)?;
            Ok(InitialHistory::sampled(interval, seg)?)
        }
    }
}

/// Second-order node slopes for samples given without derivatives.
fn finite_difference(v: &[f64], m: usize, n: usize, h: f64) -> Vec<f64> {
    let at = |j: usize, i: usize| v[j * n + i];
    let mut d = vec![0.0; m * n];
    for j in 0..m {
        for i in 0..n {
            d[j * n + i] = if m == 2 {
                (at(1, i) - at(0, i)) / h
            } else if j == 0 {
                (-3.0 * at(0, i) + 4.0 * at(1, i) - at(2, i)) / (2.0 * h)
            } else if j == m - 1 {
                (3.0 * at(j, i) - 4.0 * at(j - 1, i) + at(j - 2, i)) / (2.0 * h)
            } else {
                (at(j + 1, i) - at(j - 1, i)) / (2.0 * h)
            };
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::History;

    const LAG: &str = r#"{
        "schema": 1, "n": 1, "past_interval": {"compact": 1.0},
        "model": {"kind": "constant_lag", "f": ["-y[0]"], "r": 1.0},
        "initial_history": {"kind": "closed_form", "expr": ["1"]},
        "t0": 0.0, "horizon": 3.0
    }"#;

    #[test]
    fn loads_constant_lag() {
        let p = ProblemConfig::from_json(LAG).unwrap().compile().unwrap();
        assert_eq!(p.kind, ModelKind::ConstantLag);
        assert_eq!(p.interval, PastInterval::Compact(1.0));
        let out = p.functional.eval(0.0, &p.initial).unwrap();
        assert_eq!(out, vec![-1.0]);
    }

    #[test]
    fn malformed_json_has_position() {
        let err = ProblemConfig::from_json("{\n  \"schema\": 1,\n  oops\n}").unwrap_err();
        match err {
            ConfigError::Json { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn parse_errors_surface_at_load() {
        let bad = LAG.replace("-y[0]", "a*y[0]");
        let err = ProblemConfig::from_json(&bad).unwrap().compile().err().unwrap();
        assert!(matches!(err, ConfigError::Parse { ref field, .. } if field == "model.f[0]"), "{err}");
    }

    #[test]
    fn schema_checks() {
        let bad = LAG.replace("\"schema\": 1", "\"schema\": 2");
        assert!(matches!(ProblemConfig::from_json(&bad).unwrap().compile(), Err(ConfigError::Schema(_))));
        let bad = LAG.replace("constant_lag", "nope");
        assert!(matches!(ProblemConfig::from_json(&bad).unwrap().compile(), Err(ConfigError::Schema(_))));
        let bad = LAG.replace("\"horizon\": 3.0", "\"horizon\": 3.0, \"extra\": 1");
        assert!(ProblemConfig::from_json(&bad).is_err());
    }

    #[test]
    fn sampled_history() {
        let text = r#"{
            "schema": 1, "n": 1, "past_interval": {"compact": 1.0},
            "model": {"kind": "trivial", "v": [1.0]},
            "initial_history": {"kind": "sampled", "grid": [-1.0, -0.5, 0.0], "values": [[1.0], [2.0], [3.0]]},
            "horizon": 1.0
        }"#;
        let p = ProblemConfig::from_json(text).unwrap().compile().unwrap();
        assert_eq!(History::eval(&p.initial, -0.25).unwrap(), vec![2.5]);
    }

    #[test]
    fn pantograph_and_overrides() {
        let text = r#"{
            "schema": 1, "n": 1, "past_interval": "whole",
            "model": {"kind": "builtin:pantograph", "params": {"lambda": 0.5}},
            "initial_history": {"kind": "closed_form", "expr": ["1"]},
            "horizon": 2.0, "solve": {"lipschitz": 1.0, "t_cap": 0.1}
        }"#;
        let p = ProblemConfig::from_json(text).unwrap().compile().unwrap();
        assert_eq!(p.pantograph, Some(PantographParams { a: 1.0, b: 0.0, lambda: 0.5 }));
        assert_eq!(p.options.lipschitz_source, LipschitzSource::UserProvided(1.0));
        assert_eq!(p.options.t_cap, 0.1);
    }
}

//! History functionals `F(t, φ)`, builders for the standard equation classes
//! and sampled Lipschitz estimators.

mod delay;
mod lipschitz;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::history::{History, HistoryError, PastInterval};

pub use delay::DelayFunctional;
pub use lipschitz::{
    check_constancy_about_memories, estimate_lipschitz, EstimateRequest, LipschitzEstimate, LipschitzMode, PairRecord,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FunctionalError {
    #[error("delay {delay} is outside the past interval {interval}")]
    DelayExceedsInterval { delay: f64, interval: PastInterval },
    #[error("interval mismatch: {0}")]
    IntervalMismatch(String),
    #[error("({t}, φ) is outside the domain of the functional")]
    OutsideDomain { t: f64 },
    #[error("evaluation failed: {0}")]
    Eval(String),
    #[error("no valid sample pairs among {drawn} draws")]
    NoValidPairs { drawn: usize },
    #[error(transparent)]
    History(#[from] HistoryError),
}

/// Right-hand side `f(t, x, y)` of a single-delay equation; writes into `out`.
pub type VectorField = Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64]) -> Result<(), FunctionalError> + Send + Sync>;
/// Right-hand side `f(t, x)` of an ODE.
pub type OdeField = Arc<dyn Fn(f64, &[f64], &mut [f64]) -> Result<(), FunctionalError> + Send + Sync>;
pub type EvalFn = Arc<dyn Fn(f64, &dyn History, &mut [f64]) -> Result<(), FunctionalError> + Send + Sync>;
pub type DomainFn = Arc<dyn Fn(f64, &dyn History) -> bool + Send + Sync>;

/// A history functional `F: D → E` with `D ⊆ ℝ × C(I, E)`.
#[derive(Clone)]
pub struct HistoryFunctional {
    dim: Option<usize>,
    interval: PastInterval,
    eval: EvalFn,
    in_domain: Option<DomainFn>,
    delay_depth: Option<f64>,
    lags: Vec<f64>,
    name: String,
}

impl fmt::Debug for HistoryFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HistoryFunctional")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("interval", &self.interval)
            .field("delay_depth", &self.delay_depth)
            .finish()
    }
}

impl HistoryFunctional {
    pub fn new(interval: PastInterval, eval: EvalFn) -> Self {
        HistoryFunctional { dim: None, interval, eval, in_domain: None, delay_depth: None, lags: Vec::new(), name: "custom".into() }
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = Some(dim);
        self
    }

    pub fn with_domain(mut self, in_domain: DomainFn) -> Self {
        self.in_domain = Some(in_domain);
        self
    }

    pub fn with_delay_depth(mut self, depth: f64) -> Self {
        self.delay_depth = Some(depth);
        self
    }

    /// Fixed lags at which `F` reads the history; derivative jumps of the
    /// solution propagate forward by these amounts.
    pub fn with_lags(mut self, lags: Vec<f64>) -> Self {
        self.lags = lags;
        self
    }

    pub fn lags(&self) -> &[f64] {
        &self.lags
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// State dimension, when fixed by the builder.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn interval(&self) -> PastInterval {
        self.interval
    }

    /// Maximal lookback; `None` when unbounded.
    pub fn delay_depth(&self) -> Option<f64> {
        self.delay_depth
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn in_domain(&self, t: f64, phi: &dyn History) -> bool {
        self.in_domain.as_ref().is_none_or(|d| d(t, phi))
    }

    pub fn eval_into(&self, t: f64, phi: &dyn History, out: &mut [f64]) -> Result<(), FunctionalError> {
        let n = phi.dim();
        if let Some(d) = self.dim {
            if d != n {
                return Err(HistoryError::DimensionMismatch { expected: d, found: n }.into());
            }
        }
        if out.len() != n {
            return Err(HistoryError::DimensionMismatch { expected: n, found: out.len() }.into());
        }
        if !self.in_domain(t, phi) {
            return Err(FunctionalError::OutsideDomain { t });
        }
        (self.eval)(t, phi, out)?;
        if out.iter().any(|x| !x.is_finite()) {
            return Err(FunctionalError::Eval(format!("non-finite value at t = {t}")));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, phi: &dyn History) -> Result<Vec<f64>, FunctionalError> {
        let mut out = vec![0.0; phi.dim()];
        self.eval_into(t, phi, &mut out)?;
        Ok(out)
    }
}

/// `ẋ = v`.
pub fn build_trivial(v: Vec<f64>, interval: PastInterval) -> HistoryFunctional {
    let dim = v.len();
    HistoryFunctional::new(
        interval,
        Arc::new(move |_, _, out| {
            out.copy_from_slice(&v);
            Ok(())
        }),
    )
    .with_dim(dim)
    .with_delay_depth(0.0)
    .with_name("trivial")
}

/// `F(t, φ) = f(t, φ(0), φ(-r))`.
pub fn build_constant_lag(f: VectorField, r: f64, interval: PastInterval) -> Result<HistoryFunctional, FunctionalError> {
    if !(r > 0.0) || !interval.contains(-r) {
        return Err(FunctionalError::DelayExceedsInterval { delay: r, interval });
    }
    Ok(HistoryFunctional::new(
        interval,
        Arc::new(move |t, phi, out| {
            let n = phi.dim();
            let mut xy = vec![0.0; 2 * n];
            let (x, y) = xy.split_at_mut(n);
            phi.eval_into(0.0, x)?;
            phi.eval_into(-r, y)?;
            f(t, x, y, out)
        }),
    )
    .with_delay_depth(r)
    .with_lags(vec![r])
    .with_name("constant_lag"))
}

/// `F_{f,τ}(t, φ) = f(t, φ(0), φ(-τ(t, φ)))`.
pub fn build_state_dependent(
    f: VectorField,
    tau: DelayFunctional,
    interval: PastInterval,
) -> Result<HistoryFunctional, FunctionalError> {
    if interval.is_point() {
        return Err(FunctionalError::IntervalMismatch(
            "state-dependent delays need a non-degenerate past interval".into(),
        ));
    }
    let depth = match interval {
        PastInterval::Compact(r) => Some(r),
        _ => None,
    };
    let domain_tau = tau.clone();
    let mut func = HistoryFunctional::new(
        interval,
        Arc::new(move |t, phi, out| {
            let d = tau.eval(t, phi)?;
            let d = checked_delay(d, interval)?;
            let n = phi.dim();
            let mut xy = vec![0.0; 2 * n];
            let (x, y) = xy.split_at_mut(n);
            phi.eval_into(0.0, x)?;
            phi.eval_into(-d, y)?;
            f(t, x, y, out)
        }),
    )
    .with_domain(Arc::new(move |t, phi| domain_tau.in_domain(t, phi)))
    .with_name("state_dependent");
    if let Some(r) = depth {
        func = func.with_delay_depth(r);
    }
    Ok(func)
}

/// Accepts `d ∈ -I`, absorbing rounding at the far end of a compact interval.
fn checked_delay(d: f64, interval: PastInterval) -> Result<f64, FunctionalError> {
    let bad = || FunctionalError::DelayExceedsInterval { delay: d, interval };
    if !d.is_finite() || d < -1e-12 {
        return Err(bad());
    }
    let d = d.max(0.0);
    match interval {
        PastInterval::Compact(r) if d > r => {
            if d <= r * (1.0 + 1e-12) {
                Ok(r)
            } else {
                Err(bad())
            }
        }
        _ => Ok(d),
    }
}

/// `F_f(t, φ) = f(t, φ(0))` on the point interval.
pub fn build_ode(f: OdeField, interval: PastInterval) -> Result<HistoryFunctional, FunctionalError> {
    if !interval.is_point() {
        return Err(FunctionalError::IntervalMismatch(format!(
            "ODE functionals live on the point interval, not {interval}"
        )));
    }
    Ok(HistoryFunctional::new(
        interval,
        Arc::new(move |t, phi, out| {
            let x = phi.head()?;
            f(t, &x, out)
        }),
    )
    .with_delay_depth(0.0)
    .with_name("ode"))
}

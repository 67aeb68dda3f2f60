use std::fmt;
use std::sync::Arc;

use super::{DomainFn, FunctionalError};
use crate::history::History;

type DelayFn = Arc<dyn Fn(f64, &dyn History) -> Result<f64, FunctionalError> + Send + Sync>;

/// A delay `τ(t, φ) ≥ 0` with values in `-I`.
#[derive(Clone)]
pub struct DelayFunctional {
    eval: DelayFn,
    in_domain: Option<DomainFn>,
    name: String,
}

impl fmt::Debug for DelayFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DelayFunctional").field("name", &self.name).finish()
    }
}

impl DelayFunctional {
    pub fn custom(eval: DelayFn) -> Self {
        DelayFunctional { eval, in_domain: None, name: "custom".into() }
    }

    pub fn constant(r: f64) -> Self {
        DelayFunctional { name: "constant".into(), ..Self::custom(Arc::new(move |_, _| Ok(r))) }
    }

    /// `τ(t)`.
    pub fn time_varying(tau: Arc<dyn Fn(f64) -> Result<f64, FunctionalError> + Send + Sync>) -> Self {
        DelayFunctional { name: "time_varying".into(), ..Self::custom(Arc::new(move |t, _| tau(t))) }
    }

    /// `τ(t, φ(0))`.
    pub fn of_state(tau: Arc<dyn Fn(f64, &[f64]) -> Result<f64, FunctionalError> + Send + Sync>) -> Self {
        let eval: DelayFn = Arc::new(move |t, phi| tau(t, &phi.head()?));
        DelayFunctional { name: "state".into(), ..Self::custom(eval) }
    }

    /// `τ(t, φ) = τ0(t, φ(-δ(t)))`, which ignores `φ` on `(-δ(t), 0]`.
    pub fn at_offset(
        tau0: Arc<dyn Fn(f64, &[f64]) -> Result<f64, FunctionalError> + Send + Sync>,
        offset: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    ) -> Self {
        let eval: DelayFn = Arc::new(move |t, phi| {
            let y = phi.eval(-offset(t))?;
            tau0(t, &y)
        });
        DelayFunctional { name: "at_offset".into(), ..Self::custom(eval) }
    }

    pub fn with_domain(mut self, in_domain: DomainFn) -> Self {
        self.in_domain = Some(in_domain);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn in_domain(&self, t: f64, phi: &dyn History) -> bool {
        self.in_domain.as_ref().is_none_or(|d| d(t, phi))
    }

    pub fn eval(&self, t: f64, phi: &dyn History) -> Result<f64, FunctionalError> {
        if !self.in_domain(t, phi) {
            return Err(FunctionalError::OutsideDomain { t });
        }
        (self.eval)(t, phi)
    }
}

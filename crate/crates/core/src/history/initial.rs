use std::fmt;
use std::sync::Arc;

use super::{segment_knot_slope, segment_knots, History, HistoryError, PastInterval, Path, Segment};

/// Closed-form history body `θ ↦ φ(θ)`.
pub type HistoryFn = Arc<dyn Fn(f64, &mut [f64]) -> Result<(), HistoryError> + Send + Sync>;

#[derive(Clone)]
pub enum HistoryBody {
    ClosedForm(HistoryFn),
    /// Hermite samples spanning exactly `[-r, 0]`.
    Sampled(Segment),
    /// The history of another path at `anchor`; used to restart a solve from
    /// a state of the solution process.
    Tail { source: Arc<dyn Path>, anchor: f64 },
}

impl fmt::Debug for HistoryBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HistoryBody::ClosedForm(_) => f.write_str("ClosedForm(..)"),
            HistoryBody::Sampled(seg) => f.debug_tuple("Sampled").field(seg).finish(),
            HistoryBody::Tail { anchor, .. } => f.debug_struct("Tail").field("anchor", anchor).finish(),
        }
    }
}

/// The initial history `φ0` of an initial value problem.
#[derive(Clone, Debug)]
pub struct InitialHistory {
    interval: PastInterval,
    dim: usize,
    body: HistoryBody,
    value_at_zero: Vec<f64>,
    derivative_at_zero_minus: Option<Vec<f64>>,
}

impl InitialHistory {
    pub fn closed_form(interval: PastInterval, dim: usize, body: HistoryFn) -> Result<Self, HistoryError> {
        let mut value_at_zero = vec![0.0; dim];
        body(0.0, &mut value_at_zero)?;
        Ok(InitialHistory {
            interval,
            dim,
            body: HistoryBody::ClosedForm(body),
            value_at_zero,
            derivative_at_zero_minus: None,
        })
    }

    pub fn from_fn<F>(interval: PastInterval, dim: usize, f: F) -> Result<Self, HistoryError>
    where
        F: Fn(f64, &mut [f64]) + Send + Sync + 'static,
    {
        Self::closed_form(
            interval,
            dim,
            Arc::new(move |theta, out| {
                f(theta, out);
                Ok(())
            }),
        )
    }

    pub fn constant(interval: PastInterval, c: Vec<f64>) -> Self {
        let dim = c.len();
        let value = c.clone();
        let mut init = Self::from_fn(interval, dim, move |_, out| out.copy_from_slice(&value))
            .expect("constant history is total");
        if !interval.is_point() {
            init.derivative_at_zero_minus = Some(vec![0.0; dim]);
        }
        init.value_at_zero = c;
        init
    }

    /// ODE initial state `x(t0) = x0` on the point interval.
    pub fn point(x0: Vec<f64>) -> Self {
        Self::constant(PastInterval::Point, x0)
    }

    pub fn sampled(interval: PastInterval, segment: Segment) -> Result<Self, HistoryError> {
        let r = match interval {
            PastInterval::Compact(r) => r,
            _ => {
                return Err(HistoryError::InvalidInitial(
                    "sampled histories require a compact past interval".into(),
                ))
            }
        };
        if (segment.t_start() + r).abs() > 1e-12 || segment.t_end().abs() > 1e-12 {
            return Err(HistoryError::InvalidInitial(format!(
                "sampled span [{}, {}] must be exactly [-{r}, 0]",
                segment.t_start(),
                segment.t_end()
            )));
        }
        let n = segment.cells();
        Ok(InitialHistory {
            interval,
            dim: segment.dim(),
            value_at_zero: segment.value(n).to_vec(),
            derivative_at_zero_minus: Some(segment.deriv(n).to_vec()),
            body: HistoryBody::Sampled(segment),
        })
    }

    /// The history `I_anchor x` of `source`, frozen as a new initial history.
    pub fn tail(source: Arc<dyn Path>, anchor: f64) -> Result<Self, HistoryError> {
        let dim = source.dim();
        let mut value_at_zero = vec![0.0; dim];
        source.eval_into(anchor, &mut value_at_zero)?;
        Ok(InitialHistory {
            interval: source.interval(),
            dim,
            body: HistoryBody::Tail { source, anchor },
            value_at_zero,
            derivative_at_zero_minus: None,
        })
    }

    pub fn with_derivative_at_zero(mut self, d: Vec<f64>) -> Self {
        self.derivative_at_zero_minus = Some(d);
        self
    }

    /// `φ0 + scale·η`, with `η` a closed-form perturbation.
    pub fn perturbed(&self, eta: HistoryFn, scale: f64) -> Result<Self, HistoryError> {
        let base = self.clone();
        let dim = self.dim;
        Self::closed_form(
            self.interval,
            dim,
            Arc::new(move |theta, out| {
                History::eval_into(&base, theta, out)?;
                let mut e = vec![0.0; out.len()];
                eta(theta, &mut e)?;
                for (o, e) in out.iter_mut().zip(e) {
                    *o += scale * e;
                }
                Ok(())
            }),
        )
    }

    pub fn body(&self) -> &HistoryBody {
        &self.body
    }

    /// Derivative jumps inside `I`, as `θ` values. Only restarted histories
    /// carry any.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.body {
            HistoryBody::Tail { source, anchor } => {
                source.breakpoints().into_iter().filter(|b| *b <= *anchor).map(|b| b - anchor).collect()
            }
            _ => Vec::new(),
        }
    }

    pub fn value_at_zero(&self) -> &[f64] {
        &self.value_at_zero
    }

    pub fn derivative_at_zero_minus(&self) -> Option<&[f64]> {
        self.derivative_at_zero_minus.as_deref()
    }
}

impl History for InitialHistory {
    fn dim(&self) -> usize {
        self.dim
    }

    fn interval(&self) -> PastInterval {
        self.interval
    }

    fn eval_into(&self, theta: f64, out: &mut [f64]) -> Result<(), HistoryError> {
        if out.len() != self.dim {
            return Err(HistoryError::DimensionMismatch { expected: self.dim, found: out.len() });
        }
        if !self.interval.contains(theta) {
            return Err(HistoryError::OutOfDomain { t: theta, lower: self.interval.lower(), upper: 0.0 });
        }
        if theta == 0.0 {
            out.copy_from_slice(&self.value_at_zero);
            return Ok(());
        }
        match &self.body {
            HistoryBody::ClosedForm(f) => f(theta, out),
            HistoryBody::Sampled(seg) => seg.eval_into(theta.max(seg.t_start()), out),
            HistoryBody::Tail { source, anchor } => source.eval_into(anchor + theta, out),
        }
    }

    fn knots(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        match &self.body {
            HistoryBody::ClosedForm(_) => {}
            HistoryBody::Sampled(seg) => segment_knots(seg, lo, hi, out),
            HistoryBody::Tail { source, anchor } => {
                let from = out.len();
                source.knots(anchor + lo, anchor + hi, out);
                for k in &mut out[from..] {
                    *k -= anchor;
                }
            }
        }
    }

    fn knot_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        match &self.body {
            HistoryBody::ClosedForm(_) => None,
            HistoryBody::Sampled(seg) => segment_knot_slope(seg, lo, hi),
            HistoryBody::Tail { source, anchor } => source.knot_slope(anchor + lo, anchor + hi),
        }
    }
}

/// As a path, an initial history lives on `I` itself (anchor 0).
impl Path for InitialHistory {
    fn dim(&self) -> usize {
        self.dim
    }

    fn interval(&self) -> PastInterval {
        self.interval
    }

    fn start(&self) -> f64 {
        self.interval.lower()
    }

    fn end(&self) -> f64 {
        0.0
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), HistoryError> {
        History::eval_into(self, t, out)
    }

    fn knots(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        History::knots(self, lo, hi, out)
    }

    fn knot_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        History::knot_slope(self, lo, hi)
    }

    fn breakpoints(&self) -> Vec<f64> {
        InitialHistory::breakpoints(self)
    }
}

//! Past intervals, histories, prolongations and trajectories.
//!
//! Two function shapes appear throughout the crate. A [`Path`] is a map of
//! absolute time (`x: J + I -> R^n`); a [`History`] is a map on the past
//! interval (`θ ∈ I -> R^n`). A [`HistoryView`] turns a path into the history
//! `I_t x` at an anchor time `t`.

mod initial;
mod interval;
mod metrics;
mod segment;
mod trajectory;

use thiserror::Error;

pub use initial::{HistoryBody, HistoryFn, InitialHistory};
pub use interval::PastInterval;
pub use metrics::{lip_const, sup_norm, sup_norm_diff, support_of_difference, ProbeGrid};
pub use segment::{rho0, rho1, Segment};
pub use trajectory::{ProcessState, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HistoryError {
    #[error("time {t} lies outside the domain [{lower}, {upper}]")]
    OutOfDomain { t: f64, lower: f64, upper: f64 },
    #[error("segments do not share a span and grid: {left:?} vs {right:?}")]
    SpanMismatch { left: (f64, f64, usize), right: (f64, f64, usize) },
    #[error("expected a vector of dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("past interval length must be positive and finite, got {0}")]
    InvalidInterval(f64),
    #[error("invalid segment: {0}")]
    InvalidSegment(String),
    #[error("invalid initial history: {0}")]
    InvalidInitial(String),
    #[error("segment starting at {start} does not continue the trajectory ending at {end}")]
    Discontinuous { start: f64, end: f64 },
    #[error("history evaluation failed: {0}")]
    Eval(String),
}

/// A function on the past interval.
pub trait History: Send + Sync {
    fn dim(&self) -> usize;

    fn interval(&self) -> PastInterval;

    fn eval_into(&self, theta: f64, out: &mut [f64]) -> Result<(), HistoryError>;

    /// Interpolation knots in `[lo, hi]` (θ coordinates), appended to `out`.
    fn knots(&self, _lo: f64, _hi: f64, _out: &mut Vec<f64>) {}

    /// Largest stored derivative (∞-norm) at knots in `[lo, hi]`, when known.
    fn knot_slope(&self, _lo: f64, _hi: f64) -> Option<f64> {
        None
    }

    fn eval(&self, theta: f64) -> Result<Vec<f64>, HistoryError> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(theta, &mut out)?;
        Ok(out)
    }

    /// `φ(0)`.
    fn head(&self) -> Result<Vec<f64>, HistoryError> {
        self.eval(0.0)
    }
}

/// A function of absolute time whose histories live on [`Path::interval`].
pub trait Path: Send + Sync {
    fn dim(&self) -> usize;

    fn interval(&self) -> PastInterval;

    /// Earliest time at which the path is defined (may be `-inf`).
    fn start(&self) -> f64;

    /// Latest time at which the path is defined (may be `+inf`).
    fn end(&self) -> f64;

    fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), HistoryError>;

    fn knots(&self, _lo: f64, _hi: f64, _out: &mut Vec<f64>) {}

    fn knot_slope(&self, _lo: f64, _hi: f64) -> Option<f64> {
        None
    }

    /// Times at which the derivative may jump.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    fn eval(&self, t: f64) -> Result<Vec<f64>, HistoryError> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    /// The history `I_t x` of this path at `t`.
    fn history_at(&self, t: f64) -> HistoryView<'_>
    where
        Self: Sized,
    {
        HistoryView::new(self, t)
    }
}

impl<P: Path + ?Sized> Path for std::sync::Arc<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn interval(&self) -> PastInterval {
        (**self).interval()
    }
    fn start(&self) -> f64 {
        (**self).start()
    }
    fn end(&self) -> f64 {
        (**self).end()
    }
    fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), HistoryError> {
        (**self).eval_into(t, out)
    }
    fn knots(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        (**self).knots(lo, hi, out)
    }
    fn knot_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        (**self).knot_slope(lo, hi)
    }
    fn breakpoints(&self) -> Vec<f64> {
        (**self).breakpoints()
    }
}

/// The history `θ ↦ x(anchor + θ)` of a path.
#[derive(Clone, Copy)]
pub struct HistoryView<'a> {
    path: &'a dyn Path,
    anchor: f64,
}

impl<'a> HistoryView<'a> {
    pub fn new(path: &'a dyn Path, anchor: f64) -> Self {
        HistoryView { path, anchor }
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn path(&self) -> &'a dyn Path {
        self.path
    }

    /// Moves the anchor forward by `dt`; views compose by adding anchors.
    pub fn advanced(&self, dt: f64) -> HistoryView<'a> {
        HistoryView { path: self.path, anchor: self.anchor + dt }
    }
}

impl History for HistoryView<'_> {
    fn dim(&self) -> usize {
        self.path.dim()
    }

    fn interval(&self) -> PastInterval {
        self.path.interval()
    }

    fn eval_into(&self, theta: f64, out: &mut [f64]) -> Result<(), HistoryError> {
        let interval = self.path.interval();
        if !interval.contains(theta) {
            return Err(HistoryError::OutOfDomain { t: theta, lower: interval.lower(), upper: 0.0 });
        }
        self.path.eval_into(self.anchor + theta, out)
    }

    fn knots(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        let from = out.len();
        self.path.knots(self.anchor + lo, self.anchor + hi, out);
        for k in &mut out[from..] {
            *k -= self.anchor;
        }
    }

    fn knot_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        self.path.knot_slope(self.anchor + lo, self.anchor + hi)
    }
}

/// A prolongation `γ` of `(σ, ψ)`: equal to `ψ(t - σ)` up to `σ` and to the
/// stored segment on `[σ, σ + T]`.
#[derive(Clone, Copy)]
pub struct Prolongation<'a> {
    base: &'a dyn History,
    sigma: f64,
    segment: &'a Segment,
}

impl<'a> Prolongation<'a> {
    pub fn new(base: &'a dyn History, segment: &'a Segment) -> Self {
        Prolongation { base, sigma: segment.t_start(), segment }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn segment(&self) -> &'a Segment {
        self.segment
    }

    pub fn view(&self, t: f64) -> HistoryView<'_> {
        HistoryView::new(self, t)
    }
}

impl Path for Prolongation<'_> {
    fn dim(&self) -> usize {
        self.segment.dim()
    }

    fn interval(&self) -> PastInterval {
        self.base.interval()
    }

    fn start(&self) -> f64 {
        self.sigma + self.base.interval().lower()
    }

    fn end(&self) -> f64 {
        self.segment.t_end()
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), HistoryError> {
        if t <= self.sigma {
            self.base.eval_into(t - self.sigma, out)
        } else {
            self.segment.eval_into(t, out)
        }
    }

    fn knots(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        if lo < self.sigma {
            let from = out.len();
            self.base.knots(lo - self.sigma, (hi - self.sigma).min(0.0), out);
            for k in &mut out[from..] {
                *k += self.sigma;
            }
        }
        segment_knots(self.segment, lo, hi, out);
    }

    fn knot_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        let mut best = segment_knot_slope(self.segment, lo, hi);
        if lo < self.sigma {
            if let Some(s) = self.base.knot_slope(lo - self.sigma, (hi - self.sigma).min(0.0)) {
                best = Some(best.map_or(s, |b| b.max(s)));
            }
        }
        best
    }
}

pub(crate) fn segment_knots(seg: &Segment, lo: f64, hi: f64, out: &mut Vec<f64>) {
    if hi < seg.t_start() || lo > seg.t_end() {
        return;
    }
    let h = seg.step();
    let first = (((lo - seg.t_start()) / h).ceil().max(0.0)) as usize;
    for j in first..=seg.cells() {
        let t = seg.node_time(j);
        if t > hi {
            break;
        }
        if t >= lo {
            out.push(t);
        }
    }
}

pub(crate) fn segment_knot_slope(seg: &Segment, lo: f64, hi: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    if hi < seg.t_start() || lo > seg.t_end() {
        return None;
    }
    for j in 0..=seg.cells() {
        let t = seg.node_time(j);
        if t >= lo && t <= hi {
            let s = seg.deriv(j).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            best = Some(best.map_or(s, |b| b.max(s)));
        }
    }
    best
}

/// Max-norm of a vector.
pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

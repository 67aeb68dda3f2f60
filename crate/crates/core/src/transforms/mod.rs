//! Structural maps on histories and prolongations: the `∧v` extension, the
//! trivial flow `S(t)(v, φ)`, translations, the addition/normalization pair
//! and rectangle membership.

mod rectangle;
mod sampler;

use thiserror::Error;

use crate::history::{
    inf_norm, segment_knot_slope, segment_knots, History, HistoryError, HistoryView, PastInterval, Path, Segment,
};

pub use rectangle::{in_rectangle, in_rectangle_with, Membership, Order, RectangleSpec, RejectReason};
pub use sampler::{random_bump, random_prolongation, random_prolongation_with, BumpKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("prolongation is not anchored at {expected}: {detail}")]
    AnchorMismatch { expected: f64, detail: String },
    #[error(transparent)]
    History(#[from] HistoryError),
}

/// `ψ^{∧v}` anchored at `σ`: `ψ(t - σ)` up to `σ`, then the line
/// `ψ(0) + (t - σ) v`.
pub struct Wedge<'a> {
    base: &'a dyn History,
    sigma: f64,
    slope: Vec<f64>,
    head: Vec<f64>,
}

impl<'a> Wedge<'a> {
    pub fn new(base: &'a dyn History, sigma: f64, slope: &[f64]) -> Result<Self, HistoryError> {
        if slope.len() != base.dim() {
            return Err(HistoryError::DimensionMismatch { expected: base.dim(), found: slope.len() });
        }
        let head = base.head()?;
        Ok(Wedge { base, sigma, slope: slope.to_vec(), head })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn slope(&self) -> &[f64] {
        &self.slope
    }

    /// `I_{σ+t}[ψ^{∧v}]`.
    pub fn history(&self, t: f64) -> HistoryView<'_> {
        HistoryView::new(self, self.sigma + t)
    }

    /// The line part on `[σ, t_end]` as an exact Hermite segment.
    pub fn segment_to(&self, t_end: f64, cells: usize) -> Result<Segment, HistoryError> {
        let dim = self.head.len();
        Segment::from_fn(self.sigma, t_end, cells, dim, |t, v, d| {
            let s = t - self.sigma;
            for i in 0..dim {
                v[i] = self.head[i] + s * self.slope[i];
                d[i] = self.slope[i];
            }
        })
    }

    pub fn segment(&self, span: f64, cells: usize) -> Result<Segment, HistoryError> {
        self.segment_to(self.sigma + span, cells)
    }
}

impl Path for Wedge<'_> {
    fn dim(&self) -> usize {
        self.head.len()
    }

    fn interval(&self) -> PastInterval {
        self.base.interval()
    }

    fn start(&self) -> f64 {
        self.sigma + self.base.interval().lower()
    }

    fn end(&self) -> f64 {
        f64::INFINITY
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), HistoryError> {
        if t <= self.sigma {
            return self.base.eval_into(t - self.sigma, out);
        }
        let s = t - self.sigma;
        for ((o, h), v) in out.iter_mut().zip(&self.head).zip(&self.slope) {
            *o = h + s * v;
        }
        Ok(())
    }

    fn knots(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        if lo <= self.sigma {
            let from = out.len();
            self.base.knots(lo - self.sigma, (hi - self.sigma).min(0.0), out);
            for k in &mut out[from..] {
                *k += self.sigma;
            }
            if hi >= self.sigma {
                out.push(self.sigma);
            }
        }
    }

    fn knot_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        let mut best = if lo <= self.sigma {
            self.base.knot_slope(lo - self.sigma, (hi - self.sigma).min(0.0))
        } else {
            None
        };
        if hi > self.sigma {
            let s = inf_norm(&self.slope);
            best = Some(best.map_or(s, |b| b.max(s)));
        }
        best
    }
}

/// `ψ^{∧v}` with anchor 0.
pub fn wedge_extend<'a>(psi: &'a dyn History, v: &[f64]) -> Result<Wedge<'a>, HistoryError> {
    Wedge::new(psi, 0.0, v)
}

/// The trivial flow `S(t)(v, φ) = I_t[φ^{∧v}]`.
pub struct TrivialFlow<'a> {
    wedge: Wedge<'a>,
    t: f64,
}

impl TrivialFlow<'_> {
    pub fn elapsed(&self) -> f64 {
        self.t
    }
}

pub fn trivial_flow<'a>(t: f64, v: &[f64], phi: &'a dyn History) -> Result<TrivialFlow<'a>, HistoryError> {
    Ok(TrivialFlow { wedge: Wedge::new(phi, 0.0, v)?, t: t.max(0.0) })
}

impl History for TrivialFlow<'_> {
    fn dim(&self) -> usize {
        self.wedge.head.len()
    }

    fn interval(&self) -> PastInterval {
        self.wedge.base.interval()
    }

    fn eval_into(&self, theta: f64, out: &mut [f64]) -> Result<(), HistoryError> {
        let interval = self.interval();
        if !interval.contains(theta) {
            return Err(HistoryError::OutOfDomain { t: theta, lower: interval.lower(), upper: 0.0 });
        }
        self.wedge.eval_into(self.t + theta, out)
    }

    fn knots(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        let from = out.len();
        self.wedge.knots(lo + self.t, hi + self.t, out);
        for k in &mut out[from..] {
            *k -= self.t;
        }
    }

    fn knot_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        self.wedge.knot_slope(lo + self.t, hi + self.t)
    }
}

/// `flow + other` (forward translation) or `other - flow` (inverse).
pub struct Translated<'a> {
    flow: TrivialFlow<'a>,
    other: &'a dyn History,
    inverse: bool,
}

impl History for Translated<'_> {
    fn dim(&self) -> usize {
        self.other.dim()
    }

    fn interval(&self) -> PastInterval {
        self.other.interval()
    }

    fn eval_into(&self, theta: f64, out: &mut [f64]) -> Result<(), HistoryError> {
        let mut f = vec![0.0; out.len()];
        self.flow.eval_into(theta, &mut f)?;
        self.other.eval_into(theta, out)?;
        for (o, f) in out.iter_mut().zip(f) {
            *o = if self.inverse { *o - f } else { f + *o };
        }
        Ok(())
    }

    fn knots(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        self.flow.knots(lo, hi, out);
        self.other.knots(lo, hi, out);
    }
}

/// `τ^v_{σ,ψ}(t, φ) = (σ + t, I_t[ψ^{∧v}] + φ)`.
pub fn translate<'a>(
    sigma: f64,
    psi: &'a dyn History,
    v: &[f64],
    t: f64,
    phi: &'a dyn History,
) -> Result<(f64, Translated<'a>), HistoryError> {
    let flow = trivial_flow(t, v, psi)?;
    Ok((sigma + t, Translated { flow, other: phi, inverse: false }))
}

/// `(τ^v_{σ,ψ})^{-1}(t̃, φ̃) = (t̃ - σ, φ̃ - I_{t̃-σ}[ψ^{∧v}])`.
pub fn translate_inv<'a>(
    sigma: f64,
    psi: &'a dyn History,
    v: &[f64],
    t_tilde: f64,
    phi_tilde: &'a dyn History,
) -> Result<(f64, Translated<'a>), HistoryError> {
    let t = t_tilde - sigma;
    let flow = trivial_flow(t, v, psi)?;
    Ok((t, Translated { flow, other: phi_tilde, inverse: true }))
}

/// `φ + scale·η` where `η` is a segment on `[-w, 0]` extended by zero.
pub struct Bumped<'a> {
    base: &'a dyn History,
    bump: &'a Segment,
    scale: f64,
}

impl<'a> Bumped<'a> {
    pub fn new(base: &'a dyn History, bump: &'a Segment, scale: f64) -> Self {
        Bumped { base, bump, scale }
    }
}

impl History for Bumped<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn interval(&self) -> PastInterval {
        self.base.interval()
    }

    fn eval_into(&self, theta: f64, out: &mut [f64]) -> Result<(), HistoryError> {
        self.base.eval_into(theta, out)?;
        if self.bump.contains(theta) {
            let b = self.bump.eval(theta)?;
            for (o, b) in out.iter_mut().zip(b) {
                *o += self.scale * b;
            }
        }
        Ok(())
    }

    fn knots(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        self.base.knots(lo, hi, out);
        segment_knots(self.bump, lo, hi, out);
    }

    fn knot_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        // an upper bound: base slope plus scaled bump slope
        let b = segment_knot_slope(self.bump, lo, hi).map(|s| s * self.scale.abs());
        match (self.base.knot_slope(lo, hi), b) {
            (Some(a), Some(b)) => Some(a + b),
            (a, None) => a,
            (None, b) => b,
        }
    }
}

fn check_anchor(expected_start: f64, seg: &Segment, expected_head: &[f64], what: &str) -> Result<(), TransformError> {
    if seg.t_start() != expected_start {
        return Err(TransformError::AnchorMismatch {
            expected: expected_start,
            detail: format!("{what} starts at {}", seg.t_start()),
        });
    }
    let gap = seg.value(0).iter().zip(expected_head).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if gap > 1e-12 * inf_norm(expected_head).max(1.0) {
        return Err(TransformError::AnchorMismatch {
            expected: expected_start,
            detail: format!("{what} starts {gap:e} away from the anchored value"),
        });
    }
    Ok(())
}

/// Addition `A`: maps a prolongation `β` of `0` on `[0, T]` to the
/// prolongation `ψ^{∧v}(· - σ) + β(· - σ)` of `(σ, ψ)` on `[σ, σ + T]`.
pub fn add_a(sigma: f64, psi: &dyn History, v: &[f64], beta: &Segment) -> Result<Segment, TransformError> {
    let zero = vec![0.0; beta.dim()];
    check_anchor(0.0, beta, &zero, "β")?;
    let head = psi.head()?;
    let dim = beta.dim();
    let mut values = Vec::with_capacity(beta.values().len());
    let mut derivs = Vec::with_capacity(beta.values().len());
    for j in 0..=beta.cells() {
        let s = beta.node_time(j);
        for i in 0..dim {
            values.push(head[i] + s * v[i] + beta.value(j)[i]);
            derivs.push(v[i] + beta.deriv(j)[i]);
        }
    }
    Ok(Segment::new(sigma, sigma + beta.t_end(), dim, values, derivs)?)
}

/// Normalization `N`, the inverse of [`add_a`].
pub fn normalize_n(sigma: f64, psi: &dyn History, v: &[f64], gamma: &Segment) -> Result<Segment, TransformError> {
    let head = psi.head()?;
    check_anchor(sigma, gamma, &head, "γ")?;
    let dim = gamma.dim();
    let mut values = Vec::with_capacity(gamma.values().len());
    let mut derivs = Vec::with_capacity(gamma.values().len());
    let h = gamma.step();
    for j in 0..=gamma.cells() {
        let s = if j == gamma.cells() { gamma.span() } else { j as f64 * h };
        for i in 0..dim {
            values.push(gamma.value(j)[i] - head[i] - s * v[i]);
            derivs.push(gamma.deriv(j)[i] - v[i]);
        }
    }
    Ok(Segment::new(0.0, gamma.span(), dim, values, derivs)?)
}

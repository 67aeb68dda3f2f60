use std::io::{self, Write};
use std::sync::Arc;

use super::{
    inf_norm, segment_knot_slope, segment_knots, History, HistoryError, HistoryView, InitialHistory,
    PastInterval, Path, Segment,
};
use crate::export::fmt_g17;

/// An initial history followed by a chain of solved C¹ segments tiling
/// `[t0, t_end]`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    initial: InitialHistory,
    t0: f64,
    segments: Vec<Segment>,
    junction_gaps: Vec<f64>,
    breakpoints: Vec<f64>,
}

impl Trajectory {
    pub fn new(initial: InitialHistory, t0: f64) -> Self {
        let inherited: Vec<f64> = initial.breakpoints().into_iter().map(|th| t0 + th).collect();
        let mut traj = Trajectory { initial, t0, segments: Vec::new(), junction_gaps: Vec::new(), breakpoints: Vec::new() };
        traj.add_breakpoints(inherited.into_iter().chain([t0]));
        traj
    }

    /// Known derivative jumps: `t0`, those inherited from a restarted
    /// history and any added by the solver, sorted.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn add_breakpoints(&mut self, times: impl IntoIterator<Item = f64>) {
        for t in times {
            let close = |b: &f64| (b - t).abs() <= 1e-12 * t.abs().max(1.0);
            if t.is_finite() && !self.breakpoints.iter().any(close) {
                self.breakpoints.push(t);
            }
        }
        self.breakpoints.sort_by(f64::total_cmp);
    }

    pub fn initial(&self) -> &InitialHistory {
        &self.initial
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.segments.last().map_or(self.t0, Segment::t_end)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn dim(&self) -> usize {
        History::dim(&self.initial)
    }

    /// Appends a segment starting at the current end.
    ///
    /// The start time and the first node value must match exactly. The
    /// derivative gap at the seam is recorded in [`Trajectory::junction_gaps`].
    pub fn push(&mut self, segment: Segment) -> Result<(), HistoryError> {
        let end = self.t_end();
        if segment.t_start() != end {
            return Err(HistoryError::Discontinuous { start: segment.t_start(), end });
        }
        if segment.dim() != self.dim() {
            return Err(HistoryError::DimensionMismatch { expected: self.dim(), found: segment.dim() });
        }
        let here = Path::eval(self, end)?;
        if here.as_slice() != segment.value(0) {
            return Err(HistoryError::Discontinuous { start: segment.t_start(), end });
        }
        if let Some(last) = self.segments.last() {
            let left = last.deriv(last.cells());
            let right = segment.deriv(0);
            let gap = left.iter().zip(right).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let scale = inf_norm(left).max(1.0);
            self.junction_gaps.push(gap / scale);
        }
        self.segments.push(segment);
        Ok(())
    }

    /// Relative derivative gaps at each seam.
    pub fn junction_gaps(&self) -> &[f64] {
        &self.junction_gaps
    }

    pub fn max_junction_gap(&self) -> f64 {
        self.junction_gaps.iter().copied().fold(0.0, f64::max)
    }

    fn segment_for(&self, t: f64) -> Option<&Segment> {
        if t <= self.t0 || t > self.t_end() {
            return None;
        }
        let k = self.segments.partition_point(|s| s.t_end() < t);
        self.segments.get(k)
    }

    /// The history `I_t x` for `t ∈ [t0, t_end]`.
    pub fn history_at(&self, t: f64) -> Result<HistoryView<'_>, HistoryError> {
        if !(t >= self.t0 && t <= self.t_end()) {
            return Err(HistoryError::OutOfDomain { t, lower: self.t0, upper: self.t_end() });
        }
        Ok(HistoryView::new(self, t))
    }

    pub fn eval_deriv_into(&self, t: f64, out: &mut [f64]) -> Result<(), HistoryError> {
        if t == self.t0 {
            if let Some(first) = self.segments.first() {
                out.copy_from_slice(first.deriv(0));
                return Ok(());
            }
        }
        match self.segment_for(t) {
            Some(seg) => seg.eval_deriv_into(t, out),
            None => match self.initial.derivative_at_zero_minus() {
                Some(d) if t == self.t0 => {
                    out.copy_from_slice(d);
                    Ok(())
                }
                _ => Err(HistoryError::OutOfDomain { t, lower: self.t0, upper: self.t_end() }),
            },
        }
    }

    /// Largest node value over all solved segments.
    pub fn max_norm(&self) -> f64 {
        self.segments.iter().map(Segment::max_node_norm).fold(0.0, f64::max)
    }

    /// Writes `t,x0..,dx0..` rows at `dense` points per unit time from `t0`
    /// to the end of the solved range.
    pub fn write_csv<W: Write>(&self, mut w: W, dense: f64) -> io::Result<()> {
        let n = self.dim();
        let mut header = String::from("t");
        for i in 0..n {
            header.push_str(&format!(",x{i}"));
        }
        for i in 0..n {
            header.push_str(&format!(",dx{i}"));
        }
        writeln!(w, "{header}")?;
        let mut x = vec![0.0; n];
        let mut dx = vec![0.0; n];
        for t in self.dense_times(dense) {
            Path::eval_into(self, t, &mut x).map_err(io::Error::other)?;
            if self.segments.is_empty() {
                dx.iter_mut().for_each(|d| *d = f64::NAN);
                if let Some(d) = self.initial.derivative_at_zero_minus() {
                    dx.copy_from_slice(d);
                }
            } else {
                self.eval_deriv_into(t, &mut dx).map_err(io::Error::other)?;
            }
            let mut line = fmt_g17(t);
            for v in x.iter().chain(dx.iter()) {
                line.push(',');
                line.push_str(&fmt_g17(*v));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Output times: `t0 + k / dense` below the end, then the end itself.
    pub fn dense_times(&self, dense: f64) -> Vec<f64> {
        let end = self.t_end();
        let dense = if dense > 0.0 { dense } else { 1.0 };
        let mut times = Vec::new();
        let mut k = 0u64;
        loop {
            let t = self.t0 + k as f64 / dense;
            if t >= end - 1e-12 * end.abs().max(1.0) {
                break;
            }
            times.push(t);
            k += 1;
        }
        times.push(end);
        times
    }
}

impl Path for Trajectory {
    fn dim(&self) -> usize {
        Trajectory::dim(self)
    }

    fn interval(&self) -> PastInterval {
        History::interval(&self.initial)
    }

    fn start(&self) -> f64 {
        self.t0 + History::interval(&self.initial).lower()
    }

    fn end(&self) -> f64 {
        self.t_end()
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), HistoryError> {
        if t <= self.t0 {
            return History::eval_into(&self.initial, t - self.t0, out);
        }
        match self.segment_for(t) {
            Some(seg) => seg.eval_into(t, out),
            None => Err(HistoryError::OutOfDomain { t, lower: Path::start(self), upper: self.t_end() }),
        }
    }

    fn knots(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        if lo < self.t0 {
            let from = out.len();
            History::knots(&self.initial, lo - self.t0, (hi - self.t0).min(0.0), out);
            for k in &mut out[from..] {
                *k += self.t0;
            }
        }
        let first = self.segments.partition_point(|s| s.t_end() < lo);
        for seg in &self.segments[first..] {
            if seg.t_start() > hi {
                break;
            }
            segment_knots(seg, lo, hi, out);
        }
    }

    fn knot_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        if lo < self.t0 {
            best = History::knot_slope(&self.initial, lo - self.t0, (hi - self.t0).min(0.0));
        }
        for seg in &self.segments {
            if let Some(s) = segment_knot_slope(seg, lo, hi) {
                best = Some(best.map_or(s, |b| b.max(s)));
            }
        }
        best
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

/// A state `I_t x` of the solution process, owning its trajectory.
#[derive(Clone)]
pub struct ProcessState {
    trajectory: Arc<Trajectory>,
    time: f64,
}

impl ProcessState {
    pub fn new(trajectory: Arc<Trajectory>, time: f64) -> Self {
        ProcessState { trajectory, time }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn trajectory(&self) -> &Arc<Trajectory> {
        &self.trajectory
    }

    pub fn view(&self) -> HistoryView<'_> {
        HistoryView::new(self.trajectory.as_ref(), self.time)
    }

    /// Freezes this state as an initial history for a restarted solve.
    pub fn to_initial(&self) -> Result<InitialHistory, HistoryError> {
        let source: Arc<dyn Path> = self.trajectory.clone();
        InitialHistory::tail(source, self.time)
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Order, RectangleSpec};
use crate::history::{HistoryError, Segment};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BumpKind {
    /// Smoothstep ramp `3u² - 2u³`, constant after the ramp.
    Ramp,
    /// `16u²(1-u)²`, back to zero after the hump.
    Hump,
}

#[derive(Clone, Debug)]
struct Bump {
    kind: BumpKind,
    start: f64,
    width: f64,
    amp: Vec<f64>,
}

impl Bump {
    fn draw(rng: &mut impl Rng, lo: f64, hi: f64, dim: usize) -> Self {
        let span = hi - lo;
        let start = lo + span * rng.gen_range(0.0..0.5);
        let width = (hi - start) * rng.gen_range(0.25..=1.0);
        let kind = if rng.gen_bool(0.5) { BumpKind::Ramp } else { BumpKind::Hump };
        let amp = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        Bump { kind, start, width, amp }
    }

    /// Shape value and derivative at `t`.
    fn shape(&self, t: f64) -> (f64, f64) {
        let u = (t - self.start) / self.width;
        if u <= 0.0 {
            return (0.0, 0.0);
        }
        match self.kind {
            BumpKind::Ramp if u >= 1.0 => (1.0, 0.0),
            BumpKind::Ramp => (u * u * (3.0 - 2.0 * u), 6.0 * u * (1.0 - u) / self.width),
            BumpKind::Hump if u >= 1.0 => (0.0, 0.0),
            BumpKind::Hump => {
                let w = u * (1.0 - u);
                (16.0 * w * w, 32.0 * w * (1.0 - 2.0 * u) / self.width)
            }
        }
    }
}

fn profile(rng: &mut impl Rng, lo: f64, hi: f64, dim: usize, cells: usize) -> Result<Segment, HistoryError> {
    let count = rng.gen_range(1..=5);
    let bumps: Vec<Bump> = (0..count).map(|_| Bump::draw(rng, lo, hi, dim)).collect();
    Segment::from_fn(lo, hi, cells, dim, |t, v, d| {
        v.fill(0.0);
        d.fill(0.0);
        for b in &bumps {
            let (s, ds) = b.shape(t);
            for i in 0..dim {
                v[i] += b.amp[i] * s;
                d[i] += b.amp[i] * ds;
            }
        }
    })
}

/// A random C¹ segment on `[lo, hi]` built from 1 to 5 ramps and humps, with
/// zero value and derivative at `lo`.
pub fn random_bump(rng: &mut impl Rng, lo: f64, hi: f64, dim: usize, cells: usize) -> Result<Segment, HistoryError> {
    profile(rng, lo, hi, dim, cells)
}

/// A seeded random member of the rectangle on `[σ, σ + span]`, at the
/// default density of 64 cells per unit time.
pub fn random_prolongation(spec: &RectangleSpec<'_>, span: f64, seed: u64) -> Result<Segment, HistoryError> {
    let cells = ((span * 64.0).ceil() as usize).max(4);
    random_prolongation_with(spec, span, seed, cells)
}

pub fn random_prolongation_with(
    spec: &RectangleSpec<'_>,
    span: f64,
    seed: u64,
    cells: usize,
) -> Result<Segment, HistoryError> {
    if !(span > 0.0) {
        return Err(HistoryError::InvalidSegment(format!("prolongation span {span} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = spec.base.dim();
    let p = profile(&mut rng, 0.0, span, dim, cells)?;
    let norm = match spec.order {
        Order::C0 => p.sup_norm_exact(),
        Order::C1 => p.sup_norm_exact() + p.sup_deriv_exact(),
    };
    let target = spec.radius * rng.gen_range(0.0..1.0) * (1.0 - 1e-9);
    let scale = if norm > 0.0 { target / norm } else { 0.0 };
    let head = spec.base.head()?;
    let v = spec.centre_slope();
    let sigma = spec.base_time;
    let mut values = Vec::with_capacity(p.values().len());
    let mut derivs = Vec::with_capacity(p.values().len());
    for j in 0..=cells {
        let s = p.node_time(j);
        for i in 0..dim {
            values.push(head[i] + s * v[i] + scale * p.value(j)[i]);
            derivs.push(v[i] + scale * p.deriv(j)[i]);
        }
    }
    Segment::new(sigma, sigma + span, dim, values, derivs)
}

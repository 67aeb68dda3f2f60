use serde::Serialize;

use super::trivial_flow;
use crate::history::{History, HistoryError, PastInterval, ProbeGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Order {
    /// `Λ`: sup-norm ball around the constant prolongation.
    C0,
    /// `Λ¹`: C¹ ball around the `∧v` prolongation.
    C1,
}

/// A rectangle `Λ_{T,δ}(σ, ψ)` or `Λ¹_{T,δ}(σ, ψ, v)`.
#[derive(Clone, Copy)]
pub struct RectangleSpec<'a> {
    pub base_time: f64,
    pub base: &'a dyn History,
    pub horizon: f64,
    pub radius: f64,
    pub order: Order,
    pub slope: Option<&'a [f64]>,
}

impl<'a> RectangleSpec<'a> {
    pub fn c0(base_time: f64, base: &'a dyn History, horizon: f64, radius: f64) -> Self {
        RectangleSpec { base_time, base, horizon, radius, order: Order::C0, slope: None }
    }

    pub fn c1(base_time: f64, base: &'a dyn History, horizon: f64, radius: f64, slope: &'a [f64]) -> Self {
        RectangleSpec { base_time, base, horizon, radius, order: Order::C1, slope: Some(slope) }
    }

    /// Slope of the centre prolongation: `v` for `Λ¹`, zero for `Λ`.
    pub fn centre_slope(&self) -> Vec<f64> {
        match (self.order, self.slope) {
            (Order::C1, Some(v)) => v.to_vec(),
            _ => vec![0.0; self.base.dim()],
        }
    }

    /// How far back a difference `φ - S(τ)(v, ψ)` must be scanned.
    pub(crate) fn scan_reach(&self, elapsed: f64) -> f64 {
        match self.base.interval() {
            PastInterval::Compact(r) => r,
            PastInterval::WholePast => elapsed + 1.0,
            PastInterval::Point => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RejectReason {
    HorizonExceeded,
    SupportTooWide,
    NormTooLarge,
    SlopeMismatch,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Membership {
    pub inside: bool,
    pub reason: Option<RejectReason>,
    pub elapsed: f64,
    /// `s` with the difference supported in `[-s, 0]`.
    pub support: Option<f64>,
    /// The sup-norm (C0) or value-plus-Lipschitz norm (C1) of the difference.
    pub norm: f64,
}

impl Membership {
    fn reject(reason: RejectReason, elapsed: f64, support: Option<f64>, norm: f64) -> Self {
        Membership { inside: false, reason: Some(reason), elapsed, support, norm }
    }
}

const SUPPORT_TOL: f64 = 1e-12;

/// Whether `(t, φ)` lies in the rectangle.
pub fn in_rectangle(spec: &RectangleSpec<'_>, t: f64, phi: &dyn History) -> Result<Membership, HistoryError> {
    in_rectangle_with(spec, t, phi, ProbeGrid::default())
}

pub fn in_rectangle_with(
    spec: &RectangleSpec<'_>,
    t: f64,
    phi: &dyn History,
    grid: ProbeGrid,
) -> Result<Membership, HistoryError> {
    let tau = t - spec.base_time;
    if !(tau >= -1e-12 && tau <= spec.horizon * (1.0 + 1e-12) + 1e-12) {
        return Ok(Membership::reject(RejectReason::HorizonExceeded, tau, None, f64::NAN));
    }
    let v = spec.centre_slope();
    let centre = trivial_flow(tau, &v, spec.base)?;
    let reach = spec.scan_reach(tau);
    let support = grid.support_of_difference(phi, &centre, reach, SUPPORT_TOL)?;
    if let Some(s) = support {
        if s > tau * (1.0 + 1e-12) + 1e-12 {
            return Ok(Membership::reject(RejectReason::SupportTooWide, tau, support, f64::NAN));
        }
    }
    let diff = Difference { a: phi, b: &centre };
    let window = tau.min(reach);
    let mut norm = grid.sup_norm(&diff, window)?;
    let point = spec.base.interval().is_point();
    if spec.order == Order::C1 && !point {
        norm += grid.lip_const(&diff, window)?;
    }
    if norm > spec.radius * (1.0 + 1e-12) {
        return Ok(Membership::reject(RejectReason::NormTooLarge, tau, support, norm));
    }
    if spec.order == Order::C1 && !point && tau > 0.0 {
        // second-order one-sided difference for the derivative at the seam
        let h = 1e-4 * tau;
        let d = |th: f64| diff.eval(th);
        let (d0, d1, d2) = (d(-tau)?, d(-tau + h)?, d(-tau + 2.0 * h)?);
        let slope = (0..d0.len())
            .map(|i| ((-3.0 * d0[i] + 4.0 * d1[i] - d2[i]) / (2.0 * h)).abs())
            .fold(0.0f64, f64::max);
        if slope > 1e-4 * spec.radius + 1e-9 {
            return Ok(Membership::reject(RejectReason::SlopeMismatch, tau, support, norm));
        }
    }
    Ok(Membership { inside: true, reason: None, elapsed: tau, support, norm })
}

struct Difference<'a> {
    a: &'a dyn History,
    b: &'a dyn History,
}

impl History for Difference<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn interval(&self) -> PastInterval {
        self.a.interval()
    }

    fn eval_into(&self, theta: f64, out: &mut [f64]) -> Result<(), HistoryError> {
        let mut tmp = vec![0.0; out.len()];
        self.a.eval_into(theta, out)?;
        self.b.eval_into(theta, &mut tmp)?;
        for (o, b) in out.iter_mut().zip(tmp) {
            *o -= b;
        }
        Ok(())
    }

    fn knots(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        self.a.knots(lo, hi, out);
        self.b.knots(lo, hi, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::{InitialHistory, Prolongation, Segment};
    use crate::transforms::{random_prolongation, Wedge};

    fn base() -> InitialHistory {
        InitialHistory::from_fn(PastInterval::Compact(1.0), 1, |t, o| o[0] = (3.0 * t).cos()).unwrap()
    }

    #[test]
    fn centre_is_inside() {
        let psi = base();
        let v = [0.5];
        let spec = RectangleSpec::c1(2.0, &psi, 0.5, 0.1, &v);
        let w = Wedge::new(&psi, 2.0, &v).unwrap();
        for t in [2.0, 2.2, 2.5] {
            let m = in_rectangle(&spec, t, &w.history(t - 2.0)).unwrap();
            assert!(m.inside, "{m:?}");
            assert!(m.norm < 1e-15);
        }
    }

    #[test]
    fn horizon_is_enforced() {
        let psi = base();
        let spec = RectangleSpec::c0(0.0, &psi, 0.5, 1.0);
        let m = in_rectangle(&spec, 0.6, &psi).unwrap();
        assert_eq!(m.reason, Some(RejectReason::HorizonExceeded));
        let m = in_rectangle(&spec, -0.1, &psi).unwrap();
        assert_eq!(m.reason, Some(RejectReason::HorizonExceeded));
    }

    #[test]
    fn old_past_must_match() {
        let psi = base();
        let spec = RectangleSpec::c0(0.0, &psi, 0.5, 10.0);
        let shifted = InitialHistory::from_fn(PastInterval::Compact(1.0), 1, |t, o| o[0] = (3.0 * t).cos() + 0.01)
            .unwrap();
        let m = in_rectangle(&spec, 0.25, &shifted).unwrap();
        assert_eq!(m.reason, Some(RejectReason::SupportTooWide));
    }

    #[test]
    fn radius_is_enforced() {
        let psi = base();
        let v = [0.0];
        let spec = RectangleSpec::c1(0.0, &psi, 1.0, 0.1, &v);
        // slope 1 line: C¹ distance about 1 + 0.5
        let seg = Segment::from_fn(0.0, 0.5, 8, 1, |t, x, d| {
            x[0] = 1.0 + t * t;
            d[0] = 2.0 * t;
        })
        .unwrap();
        let gamma = Prolongation::new(&psi, &seg);
        let m = in_rectangle(&spec, 0.5, &gamma.view(0.5)).unwrap();
        assert_eq!(m.reason, Some(RejectReason::NormTooLarge));
        let loose = RectangleSpec::c0(0.0, &psi, 1.0, 0.3);
        assert!(in_rectangle(&loose, 0.5, &gamma.view(0.5)).unwrap().inside);
    }

    #[test]
    fn seam_slope_is_checked() {
        let psi = base();
        let v = [0.0];
        let spec = RectangleSpec::c1(0.0, &psi, 1.0, 10.0, &v);
        let kinked = Segment::from_fn(0.0, 0.5, 8, 1, |t, x, d| {
            x[0] = 1.0 + 0.5 * t;
            d[0] = 0.5;
        })
        .unwrap();
        let gamma = Prolongation::new(&psi, &kinked);
        let m = in_rectangle(&spec, 0.5, &gamma.view(0.5)).unwrap();
        assert_eq!(m.reason, Some(RejectReason::SlopeMismatch));
    }

    #[test]
    fn samples_are_members() {
        let psi = base();
        let v = [-0.75];
        for (order, radius) in [(Order::C0, 0.2), (Order::C1, 0.2), (Order::C1, 3.0)] {
            let spec = RectangleSpec { base_time: 1.0, base: &psi, horizon: 0.6, radius, order, slope: Some(&v) };
            for seed in 0..40 {
                let seg = random_prolongation(&spec, 0.6, seed).unwrap();
                let gamma = Prolongation::new(&psi, &seg);
                for t in [1.0, 1.3, 1.6] {
                    let m = in_rectangle(&spec, t, &gamma.view(t)).unwrap();
                    assert!(m.inside, "seed {seed} t {t}: {m:?}");
                }
            }
        }
    }
}

use super::{inf_norm, History, HistoryError, Path};

/// Probe grid used to approximate sup-norms: uniform points at `per_unit`
/// density, every interpolation knot in range, and midpoints between
/// consecutive knots.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeGrid {
    pub per_unit: f64,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        ProbeGrid { per_unit: 32.0 }
    }
}

impl ProbeGrid {
    pub fn new(per_unit: f64) -> Self {
        ProbeGrid { per_unit: per_unit.max(1.0) }
    }

    /// Probe points in `[lo, hi]` given the knots collected from the sources.
    pub fn points(&self, lo: f64, hi: f64, mut knots: Vec<f64>) -> Vec<f64> {
        if hi <= lo {
            return vec![hi];
        }
        knots.retain(|k| *k >= lo && *k <= hi);
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let cells = ((hi - lo) * self.per_unit).ceil().max(1.0) as usize;
        let mut pts = Vec::with_capacity(cells + 1 + 2 * knots.len());
        for w in knots.windows(2) {
            pts.push(0.5 * (w[0] + w[1]));
        }
        pts.extend_from_slice(&knots);
        for i in 0..=cells {
            pts.push(if i == cells { hi } else { lo + (hi - lo) * i as f64 / cells as f64 });
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    fn history_points(&self, reach: f64, sources: &[&dyn History]) -> Vec<f64> {
        let reach = sources.first().map_or(reach, |h| h.interval().clip_reach(reach));
        let mut knots = Vec::new();
        for h in sources {
            h.knots(-reach, 0.0, &mut knots);
        }
        self.points(-reach, 0.0, knots)
    }

    /// `sup_{θ ∈ [-reach, 0]} ‖a(θ) - b(θ)‖∞` on the probe grid.
    pub fn sup_norm_diff(&self, a: &dyn History, b: &dyn History, reach: f64) -> Result<f64, HistoryError> {
        let pts = self.history_points(reach, &[a, b]);
        let mut va = vec![0.0; a.dim()];
        let mut vb = vec![0.0; b.dim()];
        let mut best = 0.0f64;
        for th in pts {
            a.eval_into(th, &mut va)?;
            b.eval_into(th, &mut vb)?;
            for (x, y) in va.iter().zip(&vb) {
                best = best.max((x - y).abs());
            }
        }
        Ok(best)
    }

    pub fn sup_norm(&self, a: &dyn History, reach: f64) -> Result<f64, HistoryError> {
        let pts = self.history_points(reach, &[a]);
        let mut va = vec![0.0; a.dim()];
        let mut best = 0.0f64;
        for th in pts {
            a.eval_into(th, &mut va)?;
            best = best.max(inf_norm(&va));
        }
        Ok(best)
    }

    /// Discrete Lipschitz estimate over `[-reach, 0]`: the largest chord
    /// slope between adjacent probe points, raised to the largest stored
    /// knot derivative when the view carries Hermite data.
    pub fn lip_const(&self, a: &dyn History, reach: f64) -> Result<f64, HistoryError> {
        let pts = self.history_points(reach, &[a]);
        let reach = a.interval().clip_reach(reach);
        let mut prev = vec![0.0; a.dim()];
        let mut cur = vec![0.0; a.dim()];
        let mut best = a.knot_slope(-reach, 0.0).unwrap_or(0.0);
        a.eval_into(pts[0], &mut prev)?;
        for w in pts.windows(2) {
            a.eval_into(w[1], &mut cur)?;
            let dt = w[1] - w[0];
            let slope = prev.iter().zip(&cur).fold(0.0f64, |m, (p, c)| m.max((c - p).abs())) / dt;
            best = best.max(slope);
            std::mem::swap(&mut prev, &mut cur);
        }
        Ok(best)
    }

    /// Smallest `s` with every probe point where `‖a - b‖∞ > tol` inside
    /// `[-s, 0]`; `None` when no point exceeds the tolerance.
    pub fn support_of_difference(
        &self,
        a: &dyn History,
        b: &dyn History,
        reach: f64,
        tol: f64,
    ) -> Result<Option<f64>, HistoryError> {
        let pts = self.history_points(reach, &[a, b]);
        let mut va = vec![0.0; a.dim()];
        let mut vb = vec![0.0; b.dim()];
        for th in pts {
            a.eval_into(th, &mut va)?;
            b.eval_into(th, &mut vb)?;
            if va.iter().zip(&vb).any(|(x, y)| (x - y).abs() > tol) {
                return Ok(Some(-th));
            }
        }
        Ok(None)
    }

    /// `sup_{t ∈ [lo, hi]} ‖a(t) - b(t)‖∞` for two paths.
    pub fn sup_path_diff(&self, a: &dyn Path, b: &dyn Path, lo: f64, hi: f64) -> Result<f64, HistoryError> {
        let mut knots = Vec::new();
        a.knots(lo, hi, &mut knots);
        b.knots(lo, hi, &mut knots);
        let mut va = vec![0.0; a.dim()];
        let mut vb = vec![0.0; b.dim()];
        let mut best = 0.0f64;
        for t in self.points(lo, hi, knots) {
            a.eval_into(t, &mut va)?;
            b.eval_into(t, &mut vb)?;
            for (x, y) in va.iter().zip(&vb) {
                best = best.max((x - y).abs());
            }
        }
        Ok(best)
    }
}

pub fn sup_norm_diff(a: &dyn History, b: &dyn History, reach: f64) -> Result<f64, HistoryError> {
    ProbeGrid::default().sup_norm_diff(a, b, reach)
}

pub fn sup_norm(a: &dyn History, reach: f64) -> Result<f64, HistoryError> {
    ProbeGrid::default().sup_norm(a, reach)
}

pub fn lip_const(a: &dyn History, reach: f64) -> Result<f64, HistoryError> {
    ProbeGrid::default().lip_const(a, reach)
}

pub fn support_of_difference(
    a: &dyn History,
    b: &dyn History,
    reach: f64,
    tol: f64,
) -> Result<Option<f64>, HistoryError> {
    ProbeGrid::default().support_of_difference(a, b, reach, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::{InitialHistory, PastInterval, Segment, Trajectory};
    use std::f64::consts::PI;

    fn closed(interval: PastInterval, f: fn(f64) -> f64) -> InitialHistory {
        InitialHistory::from_fn(interval, 1, move |t, o| o[0] = f(t)).unwrap()
    }

    #[test]
    fn sup_norm_diff_examples() {
        let i = PastInterval::Compact(1.0);
        let one = InitialHistory::constant(i, vec![1.0]);
        let zero = InitialHistory::constant(i, vec![0.0]);
        let lin = closed(i, |t| t);
        assert_eq!(sup_norm_diff(&one, &one, 1.0).unwrap(), 0.0);
        assert_eq!(sup_norm_diff(&one, &zero, 1.0).unwrap(), 1.0);
        assert_eq!(sup_norm_diff(&lin, &zero, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn lip_const_examples() {
        let i = PastInterval::Compact(PI);
        assert_eq!(lip_const(&InitialHistory::constant(i, vec![4.0]), PI).unwrap(), 0.0);
        let slope = lip_const(&closed(i, |t| 3.0 * t), PI).unwrap();
        assert!((slope - 3.0).abs() < 1e-9);
        let sine = lip_const(&closed(i, f64::sin), PI).unwrap();
        // dense finite differences as the oracle
        let n = 200_000;
        let oracle = (0..n)
            .map(|k| {
                let a = -PI + PI * k as f64 / n as f64;
                let b = -PI + PI * (k + 1) as f64 / n as f64;
                (b.sin() - a.sin()).abs() / (b - a)
            })
            .fold(0.0f64, f64::max);
        assert!((oracle - 1.0).abs() < 1e-6);
        assert!((sine - oracle).abs() < 1e-3);
    }

    #[test]
    fn lip_const_uses_stored_derivatives() {
        let seg = Segment::from_fn(-1.0, 0.0, 4, 1, |t, v, d| {
            v[0] = (5.0 * t).sin();
            d[0] = 5.0 * (5.0 * t).cos();
        })
        .unwrap();
        let h = InitialHistory::sampled(PastInterval::Compact(1.0), seg).unwrap();
        assert!((lip_const(&h, 1.0).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn support_examples() {
        let i = PastInterval::Compact(1.0);
        let zero = InitialHistory::constant(i, vec![0.0]);
        assert_eq!(support_of_difference(&zero, &zero, 1.0, 1e-10).unwrap(), None);
        let bump = closed(i, |t| {
            if (-0.5..=-0.2).contains(&t) {
                let u = (t + 0.5) / 0.3;
                16.0 * u * u * (1.0 - u) * (1.0 - u)
            } else {
                0.0
            }
        });
        let s = support_of_difference(&bump, &zero, 1.0, 1e-10).unwrap().unwrap();
        let cell = 1.0 / 32.0;
        assert!(s <= 0.5 && s >= 0.5 - cell, "support {s}");
        assert_eq!(support_of_difference(&bump, &zero, 1.0, 2.0).unwrap(), None);
    }

    #[test]
    fn point_interval_uses_only_zero() {
        let a = InitialHistory::point(vec![1.0, 3.0]);
        let b = InitialHistory::point(vec![0.5, 3.0]);
        assert_eq!(sup_norm_diff(&a, &b, 5.0).unwrap(), 0.5);
        assert_eq!(lip_const(&a, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn sup_norm_diff_triangle_inequality() {
        let i = PastInterval::Compact(2.0);
        let a = closed(i, f64::sin);
        let b = closed(i, f64::cos);
        let c = closed(i, |t| t * t);
        let ab = sup_norm_diff(&a, &b, 2.0).unwrap();
        let bc = sup_norm_diff(&b, &c, 2.0).unwrap();
        let ac = sup_norm_diff(&a, &c, 2.0).unwrap();
        assert!(ac <= ab + bc + 1e-15);
        assert_eq!(ab, sup_norm_diff(&b, &a, 2.0).unwrap());
    }

    #[test]
    fn history_matches_trajectory_evaluation() {
        let init = InitialHistory::constant(PastInterval::Compact(1.0), vec![1.0]);
        let mut traj = Trajectory::new(init, 0.0);
        traj.push(
            Segment::from_fn(0.0, 1.0, 8, 1, |t, v, d| {
                v[0] = 1.0 - t;
                d[0] = -1.0;
            })
            .unwrap(),
        )
        .unwrap();
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let view = traj.history_at(t).unwrap();
            for j in 0..=10 {
                let th = -(j as f64) / 10.0;
                assert_eq!(view.eval(th).unwrap(), Path::eval(&traj, t + th).unwrap());
            }
        }
    }
}

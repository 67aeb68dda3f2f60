use super::HistoryError;

/// A C¹ function on `[t_start, t_end]`, stored as values and derivatives on a
/// uniform grid and evaluated by cubic Hermite interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    t_start: f64,
    t_end: f64,
    dim: usize,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

/// Coefficients of `a + b s + c s^2 + d s^3` on the unit cell.
#[inline]
fn cubic(y0: f64, y1: f64, m0: f64, m1: f64, h: f64) -> [f64; 4] {
    [
        y0,
        h * m0,
        3.0 * (y1 - y0) - h * (2.0 * m0 + m1),
        2.0 * (y0 - y1) + h * (m0 + m1),
    ]
}

impl Segment {
    /// Builds a segment from flat node data (`values[j * dim + i]`).
    pub fn new(
        t_start: f64,
        t_end: f64,
        dim: usize,
        values: Vec<f64>,
        derivs: Vec<f64>,
    ) -> Result<Self, HistoryError> {
        if !(t_start.is_finite() && t_end.is_finite() && t_start < t_end) {
            return Err(HistoryError::InvalidSegment(format!(
                "span [{t_start}, {t_end}] is empty or not finite"
            )));
        }
        if dim == 0 || values.len() != derivs.len() || !values.len().is_multiple_of(dim) {
            return Err(HistoryError::InvalidSegment(format!(
                "node data of lengths {}/{} does not fit dimension {dim}",
                values.len(),
                derivs.len()
            )));
        }
        if values.len() / dim < 2 {
            return Err(HistoryError::InvalidSegment("at least two nodes are required".into()));
        }
        Ok(Segment { t_start, t_end, dim, values, derivs })
    }

    /// Samples `f(t, value, derivative)` on `cells + 1` uniform nodes.
    pub fn from_fn(
        t_start: f64,
        t_end: f64,
        cells: usize,
        dim: usize,
        mut f: impl FnMut(f64, &mut [f64], &mut [f64]),
    ) -> Result<Self, HistoryError> {
        let cells = cells.max(1);
        let mut values = vec![0.0; (cells + 1) * dim];
        let mut derivs = vec![0.0; (cells + 1) * dim];
        let h = (t_end - t_start) / cells as f64;
        for j in 0..=cells {
            let t = if j == cells { t_end } else { t_start + j as f64 * h };
            f(t, &mut values[j * dim..(j + 1) * dim], &mut derivs[j * dim..(j + 1) * dim]);
        }
        Segment::new(t_start, t_end, dim, values, derivs)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn span(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> usize {
        self.values.len() / self.dim - 1
    }

    pub fn step(&self) -> f64 {
        self.span() / self.cells() as f64
    }

    pub fn node_time(&self, j: usize) -> f64 {
        if j == self.cells() {
            self.t_end
        } else {
            self.t_start + j as f64 * self.step()
        }
    }

    pub fn value(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn deriv(&self, j: usize) -> &[f64] {
        &self.derivs[j * self.dim..(j + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivs(&self) -> &[f64] {
        &self.derivs
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t <= self.t_end
    }

    /// Cell index and local coordinate `s ∈ [0, 1]`; `None` for `s` when `t`
    /// hits a node exactly.
    fn locate(&self, t: f64) -> (usize, Option<f64>) {
        let n = self.cells();
        let h = self.step();
        let j = (((t - self.t_start) / h).floor().max(0.0) as usize).min(n - 1);
        let left = self.node_time(j);
        if t == left {
            return (j, None);
        }
        if t == self.node_time(j + 1) {
            return (j + 1, None);
        }
        (j, Some(((t - left) / h).clamp(0.0, 1.0)))
    }

    fn check(&self, t: f64, out: &[f64]) -> Result<(), HistoryError> {
        if out.len() != self.dim {
            return Err(HistoryError::DimensionMismatch { expected: self.dim, found: out.len() });
        }
        if !self.contains(t) {
            return Err(HistoryError::OutOfDomain { t, lower: self.t_start, upper: self.t_end });
        }
        Ok(())
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<(), HistoryError> {
        self.check(t, out)?;
        match self.locate(t) {
            (j, None) => out.copy_from_slice(self.value(j)),
            (j, Some(s)) => {
                let h = self.step();
                let s2 = s * s;
                let s3 = s2 * s;
                let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
                let h10 = s3 - 2.0 * s2 + s;
                let h01 = -2.0 * s3 + 3.0 * s2;
                let h11 = s3 - s2;
                let (y0, y1, m0, m1) = (self.value(j), self.value(j + 1), self.deriv(j), self.deriv(j + 1));
                for i in 0..self.dim {
                    out[i] = h00 * y0[i] + h10 * h * m0[i] + h01 * y1[i] + h11 * h * m1[i];
                }
            }
        }
        Ok(())
    }

    pub fn eval_deriv_into(&self, t: f64, out: &mut [f64]) -> Result<(), HistoryError> {
        self.check(t, out)?;
        match self.locate(t) {
            (j, None) => out.copy_from_slice(self.deriv(j)),
            (j, Some(s)) => {
                let h = self.step();
                let s2 = s * s;
                let d00 = (6.0 * s2 - 6.0 * s) / h;
                let d10 = 3.0 * s2 - 4.0 * s + 1.0;
                let d01 = (-6.0 * s2 + 6.0 * s) / h;
                let d11 = 3.0 * s2 - 2.0 * s;
                let (y0, y1, m0, m1) = (self.value(j), self.value(j + 1), self.deriv(j), self.deriv(j + 1));
                for i in 0..self.dim {
                    out[i] = d00 * y0[i] + d10 * m0[i] + d01 * y1[i] + d11 * m1[i];
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>, HistoryError> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    pub fn eval_deriv(&self, t: f64) -> Result<Vec<f64>, HistoryError> {
        let mut out = vec![0.0; self.dim];
        self.eval_deriv_into(t, &mut out)?;
        Ok(out)
    }

    /// Largest node value in the ∞-norm.
    pub fn max_node_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max_node_slope(&self) -> f64 {
        self.derivs.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Exact supremum of the Hermite interpolant in the ∞-norm.
    pub fn sup_norm_exact(&self) -> f64 {
        let h = self.step();
        let mut best = 0.0f64;
        for j in 0..self.cells() {
            for i in 0..self.dim {
                let [a, b, c, d] = cubic(
                    self.values[j * self.dim + i],
                    self.values[(j + 1) * self.dim + i],
                    self.derivs[j * self.dim + i],
                    self.derivs[(j + 1) * self.dim + i],
                    h,
                );
                let p = |s: f64| a + s * (b + s * (c + s * d));
                best = best.max(p(0.0).abs()).max(p(1.0).abs());
                // critical points of p: b + 2c s + 3d s^2 = 0
                for s in quadratic_roots(3.0 * d, 2.0 * c, b) {
                    if s > 0.0 && s < 1.0 {
                        best = best.max(p(s).abs());
                    }
                }
            }
        }
        best
    }

    /// Exact supremum of the interpolant's derivative in the ∞-norm.
    pub fn sup_deriv_exact(&self) -> f64 {
        let h = self.step();
        let mut best = 0.0f64;
        for j in 0..self.cells() {
            for i in 0..self.dim {
                let [_, b, c, d] = cubic(
                    self.values[j * self.dim + i],
                    self.values[(j + 1) * self.dim + i],
                    self.derivs[j * self.dim + i],
                    self.derivs[(j + 1) * self.dim + i],
                    h,
                );
                let q = |s: f64| (b + s * (2.0 * c + 3.0 * d * s)) / h;
                best = best.max(q(0.0).abs()).max(q(1.0).abs());
                if d != 0.0 {
                    let s = -c / (3.0 * d);
                    if s > 0.0 && s < 1.0 {
                        best = best.max(q(s).abs());
                    }
                }
            }
        }
        best
    }

    /// Node-wise linear combination `alpha * self + beta * other` on a shared grid.
    pub fn combine(&self, alpha: f64, other: &Segment, beta: f64) -> Result<Segment, HistoryError> {
        self.same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| alpha * a + beta * b).collect();
        let derivs = self.derivs.iter().zip(&other.derivs).map(|(a, b)| alpha * a + beta * b).collect();
        Segment::new(self.t_start, self.t_end, self.dim, values, derivs)
    }

    pub fn same_grid(&self, other: &Segment) -> Result<(), HistoryError> {
        if self.t_start != other.t_start
            || self.t_end != other.t_end
            || self.dim != other.dim
            || self.cells() != other.cells()
        {
            return Err(HistoryError::SpanMismatch {
                left: (self.t_start, self.t_end, self.cells()),
                right: (other.t_start, other.t_end, other.cells()),
            });
        }
        Ok(())
    }

    /// Shifts the time axis by `dt`, keeping node data.
    pub fn shifted(&self, dt: f64) -> Result<Segment, HistoryError> {
        Segment::new(self.t_start + dt, self.t_end + dt, self.dim, self.values.clone(), self.derivs.clone())
    }

    /// Resamples the interpolant (values and derivatives) on a finer grid.
    pub fn resampled(&self, cells: usize) -> Result<Segment, HistoryError> {
        let dim = self.dim;
        Segment::from_fn(self.t_start, self.t_end, cells, dim, |t, v, d| {
            self.eval_into(t, v).expect("node inside span");
            self.eval_deriv_into(t, d).expect("node inside span");
        })
    }
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        if b == 0.0 {
            return vec![];
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let sq = disc.sqrt();
    // numerically stable pair
    let q = -0.5 * (b + b.signum() * sq);
    let mut roots = vec![q / a];
    if q != 0.0 {
        roots.push(c / q);
    }
    roots
}

/// Differences between two segments on a shared grid, measured at nodes and
/// cell midpoints: `(value sup, derivative sup)`.
fn node_midpoint_gaps(a: &Segment, b: &Segment) -> Result<(f64, f64), HistoryError> {
    a.same_grid(b)?;
    let diff = a.combine(1.0, b, -1.0)?;
    let mut value = diff.max_node_norm();
    let mut slope = diff.max_node_slope();
    let mut buf = vec![0.0; a.dim];
    for j in 0..diff.cells() {
        let mid = 0.5 * (diff.node_time(j) + diff.node_time(j + 1));
        diff.eval_into(mid, &mut buf)?;
        value = buf.iter().fold(value, |m, v| m.max(v.abs()));
        diff.eval_deriv_into(mid, &mut buf)?;
        slope = buf.iter().fold(slope, |m, v| m.max(v.abs()));
    }
    Ok((value, slope))
}

/// Sup-distance between two prolongations sharing a span and grid.
pub fn rho0(a: &Segment, b: &Segment) -> Result<f64, HistoryError> {
    Ok(node_midpoint_gaps(a, b)?.0)
}

/// C¹-distance: value sup plus derivative sup.
pub fn rho1(a: &Segment, b: &Segment) -> Result<f64, HistoryError> {
    let (v, d) = node_midpoint_gaps(a, b)?;
    Ok(v + d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(t0: f64, t1: f64, cells: usize, c: f64, slope: f64) -> Segment {
        Segment::from_fn(t0, t1, cells, 1, |t, v, d| {
            v[0] = c + slope * (t - t0);
            d[0] = slope;
        })
        .unwrap()
    }

    #[test]
    fn rejects_degenerate_spans() {
        assert!(Segment::new(1.0, 1.0, 1, vec![0.0, 0.0], vec![0.0, 0.0]).is_err());
        assert!(Segment::new(0.0, 1.0, 1, vec![0.0], vec![0.0]).is_err());
        assert!(Segment::new(0.0, 1.0, 2, vec![0.0; 3], vec![0.0; 3]).is_err());
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t - t * t * t;
        let df = |t: f64| -2.0 + t - 3.0 * t * t;
        let seg = Segment::from_fn(-1.0, 2.0, 5, 1, |t, v, d| {
            v[0] = f(t);
            d[0] = df(t);
        })
        .unwrap();
        for k in 0..=60 {
            let t = -1.0 + 3.0 * k as f64 / 60.0;
            assert!((seg.eval(t).unwrap()[0] - f(t)).abs() < 1e-13);
            assert!((seg.eval_deriv(t).unwrap()[0] - df(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_span_is_an_error() {
        let seg = line(0.0, 1.0, 4, 0.0, 1.0);
        assert!(matches!(seg.eval(1.5), Err(HistoryError::OutOfDomain { .. })));
    }

    #[test]
    fn rho_examples() {
        let a = Segment::from_fn(0.0, 1.0, 8, 1, |t, v, d| {
            v[0] = t.sin();
            d[0] = t.cos();
        })
        .unwrap();
        assert_eq!(rho0(&a, &a).unwrap(), 0.0);
        assert_eq!(rho1(&a, &a).unwrap(), 0.0);

        let shifted = a.combine(1.0, &line(0.0, 1.0, 8, 0.75, 0.0), 1.0).unwrap();
        assert!((rho0(&a, &shifted).unwrap() - 0.75).abs() < 1e-14);
        assert!((rho1(&a, &shifted).unwrap() - 0.75).abs() < 1e-14);

        let tilted = a.combine(1.0, &line(0.0, 1.0, 8, 0.0, 1.0), 1.0).unwrap();
        assert!((rho0(&a, &tilted).unwrap() - 1.0).abs() < 1e-14);
        assert!((rho1(&a, &tilted).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rho_requires_matching_grids() {
        let a = line(0.0, 1.0, 4, 0.0, 1.0);
        let b = line(0.0, 1.0, 8, 0.0, 1.0);
        let c = line(0.0, 2.0, 4, 0.0, 1.0);
        assert!(matches!(rho0(&a, &b), Err(HistoryError::SpanMismatch { .. })));
        assert!(matches!(rho1(&a, &c), Err(HistoryError::SpanMismatch { .. })));
    }

    #[test]
    fn exact_sup_catches_interior_extrema() {
        // sin on [0, pi] with coarse grid; true sup of interpolant near 1
        let seg = Segment::from_fn(0.0, std::f64::consts::PI, 3, 1, |t, v, d| {
            v[0] = t.sin();
            d[0] = t.cos();
        })
        .unwrap();
        let dense = (0..=10_000)
            .map(|k| seg.eval(std::f64::consts::PI * k as f64 / 10_000.0).unwrap()[0].abs())
            .fold(0.0f64, f64::max);
        let exact = seg.sup_norm_exact();
        assert!(exact >= dense - 1e-15);
        assert!(exact - dense < 1e-7);
        let dense_d = (0..=10_000)
            .map(|k| seg.eval_deriv(std::f64::consts::PI * k as f64 / 10_000.0).unwrap()[0].abs())
            .fold(0.0f64, f64::max);
        assert!(seg.sup_deriv_exact() >= dense_d - 1e-15);
    }

    fn arb_segment() -> impl Strategy<Value = (Segment, Segment)> {
        (1usize..6, proptest::collection::vec(-3.0f64..3.0, 28)).prop_map(|(cells, data)| {
            let n = cells + 1;
            let a = Segment::new(0.0, 1.0, 1, data[..n].to_vec(), data[7..7 + n].to_vec()).unwrap();
            let b = Segment::new(0.0, 1.0, 1, data[14..14 + n].to_vec(), data[21..21 + n].to_vec()).unwrap();
            (a, b)
        })
    }

    proptest! {
        #[test]
        fn nodes_reproduce_stored_data((a, _b) in arb_segment()) {
            for j in 0..=a.cells() {
                let t = a.node_time(j);
                prop_assert_eq!(a.eval(t).unwrap()[0], a.value(j)[0]);
                prop_assert_eq!(a.eval_deriv(t).unwrap()[0], a.deriv(j)[0]);
            }
        }

        #[test]
        fn rho1_dominates_rho0((a, b) in arb_segment()) {
            let r0 = rho0(&a, &b).unwrap();
            let r1 = rho1(&a, &b).unwrap();
            prop_assert!(r1 >= r0);
            prop_assert!((rho0(&b, &a).unwrap() - r0).abs() < 1e-15);
        }
    }
}

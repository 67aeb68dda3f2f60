use super::SolveError;
use crate::functional::HistoryFunctional;
use crate::history::{History, Prolongation, Segment};

/// One sweep of the integral operator plus its midpoint defect.
pub(crate) struct Sweep {
    pub image: Segment,
    /// `max_j h_j ‖F(m_j, I_{m_j} γ) - γ'(m_j)‖∞` over cell midpoints `m_j`.
    pub defect: f64,
}

pub(crate) fn sweep(f: &HistoryFunctional, psi: &dyn History, gamma: &Segment) -> Result<Sweep, SolveError> {
    let dim = gamma.dim();
    let path = Prolongation::new(psi, gamma);
    let cells = gamma.cells();
    let mut derivs = vec![0.0; (cells + 1) * dim];
    let eval = |u: f64, out: &mut [f64]| -> Result<(), SolveError> {
        f.eval_into(u, &path.view(u), out).map_err(|_| SolveError::DomainExit { t: u })
    };
    for j in 0..=cells {
        eval(gamma.node_time(j), &mut derivs[j * dim..(j + 1) * dim])?;
    }
    let mut values = vec![0.0; (cells + 1) * dim];
    values[..dim].copy_from_slice(&psi.head()?);
    let mut mid = vec![0.0; dim];
    let mut slope = vec![0.0; dim];
    let mut defect = 0.0f64;
    for j in 0..cells {
        let (a, b) = (gamma.node_time(j), gamma.node_time(j + 1));
        let h = b - a;
        let m = 0.5 * (a + b);
        eval(m, &mut mid)?;
        gamma.eval_deriv_into(m, &mut slope)?;
        for i in 0..dim {
            let (d0, d1) = (derivs[j * dim + i], derivs[(j + 1) * dim + i]);
            values[(j + 1) * dim + i] = values[j * dim + i] + h / 6.0 * (d0 + 4.0 * mid[i] + d1);
            defect = defect.max(h * (mid[i] - slope[i]).abs());
        }
    }
    let image = Segment::new(gamma.t_start(), gamma.t_end(), dim, values, derivs)?;
    Ok(Sweep { image, defect })
}

/// `(𝒯γ)(t) = ψ(0) + ∫_σ^t F(u, I_u γ) du` on the grid of `γ`.
///
/// Node derivatives are `F(u_j, I_{u_j} γ)`; node values accumulate a
/// per-cell Simpson rule with one extra evaluation at each cell midpoint.
pub fn picard_apply(f: &HistoryFunctional, psi: &dyn History, gamma: &Segment) -> Result<Segment, SolveError> {
    Ok(sweep(f, psi, gamma)?.image)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::functional::{build_constant_lag, build_trivial, HistoryFunctional, VectorField};
    use crate::history::{InitialHistory, PastInterval};

    fn constant_segment(t0: f64, t1: f64, c: f64) -> Segment {
        Segment::from_fn(t0, t1, 8, 1, |_, v, d| {
            v[0] = c;
            d[0] = 0.0;
        })
        .unwrap()
    }

    #[test]
    fn trivial_functional_gives_the_line() {
        let i = PastInterval::Compact(1.0);
        let psi = InitialHistory::constant(i, vec![2.0]);
        let f = build_trivial(vec![0.5], i);
        let gamma = Segment::from_fn(1.0, 1.5, 8, 1, |t, v, d| {
            v[0] = 2.0 + t.sin() - 1f64.sin();
            d[0] = t.cos();
        })
        .unwrap();
        let img = picard_apply(&f, &psi, &gamma).unwrap();
        for j in 0..=8 {
            let t = img.node_time(j);
            assert!((img.value(j)[0] - (2.0 + 0.5 * (t - 1.0))).abs() < 1e-15);
            assert_eq!(img.deriv(j)[0], 0.5);
        }
    }

    #[test]
    fn linear_ode_on_constant_guess_is_exact() {
        let psi = InitialHistory::point(vec![1.0]);
        let f = HistoryFunctional::new(PastInterval::Point, Arc::new(|_, phi, out| {
            out[0] = phi.head()?[0];
            Ok(())
        }));
        let img = picard_apply(&f, &psi, &constant_segment(0.0, 0.5, 1.0)).unwrap();
        for j in 0..=8 {
            assert!((img.value(j)[0] - (1.0 + img.node_time(j))).abs() < 1e-15);
        }
    }

    #[test]
    fn lag_step_is_exact_within_the_delay() {
        let i = PastInterval::Compact(1.0);
        let psi = InitialHistory::constant(i, vec![1.0]);
        let neg: VectorField = Arc::new(|_, _, y, out| {
            out[0] = -y[0];
            Ok(())
        });
        let f = build_constant_lag(neg, 1.0, i).unwrap();
        let img = picard_apply(&f, &psi, &constant_segment(0.0, 1.0, 1.0)).unwrap();
        for j in 0..=8 {
            assert!((img.value(j)[0] - (1.0 - img.node_time(j))).abs() < 1e-15);
        }
    }

    #[test]
    fn domain_exit_names_the_node() {
        let i = PastInterval::Compact(1.0);
        let psi = InitialHistory::constant(i, vec![0.0]);
        let f = build_trivial(vec![1.0], i).with_domain(Arc::new(|t, _| t < 0.3));
        let gamma = constant_segment(0.0, 1.0, 0.0);
        match picard_apply(&f, &psi, &gamma) {
            Err(SolveError::DomainExit { t }) => assert_eq!(t, 0.375),
            other => panic!("{other:?}"),
        }
    }
}

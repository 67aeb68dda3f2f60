use super::SolveError;
use crate::functional::VectorField;
use crate::history::{HistoryError, InitialHistory, PastInterval, Path, Segment, Trajectory};

/// Method of steps for `x'(t) = f(t, x(t), x(t - r))` with classical RK4.
///
/// Each lag interval `[t0 + kr, t0 + (k+1)r]` becomes one segment whose
/// nodes are the RK4 steps; delayed values come from the initial history or
/// the Hermite interpolant of earlier segments.
pub fn step_method_solve(
    f: &VectorField,
    r: f64,
    initial: InitialHistory,
    t0: f64,
    t_final: f64,
    h: f64,
) -> Result<Trajectory, SolveError> {
    if !(r > 0.0 && h > 0.0) {
        return Err(SolveError::InvalidOptions(format!("lag {r} and step {h} must be positive")));
    }
    if let PastInterval::Compact(len) = crate::history::History::interval(&initial) {
        if r > len {
            return Err(HistoryError::OutOfDomain { t: -r, lower: -len, upper: 0.0 }.into());
        }
    }
    let n = crate::history::History::dim(&initial);
    let mut traj = Trajectory::new(initial, t0);
    let rhs = |traj: &Trajectory, t: f64, x: &[f64], out: &mut [f64]| -> Result<(), SolveError> {
        let y = Path::eval(traj, t - r)?;
        f(t, x, &y, out)?;
        Ok(())
    };
    let mut k = 0u64;
    while traj.t_end() < t_final {
        let a = traj.t_end();
        let b = (t0 + (k + 1) as f64 * r).min(t_final);
        k += 1;
        if b <= a {
            continue;
        }
        let steps = ((b - a) / h).ceil().max(1.0) as usize;
        let dt = (b - a) / steps as f64;
        let mut values = Vec::with_capacity((steps + 1) * n);
        let mut derivs = Vec::with_capacity((steps + 1) * n);
        let mut x = Path::eval(&traj, a)?;
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut tmp = vec![0.0; n];
        for j in 0..steps {
            let t = if j == 0 { a } else { a + j as f64 * dt };
            rhs(&traj, t, &x, &mut k1)?;
            values.extend_from_slice(&x);
            derivs.extend_from_slice(&k1);
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * dt * k1[i];
            }
            rhs(&traj, t + 0.5 * dt, &tmp, &mut k2)?;
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * dt * k2[i];
            }
            rhs(&traj, t + 0.5 * dt, &tmp, &mut k3)?;
            for i in 0..n {
                tmp[i] = x[i] + dt * k3[i];
            }
            let t_next = if j + 1 == steps { b } else { a + (j + 1) as f64 * dt };
            rhs(&traj, t_next, &tmp, &mut k4)?;
            for i in 0..n {
                x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        rhs(&traj, b, &x, &mut k1)?;
        values.extend_from_slice(&x);
        derivs.extend_from_slice(&k1);
        traj.push(Segment::new(a, b, n, values, derivs)?)?;
    }
    Ok(traj)
}

fn pantograph_coefficients(a: f64, b: f64, lambda: f64, x0: f64, n_terms: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(n_terms.max(1));
    c.push(x0);
    let mut lam_n = 1.0;
    for n in 0..n_terms.saturating_sub(1) {
        let next = (a * lam_n + b) * c[n] / (n + 1) as f64;
        c.push(next);
        lam_n *= lambda;
    }
    c
}

/// Truncated power series `Σ c_n t^n` for `x'(t) = a x(λt) + b x(t)`,
/// `x(0) = x0`.
pub fn pantograph_series(a: f64, b: f64, lambda: f64, x0: f64, t: f64, n_terms: usize) -> f64 {
    let c = pantograph_coefficients(a, b, lambda, x0, n_terms);
    c.iter().rev().fold(0.0, |acc, cn| acc * t + cn)
}

/// Term-wise derivative of [`pantograph_series`].
pub fn pantograph_series_deriv(a: f64, b: f64, lambda: f64, x0: f64, t: f64, n_terms: usize) -> f64 {
    let c = pantograph_coefficients(a, b, lambda, x0, n_terms);
    c.iter().enumerate().skip(1).rev().fold(0.0, |acc, (n, cn)| acc * t + n as f64 * cn)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;

    #[test]
    fn lag_step_values() {
        let i = PastInterval::Compact(1.0);
        let f: VectorField = Arc::new(|_, _, y, out| {
            out[0] = -y[0];
            Ok(())
        });
        let traj = step_method_solve(&f, 1.0, InitialHistory::constant(i, vec![1.0]), 0.0, 3.0, 1e-2).unwrap();
        let x = |t: f64| Path::eval(&traj, t).unwrap()[0];
        assert!(x(1.0).abs() < 1e-12);
        assert!((x(2.0) + 0.5).abs() < 1e-10);
        // on [2, 3]: x(t) = -1/2 + (t-2)^2/2 - (t-2)^3/6
        let exact3 = -0.5 + 0.5 - 1.0 / 6.0;
        assert!((x(3.0) - exact3).abs() < 1e-10);
    }

    #[test]
    fn independent_of_y_is_plain_rk4() {
        let i = PastInterval::Compact(0.5);
        let f: VectorField = Arc::new(|_, x, _, out| {
            out[0] = x[0];
            Ok(())
        });
        let traj = step_method_solve(&f, 0.5, InitialHistory::constant(i, vec![1.0]), 0.0, 1.0, 1e-3).unwrap();
        assert!((Path::eval(&traj, 1.0).unwrap()[0] - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn series_examples() {
        assert_eq!(pantograph_series(1.0, 0.0, 0.5, 3.0, 0.0, 30), 3.0);
        let v = pantograph_series(1.0, 0.0, 0.5, 1.0, 1.0, 30);
        // independent check: direct summation of 1/(n! 2^{n(n-1)/2})
        let mut direct = 0.0;
        let mut fact = 1.0;
        for n in 0..30 {
            if n > 0 {
                fact *= n as f64;
            }
            direct += 1.0 / (fact * 2f64.powf((n * (n - 1)) as f64 / 2.0));
        }
        assert!((v - direct).abs() < 1e-14);
        assert!((v - 2.2714925).abs() < 1e-6, "{v}");
        let e = pantograph_series(0.0, 0.7, 0.5, 2.0, 1.3, 40);
        assert!((e - 2.0 * (0.7f64 * 1.3).exp()).abs() < 1e-12);
        let d = pantograph_series_deriv(0.0, 0.7, 0.5, 2.0, 1.3, 40);
        assert!((d - 1.4 * (0.7f64 * 1.3).exp()).abs() < 1e-12);
    }
}

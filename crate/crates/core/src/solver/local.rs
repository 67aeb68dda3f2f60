use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::picard::sweep;
use super::{LipschitzSource, SolveError, SolveOptions};
use crate::functional::{estimate_lipschitz, EstimateRequest, FunctionalError, HistoryFunctional, LipschitzMode};
use crate::history::{inf_norm, rho1, History, Prolongation, Segment};
use crate::par::sub_seed;
use crate::transforms::{random_prolongation_with, RectangleSpec, Wedge};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveDiagnostics {
    pub sigma: f64,
    pub chosen_t: f64,
    pub estimated_m: f64,
    pub estimated_l: f64,
    pub picard_iterations: usize,
    /// `ρ¹(γ_{k+1}, γ_k) / ρ¹(γ_k, γ_{k-1})`, recorded while the denominator
    /// is well above the tolerance.
    pub contraction_ratios: Vec<f64>,
    pub cells: usize,
    pub refinements: usize,
    pub halvings: usize,
    /// Midpoint defect of the accepted grid.
    pub defect: f64,
}

/// `T = min{T_cap, δ/(4M), 1/(4L)}` with `M, L` floored at `1e-12`.
pub fn choose_horizon(m: f64, l: f64, delta: f64, t_cap: f64) -> f64 {
    let m = m.max(1e-12);
    let l = l.max(1e-12);
    t_cap.min(delta / (4.0 * m)).min(1.0 / (4.0 * l))
}

fn lipschitz_constant(f: &HistoryFunctional, sigma: f64, psi: &dyn History, horizon: f64, opts: &SolveOptions) -> f64 {
    match opts.lipschitz_source {
        LipschitzSource::UserProvided(l) => l,
        LipschitzSource::Estimated { samples, seed } => {
            let req = EstimateRequest {
                exec: opts.exec,
                ..EstimateRequest::new(
                    LipschitzMode::AboutC1Prolongations,
                    horizon,
                    opts.radius,
                    samples,
                    sub_seed(seed, sigma.to_bits()),
                )
            };
            match estimate_lipschitz(f, sigma, psi, &req) {
                Ok(est) => est.value,
                Err(_) => 0.0,
            }
        }
    }
}

/// Max of `‖F‖` along the `∧v` ray and over a few random C¹-prolongations.
fn local_bound(
    f: &HistoryFunctional,
    sigma: f64,
    psi: &dyn History,
    v: &[f64],
    horizon: f64,
    opts: &SolveOptions,
) -> f64 {
    let mut m = inf_norm(v);
    let Ok(ray) = Wedge::new(psi, sigma, v) else {
        return m;
    };
    for k in 1..=8 {
        let u = sigma + horizon * k as f64 / 8.0;
        if let Ok(y) = f.eval(u, &ray.history(u - sigma)) {
            m = m.max(inf_norm(&y));
        }
    }
    let seed = match opts.lipschitz_source {
        LipschitzSource::Estimated { seed, .. } => seed,
        LipschitzSource::UserProvided(_) => 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed ^ 0xb0b0, sigma.to_bits()));
    let spec = RectangleSpec::c1(sigma, psi, horizon, opts.radius, v);
    let cells = ((horizon * 64.0).ceil() as usize).max(8);
    for _ in 0..opts.bound_samples {
        let Ok(seg) = random_prolongation_with(&spec, horizon, rng.gen(), cells) else {
            continue;
        };
        let u = sigma + horizon * rng.gen_range(0.0..=1.0);
        let gamma = Prolongation::new(psi, &seg);
        if let Ok(y) = f.eval(u, &gamma.view(u)) {
            m = m.max(inf_norm(&y));
        }
    }
    m
}

enum Failure {
    Domain(f64),
    NotConverged { last_ratio: f64 },
}

struct Converged {
    segment: Segment,
    iterations: usize,
    ratios: Vec<f64>,
    refinements: usize,
    defect: f64,
}

fn iterate(
    f: &HistoryFunctional,
    psi: &dyn History,
    start: Segment,
    opts: &SolveOptions,
) -> Result<Converged, Failure> {
    let mut gamma = start;
    let mut iterations = 0;
    let mut ratios = Vec::new();
    let mut refinements = 0;
    loop {
        let mut prev_diff: Option<f64> = None;
        let mut last_ratio = 0.0;
        let mut level_iters = 0;
        let (segment, defect) = loop {
            if level_iters == opts.max_picard_iters {
                return Err(Failure::NotConverged { last_ratio });
            }
            let s = match sweep(f, psi, &gamma) {
                Ok(s) => s,
                Err(SolveError::DomainExit { t }) => return Err(Failure::Domain(t)),
                Err(_) => return Err(Failure::Domain(gamma.t_start())),
            };
            level_iters += 1;
            iterations += 1;
            let diff = rho1(&s.image, &gamma).unwrap_or(f64::INFINITY);
            let scale = s.image.max_node_norm().max(gamma.max_node_norm())
                + s.image.max_node_slope().max(gamma.max_node_slope());
            let tol = opts.fixed_point_tol * scale.max(1.0);
            if !diff.is_finite() {
                return Err(Failure::NotConverged { last_ratio: f64::INFINITY });
            }
            if let Some(p) = prev_diff {
                if p > 10.0 * tol {
                    last_ratio = diff / p;
                    ratios.push(last_ratio);
                }
            }
            prev_diff = Some(diff);
            let defect = s.defect;
            gamma = s.image;
            if diff <= tol {
                break (gamma.clone(), defect);
            }
        };
        let scale = segment.max_node_norm().max(1.0);
        if defect <= opts.refine_tol * scale || refinements == opts.max_refinements {
            return Ok(Converged { segment, iterations, ratios, refinements, defect });
        }
        refinements += 1;
        gamma = segment.resampled(2 * segment.cells()).map_err(|_| Failure::Domain(segment.t_start()))?;
    }
}

/// Picard iteration from an arbitrary start on its own grid, without
/// refinement. Returns the fixed point and the sweep count.
pub(crate) fn fixed_point_from(
    f: &HistoryFunctional,
    psi: &dyn History,
    start: Segment,
    opts: &SolveOptions,
) -> Result<(Segment, usize), SolveError> {
    let fixed = SolveOptions { max_refinements: 0, ..opts.clone() };
    let sigma = start.t_start();
    match iterate(f, psi, start, &fixed) {
        Ok(c) => Ok((c.segment, c.iterations)),
        Err(Failure::Domain(t)) => Err(SolveError::DomainExit { t }),
        Err(Failure::NotConverged { .. }) => Err(SolveError::PicardDiverged { t: sigma }),
    }
}

/// A local solution on `[σ, σ + T]` with `T` from the step rule.
pub fn solve_local(
    f: &HistoryFunctional,
    sigma: f64,
    psi: &dyn History,
    opts: &SolveOptions,
) -> Result<(Segment, SolveDiagnostics), SolveError> {
    solve_local_until(f, sigma, psi, opts, f64::INFINITY)
}

/// As [`solve_local`], with the span clipped so the segment ends no later
/// than `t_limit` (and exactly at it when clipped).
pub fn solve_local_until(
    f: &HistoryFunctional,
    sigma: f64,
    psi: &dyn History,
    opts: &SolveOptions,
    t_limit: f64,
) -> Result<(Segment, SolveDiagnostics), SolveError> {
    opts.validate()?;
    let v = match f.eval(sigma, psi) {
        Ok(v) => v,
        Err(FunctionalError::History(e)) => return Err(e.into()),
        Err(_) => return Err(SolveError::DomainExit { t: sigma }),
    };
    // M and L are taken over the rectangle of the step they produce: search
    // for the largest scan horizon h whose rule step is at least h
    let rule = |h: f64| {
        let l = lipschitz_constant(f, sigma, psi, h, opts);
        let m = local_bound(f, sigma, psi, &v, h, opts);
        (choose_horizon(m, l, opts.radius, h), m, l)
    };
    let (mut span, mut m, mut l) = rule(opts.t_cap);
    if span < 0.5 * opts.t_cap {
        let mut hi = opts.t_cap;
        let mut lo = span;
        for _ in 0..12 {
            let (t, m_lo, l_lo) = rule(lo);
            (span, m, l) = (t, m_lo, l_lo);
            if t >= lo || t < opts.t_min {
                break;
            }
            hi = lo;
            lo = t;
        }
        lo = span;
        for _ in 0..6 {
            if hi <= 1.5 * lo {
                break;
            }
            let mid = (lo * hi).sqrt();
            let (t, m_mid, l_mid) = rule(mid);
            if t >= mid {
                (lo, m, l) = (mid, m_mid, l_mid);
            } else {
                hi = mid;
            }
        }
        span = lo;
    }
    let remaining = t_limit - sigma;
    if span < opts.t_min && span < remaining {
        return Err(SolveError::StepCollapse { t: sigma, span });
    }
    let ray = Wedge::new(psi, sigma, &v)?;
    let mut halvings = 0;
    loop {
        let clipped = span >= remaining;
        let end = if clipped { t_limit } else { sigma + span };
        let width = end - sigma;
        let cells = ((width * opts.grid_nodes_per_unit as f64).ceil() as usize).max(4);
        let start = ray.segment_to(end, cells)?;
        match iterate(f, psi, start, opts) {
            Ok(c) => {
                let diag = SolveDiagnostics {
                    sigma,
                    chosen_t: width,
                    estimated_m: m,
                    estimated_l: l,
                    picard_iterations: c.iterations,
                    contraction_ratios: c.ratios,
                    cells: c.segment.cells(),
                    refinements: c.refinements,
                    halvings,
                    defect: c.defect,
                };
                return Ok((c.segment, diag));
            }
            Err(failure) => {
                span = width / 2.0;
                halvings += 1;
                if span < opts.t_min {
                    return Err(match failure {
                        Failure::Domain(t) => SolveError::DomainExit { t },
                        Failure::NotConverged { last_ratio } if last_ratio > 1.0 => {
                            SolveError::PicardDiverged { t: sigma }
                        }
                        Failure::NotConverged { .. } => SolveError::StepCollapse { t: sigma, span: width },
                    });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::functional::{build_constant_lag, build_ode, build_trivial, OdeField, VectorField};
    use crate::history::{InitialHistory, PastInterval};
    use crate::solver::picard_apply;

    #[test]
    fn horizon_rule_examples() {
        assert_eq!(choose_horizon(1.0, 1.0, 1.0, 1.0), 0.25);
        assert_eq!(choose_horizon(2.0, 0.0, 1.0, 1.0), 0.125);
        assert_eq!(choose_horizon(0.0, 0.0, 1.0, 0.3), 0.3);
        assert!(choose_horizon(1e6, 1.0, 1.0, 1.0) <= 2.5e-7);
    }

    #[test]
    fn trivial_converges_in_one_sweep() {
        let i = PastInterval::Compact(1.0);
        let psi = InitialHistory::from_fn(i, 2, |t, o| {
            o[0] = t.sin();
            o[1] = 3.0;
        })
        .unwrap();
        let f = build_trivial(vec![1.0, -2.0], i);
        let (seg, diag) = solve_local(&f, 0.0, &psi, &SolveOptions::default()).unwrap();
        assert_eq!(diag.picard_iterations, 1);
        for j in 0..=seg.cells() {
            let t = seg.node_time(j);
            assert!((seg.value(j)[0] - t).abs() < 1e-15);
            assert!((seg.value(j)[1] - (3.0 - 2.0 * t)).abs() < 1e-15);
        }
    }

    #[test]
    fn lag_segment_matches_closed_form() {
        let i = PastInterval::Compact(1.0);
        let psi = InitialHistory::constant(i, vec![1.0]);
        let neg: VectorField = Arc::new(|_, _, y, out| {
            out[0] = -y[0];
            Ok(())
        });
        let f = build_constant_lag(neg, 1.0, i).unwrap();
        let (seg, diag) = solve_local(&f, 0.0, &psi, &SolveOptions::default()).unwrap();
        assert!(diag.chosen_t <= 0.25);
        for k in 0..=50 {
            let t = seg.t_end() * k as f64 / 50.0;
            assert!((seg.eval(t).unwrap()[0] - (1.0 - t)).abs() < 1e-8);
        }
    }

    #[test]
    fn converged_segment_is_a_fixed_point() {
        let f: OdeField = Arc::new(|t, x, out| {
            out[0] = -x[0] + t.sin();
            Ok(())
        });
        let func = build_ode(f, PastInterval::Point).unwrap();
        let psi = InitialHistory::point(vec![0.5]);
        let opts = SolveOptions::default();
        let (seg, diag) = solve_local(&func, 0.0, &psi, &opts).unwrap();
        let again = picard_apply(&func, &psi, &seg).unwrap();
        assert!(rho1(&again, &seg).unwrap() <= 10.0 * opts.fixed_point_tol);
        assert!(diag.contraction_ratios.iter().all(|r| *r <= 0.55), "{:?}", diag.contraction_ratios);
    }

    #[test]
    fn domain_exit_shrinks_the_step() {
        let i = PastInterval::Compact(1.0);
        let psi = InitialHistory::constant(i, vec![0.0]);
        let f = build_trivial(vec![1.0], i).with_domain(Arc::new(|t, _| t < 0.1));
        let (seg, diag) = solve_local(&f, 0.0, &psi, &SolveOptions::default()).unwrap();
        assert!(seg.t_end() < 0.1);
        assert!(diag.halvings >= 1);
        let err = solve_local(&f, 0.2, &psi, &SolveOptions::default()).unwrap_err();
        assert_eq!(err, SolveError::DomainExit { t: 0.2 });
    }

    #[test]
    fn clipped_segment_ends_exactly() {
        let i = PastInterval::Compact(1.0);
        let psi = InitialHistory::constant(i, vec![0.0]);
        let f = build_trivial(vec![1.0], i);
        let (seg, _) = solve_local_until(&f, 0.0, &psi, &SolveOptions::default(), 0.1).unwrap();
        assert_eq!(seg.t_end(), 0.1);
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{DelayFunctional, FunctionalError, HistoryFunctional};
use crate::history::{History, HistoryView, PastInterval, ProbeGrid, Prolongation, Segment};
use crate::par::{sub_seed, Exec};
use crate::transforms::{random_bump, random_prolongation_with, Bumped, Order, RectangleSpec};

const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum LipschitzMode {
    AboutProlongations,
    AboutC1Prolongations,
    /// Pairs whose difference is supported in `[-reach, 0]`.
    AboutMemories { reach: f64 },
    /// Pairs with `lip(φ_i) ≤ bound`; on the whole past the bound applies on
    /// windows `[-k, 0]` with `M_k` from `schedule` (default `M·k`).
    AlmostLocal { bound: f64, schedule: Option<Vec<f64>> },
}

#[derive(Clone, Debug)]
pub struct EstimateRequest {
    pub mode: LipschitzMode,
    pub horizon: f64,
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
    pub exec: Exec,
    pub grid: ProbeGrid,
}

impl EstimateRequest {
    pub fn new(mode: LipschitzMode, horizon: f64, radius: f64, samples: usize, seed: u64) -> Self {
        EstimateRequest { mode, horizon, radius, samples, seed, exec: Exec::default(), grid: ProbeGrid::default() }
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairRecord {
    pub sample: usize,
    pub t: f64,
    pub numerator: f64,
    pub denominator: f64,
}

/// A sampled lower bound for the local Lipschitz constant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzEstimate {
    pub mode: LipschitzMode,
    pub value: f64,
    /// Pairs that entered the maximum.
    pub samples: usize,
    pub drawn: usize,
    pub max_pair: Option<PairRecord>,
}

/// One drawn pair at a common time `t`.
struct Pair {
    t: f64,
    g1: Segment,
    g2: Option<Segment>,
    bump: Option<Segment>,
}

fn scan_reach(interval: PastInterval, elapsed: f64) -> f64 {
    match interval {
        PastInterval::Compact(r) => r,
        PastInterval::WholePast => elapsed + 1.0,
        PastInterval::Point => 0.0,
    }
}

fn draw_pair(
    spec: &RectangleSpec<'_>,
    memory_reach: Option<f64>,
    seed: u64,
) -> Result<Pair, FunctionalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = spec.horizon;
    let cells = ((horizon * 64.0).ceil() as usize).max(16);
    let g1 = random_prolongation_with(spec, horizon, rng.gen(), cells)?;
    let t = spec.base_time + horizon * rng.gen_range(0.0..=1.0);
    match memory_reach {
        None => {
            let g2 = random_prolongation_with(spec, horizon, rng.gen(), cells)?;
            Ok(Pair { t, g1, g2: Some(g2), bump: None })
        }
        Some(reach) => {
            let width = reach * rng.gen_range(0.1..=1.0);
            let raw = random_bump(&mut rng, -width, 0.0, spec.base.dim(), 64)?;
            let norm = raw.sup_norm_exact();
            let scale = if norm > 0.0 { spec.radius * rng.gen_range(0.01..=1.0) / norm } else { 0.0 };
            let bump = raw.combine(scale, &raw, 0.0)?;
            Ok(Pair { t, g1, g2: None, bump: Some(bump) })
        }
    }
}

fn window_bounds(mode: &LipschitzMode, interval: PastInterval, elapsed: f64) -> Vec<(f64, f64)> {
    let LipschitzMode::AlmostLocal { bound, schedule } = mode else {
        return Vec::new();
    };
    match interval {
        PastInterval::Compact(r) => vec![(r, *bound)],
        PastInterval::Point => Vec::new(),
        PastInterval::WholePast => {
            let k_max = (elapsed + 1.0).ceil().max(1.0) as usize;
            (1..=k_max)
                .map(|k| {
                    let m = schedule
                        .as_ref()
                        .and_then(|s| s.get(k - 1).or(s.last()).copied())
                        .unwrap_or(bound * k as f64);
                    (k as f64, m)
                })
                .collect()
        }
    }
}

/// `‖F(t, φ1) - F(t, φ2)‖∞ / ‖φ1 - φ2‖`, or `None` when the pair is
/// filtered out.
fn pair_ratio(
    f: &HistoryFunctional,
    t: f64,
    a: &dyn History,
    b: &dyn History,
    reach: f64,
    grid: &ProbeGrid,
) -> Option<(f64, f64)> {
    let den = grid.sup_norm_diff(a, b, reach).ok()?;
    if den <= DENOMINATOR_FLOOR {
        return None;
    }
    let fa = f.eval(t, a).ok()?;
    let fb = f.eval(t, b).ok()?;
    let num = fa.iter().zip(&fb).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    Some((num, den))
}

/// Sampled Lipschitz constant of `F` near `(σ, ψ)` in the requested mode.
///
/// The result is the maximum ratio over the drawn pairs and is therefore a
/// lower bound on the true local constant.
pub fn estimate_lipschitz(
    f: &HistoryFunctional,
    sigma: f64,
    psi: &dyn History,
    req: &EstimateRequest,
) -> Result<LipschitzEstimate, FunctionalError> {
    let interval = psi.interval();
    let slope = match req.mode {
        LipschitzMode::AboutC1Prolongations => f.eval(sigma, psi)?,
        _ => vec![0.0; psi.dim()],
    };
    let order = match req.mode {
        LipschitzMode::AboutC1Prolongations => Order::C1,
        _ => Order::C0,
    };
    let memory = match req.mode {
        LipschitzMode::AboutMemories { reach } => Some(interval.clip_reach(reach)),
        _ => None,
    };
    let spec = RectangleSpec { base_time: sigma, base: psi, horizon: req.horizon, radius: req.radius, order, slope: Some(&slope) };

    let results = req.exec.map(req.samples, |k| -> Option<PairRecord> {
        let pair = draw_pair(&spec, memory, sub_seed(req.seed, k as u64)).ok()?;
        let elapsed = pair.t - sigma;
        let reach = scan_reach(interval, elapsed);
        let p1 = Prolongation::new(psi, &pair.g1);
        let phi1 = p1.view(pair.t);
        let (num, den) = match (&pair.g2, &pair.bump) {
            (Some(g2), _) => {
                let p2 = Prolongation::new(psi, g2);
                let phi2 = p2.view(pair.t);
                let windows = window_bounds(&req.mode, interval, elapsed);
                for (w, m) in windows {
                    let ok = |h: &HistoryView<'_>| req.grid.lip_const(h, w).is_ok_and(|l| l <= m);
                    if !ok(&phi1) || !ok(&phi2) {
                        return None;
                    }
                }
                pair_ratio(f, pair.t, &phi1, &phi2, reach, &req.grid)?
            }
            (None, Some(bump)) => {
                let phi2 = Bumped::new(&phi1, bump, 1.0);
                pair_ratio(f, pair.t, &phi1, &phi2, reach, &req.grid)?
            }
            (None, None) => return None,
        };
        Some(PairRecord { sample: k, t: pair.t, numerator: num, denominator: den })
    });

    let mut valid = 0;
    let mut best: Option<PairRecord> = None;
    for rec in results.into_iter().flatten() {
        valid += 1;
        let ratio = rec.numerator / rec.denominator;
        if best.as_ref().is_none_or(|b| ratio > b.numerator / b.denominator) {
            best = Some(rec);
        }
    }
    let Some(best) = best else {
        return Err(FunctionalError::NoValidPairs { drawn: req.samples });
    };
    Ok(LipschitzEstimate {
        mode: req.mode.clone(),
        value: best.numerator / best.denominator,
        samples: valid,
        drawn: req.samples,
        max_pair: Some(best),
    })
}

/// Largest `|τ(t, φ1) - τ(t, φ2)|` over sampled pairs whose difference is
/// supported in `[-reach, 0]`; zero certifies (sampled) constancy about
/// memories.
pub fn check_constancy_about_memories(
    tau: &DelayFunctional,
    sigma: f64,
    psi: &dyn History,
    reach: f64,
    req: &EstimateRequest,
) -> Result<f64, FunctionalError> {
    let interval = psi.interval();
    if !(reach > 0.0) || !interval.contains(-reach) {
        return Err(FunctionalError::IntervalMismatch(format!("memory window [-{reach}, 0] is not inside {interval}")));
    }
    let zero = vec![0.0; psi.dim()];
    let spec = RectangleSpec {
        base_time: sigma,
        base: psi,
        horizon: req.horizon,
        radius: req.radius,
        order: Order::C0,
        slope: Some(&zero),
    };
    let devs = req.exec.map(req.samples, |k| -> Option<f64> {
        let pair = draw_pair(&spec, Some(reach), sub_seed(req.seed, k as u64)).ok()?;
        let p1 = Prolongation::new(psi, &pair.g1);
        let phi1 = p1.view(pair.t);
        let phi2 = Bumped::new(&phi1, pair.bump.as_ref()?, 1.0);
        let a = tau.eval(pair.t, &phi1).ok()?;
        let b = tau.eval(pair.t, &phi2).ok()?;
        Some((a - b).abs())
    });
    let mut valid = 0;
    let mut worst = 0.0f64;
    for d in devs.into_iter().flatten() {
        valid += 1;
        worst = worst.max(d);
    }
    if valid == 0 {
        return Err(FunctionalError::NoValidPairs { drawn: req.samples });
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::functional::{build_constant_lag, build_ode, build_trivial, OdeField, VectorField};
    use crate::history::InitialHistory;

    fn req(mode: LipschitzMode, samples: usize) -> EstimateRequest {
        EstimateRequest::new(mode, 0.25, 0.5, samples, 11)
    }

    #[test]
    fn trivial_functional_has_zero_constant() {
        let i = PastInterval::Compact(1.0);
        let f = build_trivial(vec![1.0], i);
        let psi = InitialHistory::from_fn(i, 1, |t, o| o[0] = t.sin()).unwrap();
        for mode in [
            LipschitzMode::AboutProlongations,
            LipschitzMode::AboutC1Prolongations,
            LipschitzMode::AboutMemories { reach: 0.5 },
            LipschitzMode::AlmostLocal { bound: 100.0, schedule: None },
        ] {
            let est = estimate_lipschitz(&f, 0.0, &psi, &req(mode.clone(), 40)).unwrap();
            assert_eq!(est.value, 0.0, "{mode:?}");
            assert!(est.samples >= 1);
        }
    }

    #[test]
    fn constant_lag_is_constant_about_short_memories() {
        let i = PastInterval::Compact(1.0);
        let f: VectorField = Arc::new(|_, _, y, out| {
            out[0] = y[0].sin() * 3.0;
            Ok(())
        });
        let single = crate::functional::HistoryFunctional::new(
            i,
            Arc::new(move |t, phi, out| {
                let y = phi.eval(-1.0)?;
                f(t, &[0.0], &y, out)
            }),
        );
        let psi = InitialHistory::from_fn(i, 1, |t, o| o[0] = t.cos()).unwrap();
        let est = estimate_lipschitz(&single, 0.0, &psi, &req(LipschitzMode::AboutMemories { reach: 0.5 }, 100)).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.samples, 100);
    }

    #[test]
    fn ode_linear_field_estimate() {
        let f: OdeField = Arc::new(|_, x, out| {
            out[0] = 2.0 * x[0];
            Ok(())
        });
        let func = build_ode(f, PastInterval::Point).unwrap();
        let psi = InitialHistory::point(vec![1.0]);
        let est = estimate_lipschitz(&func, 0.0, &psi, &req(LipschitzMode::AboutProlongations, 200)).unwrap();
        assert!(est.value >= 1.9 && est.value <= 2.0, "{}", est.value);
    }

    #[test]
    fn lag_estimate_is_bounded_by_the_field_constant() {
        let i = PastInterval::Compact(1.0);
        let f: VectorField = Arc::new(|_, x, y, out| {
            out[0] = -0.5 * x[0] + y[0].sin();
            Ok(())
        });
        let func = build_constant_lag(f, 1.0, i).unwrap();
        let psi = InitialHistory::from_fn(i, 1, |t, o| o[0] = (2.0 * t).sin()).unwrap();
        for mode in [LipschitzMode::AboutProlongations, LipschitzMode::AboutC1Prolongations] {
            let est = estimate_lipschitz(&func, 0.0, &psi, &req(mode, 200)).unwrap();
            assert!(est.value > 0.0 && est.value <= 1.5 + 1e-9, "{}", est.value);
        }
    }

    #[test]
    fn deterministic_and_mode_independent_of_exec() {
        let i = PastInterval::WholePast;
        let f: VectorField = Arc::new(|_, x, y, out| {
            out[0] = x[0] * y[0];
            Ok(())
        });
        let func = build_constant_lag(f, 1.0, i).unwrap();
        let psi = InitialHistory::from_fn(i, 1, |t, o| o[0] = 1.0 / (1.0 + t * t)).unwrap();
        let r = req(LipschitzMode::AlmostLocal { bound: 50.0, schedule: None }, 64);
        let a = estimate_lipschitz(&func, 0.0, &psi, &r.clone().with_exec(Exec::Sequential)).unwrap();
        let b = estimate_lipschitz(&func, 0.0, &psi, &r.with_exec(Exec::Parallel)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn almost_local_filters_steep_pairs() {
        let i = PastInterval::Compact(1.0);
        let f = build_trivial(vec![0.0], i);
        let psi = InitialHistory::from_fn(i, 1, |t, o| o[0] = 10.0 * t).unwrap();
        let r = req(LipschitzMode::AlmostLocal { bound: 1.0, schedule: None }, 20);
        assert!(matches!(estimate_lipschitz(&f, 0.0, &psi, &r), Err(FunctionalError::NoValidPairs { drawn: 20 })));
    }

    #[test]
    fn memory_constancy_examples() {
        let i = PastInterval::Compact(2.0);
        let psi = InitialHistory::from_fn(i, 1, |t, o| o[0] = 0.5 + 0.25 * t.sin()).unwrap();
        let r = req(LipschitzMode::AboutProlongations, 100);
        let fixed = DelayFunctional::time_varying(Arc::new(|t| Ok(1.0 + 0.1 * t)));
        assert_eq!(check_constancy_about_memories(&fixed, 0.0, &psi, 0.5, &r).unwrap(), 0.0);
        let rez = DelayFunctional::at_offset(Arc::new(|_, y| Ok(y[0].abs().min(2.0))), Arc::new(|t| 0.75 + 0.1 * t.sin()));
        assert_eq!(check_constancy_about_memories(&rez, 0.0, &psi, 0.5, &r).unwrap(), 0.0);
        let reads_head = DelayFunctional::of_state(Arc::new(|_, x| Ok(x[0].abs().clamp(0.0, 2.0))));
        assert!(check_constancy_about_memories(&reads_head, 0.0, &psi, 0.5, &r).unwrap() > 0.0);
    }

    #[test]
    fn superset_maximum_dominates() {
        // the C1 sample set is reused inside a wider C0 set
        let i = PastInterval::Compact(1.0);
        let f: VectorField = Arc::new(|_, x, y, out| {
            out[0] = (x[0] * y[0]).tanh();
            Ok(())
        });
        let func = build_constant_lag(f, 0.5, i).unwrap();
        let psi = InitialHistory::from_fn(i, 1, |t, o| o[0] = 1.0 + t).unwrap();
        let c1 = estimate_lipschitz(&func, 0.0, &psi, &req(LipschitzMode::AboutC1Prolongations, 50)).unwrap();
        let grid = ProbeGrid::default();
        let v = func.eval(0.0, &psi).unwrap();
        let spec = RectangleSpec::c1(0.0, &psi, 0.25, 0.5, &v);
        let mut widest = 0.0f64;
        for k in 0..50 {
            let pair = draw_pair(&spec, None, sub_seed(11, k)).unwrap();
            let (p1, p2) = (Prolongation::new(&psi, &pair.g1), Prolongation::new(&psi, pair.g2.as_ref().unwrap()));
            if let Some((n, d)) = pair_ratio(&func, pair.t, &p1.view(pair.t), &p2.view(pair.t), 1.0, &grid) {
                widest = widest.max(n / d);
            }
        }
        assert_eq!(c1.value, widest);
    }
}

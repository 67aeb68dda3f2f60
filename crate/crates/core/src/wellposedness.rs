//! Numerical probes of uniqueness, continuous dependence, the trivial
//! semiflow bound, the cocycle property and lower semi-continuity of escape
//! times. Each probe returns a serializable report with every threshold it
//! used.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::functional::HistoryFunctional;
use crate::history::{inf_norm, rho1, History, HistoryFn, InitialHistory, PastInterval, ProbeGrid, Segment};
use crate::par::{sub_seed, Exec};
use crate::solver::{continue_maximal, fixed_point_from, solution_process, solve_local, SolveError, SolveOptions};
use crate::transforms::{random_prolongation_with, trivial_flow, RectangleSpec, Wedge};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub probe: String,
    pub passed: bool,
    pub measured: BTreeMap<String, f64>,
    pub samples: usize,
    pub seed: u64,
    pub notes: Vec<String>,
}

impl ProbeReport {
    fn new(probe: &str, samples: usize, seed: u64) -> Self {
        ProbeReport { probe: probe.into(), passed: false, measured: BTreeMap::new(), samples, seed, notes: Vec::new() }
    }

    fn set(&mut self, key: &str, value: f64) {
        self.measured.insert(key.into(), value);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.measured.get(key).copied()
    }

    fn failed(mut self, note: String) -> Self {
        self.passed = false;
        self.notes.push(note);
        self
    }
}

/// Solves the first local step from several Picard starts on one grid:
/// the `∧v` ray, the constant ray and random members of `Γ¹`.
pub fn probe_uniqueness(
    f: &HistoryFunctional,
    t0: f64,
    initial: &InitialHistory,
    opts: &SolveOptions,
    n_starts: usize,
    seed: u64,
) -> ProbeReport {
    let mut report = ProbeReport::new("uniqueness", n_starts, seed);
    let (reference, _) = match solve_local(f, t0, initial, opts) {
        Ok(r) => r,
        Err(e) => return report.failed(format!("reference solve failed: {e}")),
    };
    let v = match f.eval(t0, initial) {
        Ok(v) => v,
        Err(e) => return report.failed(format!("base point outside the domain: {e}")),
    };
    let span = reference.span();
    let cells = reference.cells();
    let zero = vec![0.0; v.len()];
    let spec = RectangleSpec::c1(t0, initial, span, opts.radius, &v);
    let starts = opts.exec.map(n_starts, |k| {
        let start = match k {
            0 => Wedge::new(initial, t0, &v)?.segment(span, cells)?,
            1 => Wedge::new(initial, t0, &zero)?.segment(span, cells)?,
            _ => random_prolongation_with(&spec, span, sub_seed(seed, k as u64), cells)?,
        };
        fixed_point_from(f, initial, start, opts)
    });
    let mut fixed = Vec::with_capacity(n_starts);
    for (k, s) in starts.into_iter().enumerate() {
        match s {
            Ok((seg, iters)) => {
                report.set(&format!("iterations_{k}"), iters as f64);
                fixed.push(seg);
            }
            Err(e) => return report.failed(format!("start {k} failed: {e}")),
        }
    }
    let worst = rho1_pairs(&fixed);
    let scale = reference.max_node_norm() + reference.max_node_slope();
    let threshold = 10.0 * opts.fixed_point_tol * scale.max(1.0);
    report.set("max_pairwise_rho1", worst);
    report.set("threshold", threshold);
    report.set("span", span);
    report.passed = worst <= threshold;
    report
}

fn rho1_pairs(segs: &[Segment]) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in segs.iter().enumerate() {
        for b in &segs[i + 1..] {
            worst = worst.max(rho1(a, b).unwrap_or(f64::INFINITY));
        }
    }
    worst
}

/// A seeded perturbation direction `u / (1 + (θ/w)²)` with `‖u‖∞ = 1`, so the
/// profile has sup-norm exactly 1.
pub fn perturbation(dim: usize, seed: u64) -> HistoryFn {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lead = rng.gen_range(0..dim.max(1));
    let u: Vec<f64> = (0..dim)
        .map(|i| if i == lead { if rng.gen_bool(0.5) { 1.0 } else { -1.0 } } else { rng.gen_range(-1.0..=1.0) })
        .collect();
    let w = rng.gen_range(1.0..=2.0);
    Arc::new(move |theta, out| {
        let p = 1.0 / (1.0 + (theta / w).powi(2));
        for (o, u) in out.iter_mut().zip(&u) {
            *o = u * p;
        }
        Ok(())
    })
}

fn memory_window(interval: PastInterval) -> f64 {
    interval.clip_reach(1.0)
}

/// Deviation of the solution process under `ε·η` perturbations of the
/// initial history along a decreasing schedule.
pub fn probe_dependence(
    f: &HistoryFunctional,
    t0: f64,
    initial: &InitialHistory,
    window: f64,
    schedule: &[f64],
    seed: u64,
    opts: &SolveOptions,
) -> ProbeReport {
    let mut report = ProbeReport::new("dependence", schedule.len(), seed);
    let t_end = t0 + window;
    let base = match continue_maximal(f, initial.clone(), t0, t_end, opts) {
        Ok(s) if s.reached_horizon() => s,
        Ok(s) => return report.failed(format!("base escaped: {:?}", s.escape)),
        Err(e) => return report.failed(format!("base solve failed: {e}")),
    };
    let eta = perturbation(History::dim(initial), seed);
    let reach = memory_window(History::interval(initial));
    let grid = ProbeGrid::default();
    let deltas = opts.exec.map(schedule.len(), |k| -> Result<f64, String> {
        let eps = schedule[k];
        if eps == 0.0 {
            return Ok(0.0);
        }
        let pert = initial.perturbed(eta.clone(), eps).map_err(|e| e.to_string())?;
        let sol = continue_maximal(f, pert, t0, t_end, opts).map_err(|e| e.to_string())?;
        if !sol.reached_horizon() {
            return Err(format!("perturbed solve at ε = {eps} escaped: {:?}", sol.escape));
        }
        grid.sup_path_diff(&base.trajectory, &sol.trajectory, t0 - reach, t_end).map_err(|e| e.to_string())
    });
    let mut values = Vec::with_capacity(schedule.len());
    for (k, d) in deltas.into_iter().enumerate() {
        match d {
            Ok(d) => {
                report.set(&format!("delta_{k}"), d);
                report.set(&format!("eps_{k}"), schedule[k]);
                values.push(d);
            }
            Err(e) => return report.failed(e),
        }
    }
    let mut passed = true;
    let mut max_ratio = 0.0f64;
    let mut prev_ratio: Option<f64> = None;
    for k in 0..values.len() {
        if k > 0 && !(values[k] < values[k - 1] || values[k] == 0.0) {
            passed = false;
            report.notes.push(format!("Δ does not decrease at step {k}"));
        }
        if schedule[k] > 0.0 {
            let ratio = values[k] / schedule[k];
            report.set(&format!("ratio_{k}"), ratio);
            max_ratio = max_ratio.max(ratio);
            if let Some(p) = prev_ratio {
                let q = ratio / p;
                if !(0.5..=2.0).contains(&q) {
                    passed = false;
                    report.notes.push(format!("ratio changes by {q} at step {k}"));
                }
            }
            prev_ratio = Some(ratio);
        }
    }
    report.set("max_ratio", max_ratio);
    report.set("ratio_factor_threshold", 2.0);
    report.set("window", window);
    report.passed = passed;
    report
}

/// Random trigonometric history: constant plus three seeded modes.
fn random_history(interval: PastInterval, dim: usize, rng: &mut impl Rng) -> InitialHistory {
    let modes: Vec<[f64; 4]> = (0..3 * dim)
        .map(|_| [rng.gen_range(-1.0..=1.0), rng.gen_range(0.5..=6.0), rng.gen_range(0.0..2.0 * PI), 0.0])
        .collect();
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..=2.0)).collect();
    InitialHistory::from_fn(interval, dim, move |theta, out| {
        for (i, o) in out.iter_mut().enumerate() {
            *o = shift[i] + modes[3 * i..3 * i + 3].iter().map(|m| m[0] * (m[1] * theta + m[2]).sin()).sum::<f64>();
        }
    })
    .expect("total closed form")
}

/// Checks `‖S(t)(v, φ)‖_{[-k,0]} ≤ ‖φ‖_{[-k,0]} + T‖v‖∞` on random samples.
pub fn probe_semiflow(
    interval: PastInterval,
    dim: usize,
    k: f64,
    horizon: f64,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> ProbeReport {
    let mut report = ProbeReport::new("semiflow", samples, seed);
    let reach = interval.clip_reach(k);
    let grid = ProbeGrid::default();
    let slack = 1e-9;
    let gaps = exec.map(samples, |s| -> Result<f64, String> {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, s as u64));
        let phi = random_history(interval, dim, &mut rng);
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..=3.0)).collect();
        let t = horizon * rng.gen_range(0.0..=1.0);
        let flow = trivial_flow(t, &v, &phi).map_err(|e| e.to_string())?;
        let mut knots = Vec::new();
        flow.knots(-reach, 0.0, &mut knots);
        let pts = grid.points(-reach, 0.0, knots);
        let mut lhs = 0.0f64;
        let mut phi_sup = 0.0f64;
        for &th in &pts {
            lhs = lhs.max(inf_norm(&flow.eval(th).map_err(|e| e.to_string())?));
            phi_sup = phi_sup.max(inf_norm(&phi.eval(th).map_err(|e| e.to_string())?));
            // the flow reads φ at θ + t
            if th + t <= 0.0 {
                phi_sup = phi_sup.max(inf_norm(&phi.eval(th + t).map_err(|e| e.to_string())?));
            }
        }
        let rhs = phi_sup + horizon * inf_norm(&v);
        Ok(lhs - rhs)
    });
    let mut worst = f64::NEG_INFINITY;
    for g in gaps {
        match g {
            Ok(g) => worst = worst.max(g),
            Err(e) => return report.failed(e),
        }
    }
    report.set("max_excess", worst);
    report.set("slack", slack);
    report.passed = worst <= slack;
    report
}

/// Compares `𝒫(τ1 + τ2, t0, φ0)` with `𝒫(τ2, t0 + τ1, 𝒫(τ1, t0, φ0))`.
pub fn probe_cocycle(
    f: &HistoryFunctional,
    t0: f64,
    initial: &InitialHistory,
    tau1: f64,
    tau2: f64,
    opts: &SolveOptions,
) -> ProbeReport {
    let mut report = ProbeReport::new("cocycle", 1, 0);
    let threshold = 1e-7;
    let run = || -> Result<f64, SolveError> {
        let one = solution_process(f, tau1 + tau2, t0, initial.clone(), opts)?;
        let mid = solution_process(f, tau1, t0, initial.clone(), opts)?;
        let two = solution_process(f, tau2, t0 + tau1, mid.to_initial()?, opts)?;
        let reach = History::interval(initial).clip_reach(tau1 + tau2);
        Ok(ProbeGrid::default().sup_norm_diff(&one.view(), &two.view(), reach)?)
    };
    match run() {
        Ok(err) => {
            report.set("max_difference", err);
            report.set("threshold", threshold);
            report.set("tau1", tau1);
            report.set("tau2", tau2);
            report.passed = err <= threshold;
            report
        }
        Err(e) => report.failed(format!("solve failed: {e}")),
    }
}

/// Escape times of `ε`-perturbed problems must not drop below `t* - 10εt*`.
#[allow(clippy::too_many_arguments)]
pub fn probe_escape_lsc(
    f: &HistoryFunctional,
    t0: f64,
    initial: &InitialHistory,
    horizon: f64,
    eps: f64,
    samples: usize,
    seed: u64,
    opts: &SolveOptions,
) -> ProbeReport {
    let mut report = ProbeReport::new("escape_lsc", samples, seed);
    let escape_time = |init: InitialHistory| -> Result<f64, SolveError> {
        let sol = continue_maximal(f, init, t0, horizon, opts)?;
        Ok(sol.escape.t_escape.unwrap_or(horizon))
    };
    let t_star = match escape_time(initial.clone()) {
        Ok(t) => t,
        Err(e) => return report.failed(format!("base solve failed: {e}")),
    };
    let margin = 10.0 * eps * t_star.abs();
    let dim = History::dim(initial);
    let times = opts.exec.map(samples, |s| -> Result<f64, String> {
        let eta = perturbation(dim, sub_seed(seed, s as u64));
        let pert = initial.perturbed(eta, eps).map_err(|e| e.to_string())?;
        escape_time(pert).map_err(|e| e.to_string())
    });
    let mut min_t = f64::INFINITY;
    for t in times {
        match t {
            Ok(t) => min_t = min_t.min(t),
            Err(e) => return report.failed(e),
        }
    }
    report.set("t_star", t_star);
    report.set("min_perturbed", min_t);
    report.set("margin", margin);
    report.set("eps", eps);
    report.passed = samples == 0 || min_t >= t_star - margin;
    report
}

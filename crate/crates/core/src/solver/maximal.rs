use std::sync::Arc;

use super::{solve_local_until, EscapeCause, EscapeReport, SolveDiagnostics, SolveError, SolveOptions};
use crate::functional::HistoryFunctional;
use crate::history::{InitialHistory, ProcessState, Trajectory};

#[derive(Debug, Clone)]
pub struct MaximalSolution {
    pub trajectory: Trajectory,
    pub escape: EscapeReport,
    pub diagnostics: Vec<SolveDiagnostics>,
}

impl MaximalSolution {
    pub fn reached_horizon(&self) -> bool {
        self.escape.cause == EscapeCause::HorizonReached
    }
}

/// Chains local solutions from `t0` until `t_final` or an escape.
///
/// A partial trajectory is always returned; errors are reserved for invalid
/// options and malformed input.
pub fn continue_maximal(
    f: &HistoryFunctional,
    initial: InitialHistory,
    t0: f64,
    t_final: f64,
    opts: &SolveOptions,
) -> Result<MaximalSolution, SolveError> {
    opts.validate()?;
    let mut traj = Trajectory::new(initial, t0);
    propagate_breakpoints(&mut traj, f.lags(), t_final);
    let mut diagnostics = Vec::new();
    let escape = loop {
        let sigma = traj.t_end();
        if sigma >= t_final {
            break EscapeReport { t_escape: None, cause: EscapeCause::HorizonReached, detail: String::new() };
        }
        // segments end on known derivative jumps so none falls inside a cell
        let slack = 1e-12 * sigma.abs().max(1.0);
        let limit = traj.breakpoints().iter().copied().find(|b| *b > sigma + slack).map_or(t_final, |b| b.min(t_final));
        let step = {
            let psi = traj.history_at(sigma)?;
            solve_local_until(f, sigma, &psi, opts, limit)
        };
        match step {
            Ok((seg, diag)) => {
                let norm = seg.max_node_norm();
                let end = seg.t_end();
                traj.push(seg)?;
                diagnostics.push(diag);
                if norm > opts.blow_threshold || !norm.is_finite() {
                    break EscapeReport {
                        t_escape: Some(end),
                        cause: EscapeCause::BlowUp,
                        detail: format!("node norm {norm:e} exceeds {:e}", opts.blow_threshold),
                    };
                }
            }
            Err(err) => {
                let last_norm = traj.segments().last().map_or(0.0, |s| s.max_node_norm());
                let cause = match err {
                    SolveError::DomainExit { .. } => EscapeCause::DomainExit,
                    SolveError::PicardDiverged { .. } => EscapeCause::PicardDiverged,
                    SolveError::StepCollapse { .. } if last_norm > 0.1 * opts.blow_threshold => EscapeCause::BlowUp,
                    SolveError::StepCollapse { .. } => EscapeCause::StepCollapse,
                    other => return Err(other),
                };
                break EscapeReport { t_escape: Some(sigma), cause, detail: err.to_string() };
            }
        }
    };
    Ok(MaximalSolution { trajectory: traj, escape, diagnostics })
}

/// Carries the derivative jumps of the data forward along fixed lags. Each
/// pass smooths the jump by one order, so two passes cover the ones that
/// disturb a fourth-order quadrature.
fn propagate_breakpoints(traj: &mut Trajectory, lags: &[f64], t_final: f64) {
    let t0 = traj.t0();
    let mut front: Vec<f64> = traj.breakpoints().to_vec();
    for _ in 0..2 {
        front = front.iter().flat_map(|b| lags.iter().map(move |r| b + r)).filter(|t| *t > t0 && *t < t_final).collect();
        traj.add_breakpoints(front.iter().copied());
    }
}

/// `𝒫_F(τ, t0, φ0) = I_{t0+τ} x`, returned as a state holding the solved
/// trajectory.
pub fn solution_process(
    f: &HistoryFunctional,
    tau: f64,
    t0: f64,
    initial: InitialHistory,
    opts: &SolveOptions,
) -> Result<ProcessState, SolveError> {
    let target = t0 + tau.max(0.0);
    let sol = continue_maximal(f, initial, t0, target, opts)?;
    if !sol.reached_horizon() {
        return Err(SolveError::EscapeBeforeTau(sol.escape));
    }
    Ok(ProcessState::new(Arc::new(sol.trajectory), target))
}

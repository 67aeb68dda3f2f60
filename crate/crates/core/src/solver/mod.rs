//! Local solutions as Picard fixed points, maximal continuation and the
//! independent oracles used to check them.

mod local;
mod maximal;
mod oracles;
mod picard;

use serde::Serialize;
use thiserror::Error;

use crate::functional::FunctionalError;
use crate::history::HistoryError;
use crate::par::Exec;

pub(crate) use local::fixed_point_from;
pub use local::{choose_horizon, solve_local, solve_local_until, SolveDiagnostics};
pub use maximal::{continue_maximal, solution_process, MaximalSolution};
pub use oracles::{pantograph_series, pantograph_series_deriv, step_method_solve};
pub use picard::picard_apply;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum LipschitzSource {
    UserProvided(f64),
    /// C¹-prolongation estimate at each base point.
    Estimated { samples: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveOptions {
    pub grid_nodes_per_unit: usize,
    /// Relative tolerance on `ρ¹` between successive iterates.
    pub fixed_point_tol: f64,
    pub max_picard_iters: usize,
    pub radius: f64,
    pub t_cap: f64,
    pub t_min: f64,
    pub blow_threshold: f64,
    pub lipschitz_source: LipschitzSource,
    /// Random C¹-prolongations used for the bound `M`.
    pub bound_samples: usize,
    /// Grid doublings allowed when the midpoint defect stays above `refine_tol`.
    pub max_refinements: usize,
    pub refine_tol: f64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            grid_nodes_per_unit: 64,
            fixed_point_tol: 1e-10,
            max_picard_iters: 60,
            radius: 1.0,
            t_cap: 0.25,
            t_min: 1e-6,
            blow_threshold: 1e8,
            lipschitz_source: LipschitzSource::Estimated { samples: 32, seed: 0x5eed },
            bound_samples: 16,
            max_refinements: 4,
            refine_tol: 1e-8,
            exec: Exec::default(),
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), SolveError> {
        let positive = [
            ("fixed_point_tol", self.fixed_point_tol),
            ("radius", self.radius),
            ("t_cap", self.t_cap),
            ("t_min", self.t_min),
            ("blow_threshold", self.blow_threshold),
            ("refine_tol", self.refine_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SolveError::InvalidOptions(format!("{name} must be positive, got {v}")));
            }
        }
        if self.grid_nodes_per_unit == 0 || self.max_picard_iters == 0 {
            return Err(SolveError::InvalidOptions("grid density and iteration cap must be positive".into()));
        }
        if self.t_min >= self.t_cap {
            return Err(SolveError::InvalidOptions(format!("t_min {} must be below t_cap {}", self.t_min, self.t_cap)));
        }
        if let LipschitzSource::UserProvided(l) = self.lipschitz_source {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(SolveError::InvalidOptions(format!("Lipschitz constant {l} must be nonnegative")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EscapeCause {
    HorizonReached,
    BlowUp,
    DomainExit,
    StepCollapse,
    PicardDiverged,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EscapeReport {
    pub t_escape: Option<f64>,
    pub cause: EscapeCause,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SolveError {
    #[error("left the domain of F at t = {t}")]
    DomainExit { t: f64 },
    #[error("step collapsed below the minimum at t = {t} (last span {span:e})")]
    StepCollapse { t: f64, span: f64 },
    #[error("Picard iteration diverged at t = {t}")]
    PicardDiverged { t: f64 },
    #[error("solution escaped before the requested time: {0:?}")]
    EscapeBeforeTau(EscapeReport),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    History(#[from] HistoryError),
}

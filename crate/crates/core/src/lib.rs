//! # rfde
//!
//! Retarded functional differential equations `x'(t) = F(t, I_t x)` with
//! constant, time-dependent, state-dependent and unbounded delays.
//!
//! Local solutions are computed as fixed points of the integral operator
//! `γ ↦ ψ(0) + ∫ F(u, I_u γ) du` on C¹-prolongations of the initial
//! condition, with a step size chosen from local bounds `M` and Lipschitz
//! constants `L` so that the operator contracts. Local solutions are chained
//! into maximal solutions; the [`wellposedness`] module probes uniqueness,
//! continuous dependence and the solution-process axioms numerically.
//!
//! ```
//! use rfde::prelude::*;
//! use std::sync::Arc;
//!
//! // x'(t) = -x(t - 1), x ≡ 1 on [-1, 0]
//! let interval = PastInterval::compact(1.0).unwrap();
//! let f: VectorField = Arc::new(|_t, _x, y, out| {
//!     out[0] = -y[0];
//!     Ok(())
//! });
//! let rhs = build_constant_lag(f, 1.0, interval).unwrap();
//! let phi = InitialHistory::constant(interval, vec![1.0]);
//! let sol = continue_maximal(&rhs, phi, 0.0, 2.0, &SolveOptions::default()).unwrap();
//! let x2 = Path::eval(&sol.trajectory, 2.0).unwrap()[0];
//! assert!((x2 + 0.5).abs() < 1e-7);
//! ```

pub mod config;
pub mod dsl;
pub mod export;
pub mod functional;
pub mod history;
pub mod par;
pub mod solver;
pub mod transforms;
pub mod wellposedness;

pub mod prelude {
    pub use crate::functional::{
        build_constant_lag, build_ode, build_state_dependent, build_trivial, estimate_lipschitz,
        DelayFunctional, EstimateRequest, HistoryFunctional, LipschitzMode, OdeField, VectorField,
    };
    pub use crate::history::{
        History, HistoryView, InitialHistory, PastInterval, Path, ProbeGrid, Segment, Trajectory,
    };
    pub use crate::par::Exec;
    pub use crate::solver::{
        continue_maximal, solution_process, solve_local, EscapeCause, EscapeReport, LipschitzSource,
        SolveOptions,
    };
}

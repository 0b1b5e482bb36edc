//! SGD-θ and its baselines.
//!
//! Given equations `F_i(x) = y_i^δ` (`i = 0, …, N−1`) and a convex penalty
//! `θ`, each iteration draws a batch `I_n`, forms the stacked residual
//! `res = (F_i(x_n) − y_i^δ)_{i∈I_n}` and gradient
//! `g = Σ_{i∈I_n} F_i'(x_n)* J_r(F_i(x_n) − y_i^δ)`, and updates
//!
//! ```text
//! ξ_{n+1} = ξ_n − t_n g
//! x_{n+1} = argmin_z θ(z) − ⟨ξ_{n+1}, z⟩
//! ```
//!
//! The step `t_n` follows a [`StepRule`]; the adaptive rule switches itself
//! off once `‖res‖_r ≤ τ δ_batch`, which is what keeps the iteration from
//! fitting noise.

pub mod config;
pub mod run;
pub mod step;
pub mod system;

pub use config::{check_admissibility, AdmissibilityReport, SolverConfig, StepRule, StopRule};
pub use run::{run, HistoryRecord, Method, RunFailure, RunHistory, RunOutcome, StopReason, CSV_HEADER};
pub use step::{
    adaptive_step, batch_gradient, kaczmarz_step, landweber_step, resolve_step_rule, sgd_theta_step, step_size,
    BatchGradient, IterationState, StepReport,
};
pub use system::EquationSystem;

//! Load continuation along a uniform tension path: growth and contraction
//! profiles, load-step planners and plan execution.

mod plan;
mod profile;
mod run;

use thiserror::Error;

use crate::roots::RootError;
use crate::solver::{FractureSite, SolverError, Violation};

pub use plan::{
    is_admissible, maximize_steps, merge_final_steps, normalize, plan_endpoint, plan_single_step, plan_uniform,
    split_step,
    supersolution, LoadPlan, PlanViolation, UniformPlan,
};
pub use profile::{
    contraction_radius, uniform_response, window_terminus, ChainProfile, ConstantProfile, ContinuationProfile,
    LoadPath, UniformConstants, K2_POINTS, K2_SAFETY, KAPPA_PANELS,
};
pub use run::{path_error, run_plan, staircase, PlanRun, StaircasePoint, StepRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContinuationError {
    #[error("load {load} is at or beyond the load limit {phi_max}")]
    LoadLimit { load: f64, phi_max: f64 },
    #[error("compressive load {0} is outside the tension branch")]
    NegativeLoad(f64),
    #[error("no contraction window with α = {alpha} around spacing {r}")]
    WindowExhausted { r: f64, alpha: f64 },
    #[error("contraction constant {0} is not in (0, 1)")]
    BadAlpha(f64),
    #[error(transparent)]
    Root(#[from] RootError),
    #[error("tolerance {eps:e} is above half the smallest window radius {delta:e}")]
    EpsilonTooLarge { eps: f64, delta: f64 },
    #[error("initial error bound {gamma0:e} does not fit in the first window ({delta:e})")]
    InitialError { gamma0: f64, delta: f64 },
    #[error("planner stalled at step {q}, s = {s}")]
    Stall { q: usize, s: f64 },
    #[error("cannot rewrite step {j}: {reason}")]
    RewriteInapplicable { j: usize, reason: &'static str },
    #[error("plan is not admissible: {0}")]
    Inadmissible(PlanViolation),
    #[error("step {q}: window hypotheses fail: {}", join(violations))]
    Hypotheses { q: usize, violations: Vec<Violation> },
    #[error("step {q}: fracture at element {} (spacing {})", site.element, site.spacing)]
    Fracture { q: usize, site: FractureSite },
    #[error("step {q}: {reason}")]
    InnerFailure { q: usize, reason: String },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

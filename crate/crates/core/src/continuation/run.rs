//! Executing a load plan with the preconditioned iteration.

use serde::{Deserialize, Serialize};

use super::plan::LoadPlan;
use super::profile::{ChainProfile, ContinuationProfile};
use super::ContinuationError;
use crate::mesh::QcMesh;
use crate::qc::uniform_load;
use crate::solver::{
    check_hypotheses, distance, ContractionWindow, FractureSite, IterationTrace, QcSolver, StopRule, TraceStatus,
};

/// One executed load step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub q: usize,
    pub s: f64,
    pub load: f64,
    pub iters: u32,
    /// `r(s_q)`, the exact uniform spacing.
    pub exact: f64,
    /// `‖r_q - r(s_q)‖_∞`.
    pub error: f64,
    pub gamma: f64,
    pub residual: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRun {
    pub records: Vec<StepRecord>,
    /// Computed spacings `r_0..r_Q`.
    pub states: Vec<Vec<f64>>,
    /// Outer iteration trace of each step.
    pub traces: Vec<IterationTrace>,
}

impl PlanRun {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("initial state present")
    }

    pub fn final_record(&self) -> &StepRecord {
        self.records.last().expect("at least one step")
    }

    pub fn work(&self) -> u64 {
        self.records.iter().map(|r| u64::from(r.iters)).sum()
    }

    /// CSV with header `q,s[1],load[force],P[1],error_inf[length],gamma[length],delta[length],residual_inf[force]`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "q",
            "s[1]",
            "load[force]",
            "P[1]",
            "error_inf[length]",
            "gamma[length]",
            "delta[length]",
            "residual_inf[force]",
        ])
        .expect("in-memory write");
        for r in &self.records {
            w.write_record([
                r.q.to_string(),
                format!("{:?}", r.s),
                format!("{:?}", r.load),
                r.iters.to_string(),
                format!("{:e}", r.error),
                format!("{:e}", r.gamma),
                format!("{:e}", r.delta),
                format!("{:e}", r.residual),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

/// Runs `plan` from the reference state. Every step checks the window
/// hypotheses around the exact solution before iterating.
pub fn run_plan(
    solver: &QcSolver<'_>,
    cp: &ChainProfile<'_>,
    plan: &LoadPlan,
) -> Result<PlanRun, ContinuationError> {
    let mesh: &QcMesh = solver.model().mesh();
    let pot = cp.potential();
    let mut states = vec![mesh.uniform_spacings(mesh.a0())];
    let mut records = Vec::with_capacity(plan.steps());
    let mut traces = Vec::with_capacity(plan.steps());
    for q in 1..=plan.steps() {
        let s = plan.s[q];
        let load = cp.path().load(s);
        let loads = uniform_load(mesh, load);
        let exact = cp.r(s)?;
        let delta = cp.radius(s)?;
        let window = ContractionWindow::centred(pot, exact, delta)?;
        check_hypotheses(pot, cp.potential_profile(), &window, &loads)
            .map_err(|violations| ContinuationError::Hypotheses { q, violations })?;
        let iters = plan.iters[q - 1];
        let trace = solver.solve_at_load(&states[q - 1], &loads, StopRule::fixed(iters as usize), Some(&window));
        match &trace.status {
            TraceStatus::Completed | TraceStatus::Converged => {}
            TraceStatus::Fracture { step, element, spacing, .. } => {
                let site = FractureSite { step: *step, element: *element, spacing: *spacing };
                return Err(ContinuationError::Fracture { q, site });
            }
            other => {
                let reason = match other {
                    TraceStatus::InnerFailure { reason, .. } => reason.clone(),
                    s => s.label().to_string(),
                };
                return Err(ContinuationError::InnerFailure { q, reason });
            }
        }
        let r = trace.final_spacings().to_vec();
        let error = r.iter().map(|v| (v - exact).abs()).fold(0.0, f64::max);
        records.push(StepRecord {
            q,
            s,
            load,
            iters,
            exact,
            error,
            gamma: plan.gamma[q],
            residual: trace.final_residual(),
            delta,
        });
        states.push(r);
        traces.push(trace);
    }
    Ok(PlanRun { records, states, traces })
}

/// `max_s ‖R(s) - r(s)‖_∞` over `samples + 1` equispaced points, where `R` is
/// the piecewise-linear interpolant of the computed states.
pub fn path_error(run: &PlanRun, plan: &LoadPlan, cp: &ChainProfile<'_>, samples: usize) -> Result<f64, ContinuationError> {
    let mut worst: f64 = 0.0;
    let mut q = 1;
    for i in 0..=samples {
        let s = i as f64 / samples as f64;
        while q < plan.steps() && s > plan.s[q] {
            q += 1;
        }
        let (s0, s1) = (plan.s[q - 1], plan.s[q]);
        let t = if s1 > s0 { ((s - s0) / (s1 - s0)).clamp(0.0, 1.0) } else { 1.0 };
        let exact = cp.r(s)?;
        let (a, b) = (&run.states[q - 1], &run.states[q]);
        let e = a.iter().zip(b).map(|(x, y)| (x + t * (y - x) - exact).abs()).fold(0.0, f64::max);
        worst = worst.max(e);
    }
    Ok(worst)
}

/// A point of the staircase picture: distance of the previous computed state
/// from the current exact solution, against the window radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaircasePoint {
    pub q: usize,
    pub s: f64,
    pub error: f64,
    pub delta: f64,
}

/// Samples `e(s) = ‖r(s) - r_{q-1}‖_∞` on each step interval `(s_{q-1}, s_q]`.
pub fn staircase(
    run: &PlanRun,
    plan: &LoadPlan,
    cp: &ChainProfile<'_>,
    per_step: usize,
) -> Result<Vec<StaircasePoint>, ContinuationError> {
    let mut out = Vec::new();
    for q in 1..=plan.steps() {
        let (s0, s1) = (plan.s[q - 1], plan.s[q]);
        for i in 1..=per_step.max(1) {
            let s = s0 + (s1 - s0) * i as f64 / per_step.max(1) as f64;
            let exact = cp.r(s)?;
            let prev = &run.states[q - 1];
            let error = distance(prev, &vec![exact; prev.len()]);
            out.push(StaircasePoint { q, s, error, delta: cp.delta(s) });
        }
    }
    Ok(out)
}

//! Load plans: the uniform planner, the greedy endpoint planner, the
//! supersolution recurrence, admissibility and the two path rewrites.

use serde::{Deserialize, Serialize};

use super::profile::{ContinuationProfile, UniformConstants};
use super::ContinuationError;
use crate::roots::bisect_bracket;

/// Bracket width of the implicit step equation.
const STEP_WIDTH: f64 = 1e-14;
/// Steps shorter than this count as a stall.
const MIN_STEP: f64 = 1e-12;
const MAX_STEPS: usize = 100_000;
/// Residual below which a step already counts as maximal.
const TIGHT: f64 = 1e-10;

/// Load steps `0 = s_0 <= ... <= s_Q = 1`, iteration counts `P_1..P_Q` and the
/// supersolution `γ_0..γ_Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadPlan {
    pub s: Vec<f64>,
    pub iters: Vec<u32>,
    pub gamma: Vec<f64>,
}

impl LoadPlan {
    /// Builds a plan and fills in `γ` from `γ_0` by the recurrence.
    pub fn new(s: Vec<f64>, iters: Vec<u32>, gamma0: f64, prof: &dyn ContinuationProfile) -> Self {
        assert_eq!(s.len(), iters.len() + 1, "one iteration count per step");
        let gamma = supersolution(&s, &iters, gamma0, prof);
        Self { s, iters, gamma }
    }

    /// Number of steps `Q`.
    pub fn steps(&self) -> usize {
        self.iters.len()
    }

    /// Total work `Σ P_q`.
    pub fn work(&self) -> u64 {
        self.iters.iter().map(|&p| u64::from(p)).sum()
    }

    pub fn final_gamma(&self) -> f64 {
        *self.gamma.last().expect("γ_0 always present")
    }

    /// `κ(s_q) - κ(s_{q-1}) + γ_{q-1}`, the predicted distance of the start of
    /// step `q` from the solution.
    pub fn start_error(&self, q: usize, prof: &dyn ContinuationProfile) -> f64 {
        prof.kappa(self.s[q]) - prof.kappa(self.s[q - 1]) + self.gamma[q - 1]
    }

    /// CSV with header `q,s_q[1],P_q[1],gamma_q[length]`; row 0 has no count.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["q", "s_q[1]", "P_q[1]", "gamma_q[length]"]).expect("in-memory write");
        for q in 0..self.s.len() {
            let p = if q == 0 { String::new() } else { self.iters[q - 1].to_string() };
            w.write_record([q.to_string(), format!("{:?}", self.s[q]), p, format!("{:e}", self.gamma[q])])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

/// `γ_q = α^{P_q} (κ(s_q) - κ(s_{q-1}) + γ_{q-1})`.
pub fn supersolution(s: &[f64], iters: &[u32], gamma0: f64, prof: &dyn ContinuationProfile) -> Vec<f64> {
    let alpha = prof.alpha();
    let mut gamma = Vec::with_capacity(s.len());
    gamma.push(gamma0);
    for q in 1..s.len() {
        let start = prof.kappa(s[q]) - prof.kappa(s[q - 1]) + gamma[q - 1];
        gamma.push(alpha.powi(iters[q - 1] as i32) * start);
    }
    gamma
}

/// `⌈(ln ε - ln start) / ln α⌉`, at least one.
fn iterations_to_reach(eps: f64, start: f64, alpha: f64) -> u32 {
    let p = ((eps.ln() - start.ln()) / alpha.ln()).ceil();
    if p.is_nan() || p < 1.0 {
        1
    } else {
        p.min(u32::MAX as f64) as u32
    }
}

/// Step size and iteration count of the uniform planner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformPlan {
    pub h_opt: f64,
    /// `true` when the interpolation bound `√(ε/k₂)` set the step.
    pub interpolation_limited: bool,
    /// Iterations per step.
    pub p: u32,
    /// Steps `⌈1/h_opt⌉`; the executed step is `1/Q <= h_opt`.
    pub q: usize,
    pub predicted_work: u64,
}

impl UniformPlan {
    /// The equivalent [`LoadPlan`] with equal steps `1/Q`.
    pub fn to_load_plan(&self, gamma0: f64, prof: &dyn ContinuationProfile) -> LoadPlan {
        let s = (0..=self.q).map(|i| if i == self.q { 1.0 } else { i as f64 / self.q as f64 }).collect();
        LoadPlan::new(s, vec![self.p; self.q], gamma0, prof)
    }
}

/// `h_opt = min((δ - ε)/k, √(ε/k₂))`, `P = ⌈ln(ε/(ε + k h_opt)) / ln α⌉`.
pub fn plan_uniform(eps: f64, c: &UniformConstants) -> Result<UniformPlan, ContinuationError> {
    if !(eps > 0.0) || 2.0 * eps > c.delta {
        return Err(ContinuationError::EpsilonTooLarge { eps, delta: c.delta });
    }
    let contraction = (c.delta - eps) / c.k;
    let interpolation = if c.k2 > 0.0 { (eps / c.k2).sqrt() } else { f64::INFINITY };
    let h_opt = contraction.min(interpolation);
    let p = iterations_to_reach(eps, eps + c.k * h_opt, c.alpha);
    let q = (1.0 / h_opt).ceil().max(1.0) as usize;
    Ok(UniformPlan { h_opt, interpolation_limited: interpolation < contraction, p, q, predicted_work: q as u64 * u64::from(p) })
}

/// Largest `s` in `(from, 1]` with `κ(s) - κ(from) + γ <= δ(s)`, or `1` if
/// the whole remainder fits. `None` if no positive step is possible.
fn greedy_reach(from: f64, gamma: f64, prof: &dyn ContinuationProfile) -> Option<f64> {
    let k0 = prof.kappa(from);
    let h = |s: f64| prof.kappa(s) - k0 + gamma - prof.delta(s);
    if h(1.0) <= 0.0 {
        return Some(1.0);
    }
    if !(h(from) < 0.0) {
        return None;
    }
    let (a, _) = bisect_bracket(h, from, 1.0, STEP_WIDTH).ok()?;
    (a - from > MIN_STEP).then_some(a)
}

/// The greedy plan: every step but the last is as long as the window allows
/// with a single iteration; the last step gets enough iterations to bring
/// the supersolution to `eps`.
pub fn plan_endpoint(eps: f64, gamma0: f64, prof: &dyn ContinuationProfile) -> Result<LoadPlan, ContinuationError> {
    if !(eps > 0.0) {
        return Err(ContinuationError::EpsilonTooLarge { eps, delta: prof.delta(0.0) });
    }
    if !(gamma0 >= 0.0 && gamma0 < prof.delta(0.0)) {
        return Err(ContinuationError::InitialError { gamma0, delta: prof.delta(0.0) });
    }
    let alpha = prof.alpha();
    let mut s = vec![0.0];
    let mut iters = Vec::new();
    let mut gamma = vec![gamma0];
    loop {
        let (from, g) = (*s.last().expect("seeded"), *gamma.last().expect("seeded"));
        let next = greedy_reach(from, g, prof).ok_or(ContinuationError::Stall { q: s.len(), s: from })?;
        let start = prof.kappa(next) - prof.kappa(from) + g;
        s.push(next);
        if next >= 1.0 {
            let p = iterations_to_reach(eps, start, alpha);
            iters.push(p);
            gamma.push(alpha.powi(p as i32) * start);
            break;
        }
        iters.push(1);
        gamma.push(alpha * start);
        if s.len() > MAX_STEPS {
            return Err(ContinuationError::Stall { q: s.len(), s: next });
        }
    }
    Ok(LoadPlan { s, iters, gamma })
}

/// One step straight to full load, with enough iterations for `eps` if the
/// start were inside the window. Not admissible unless `κ(1) + γ₀ <= δ(1)`.
pub fn plan_single_step(eps: f64, gamma0: f64, prof: &dyn ContinuationProfile) -> LoadPlan {
    let start = prof.kappa(1.0) + gamma0;
    let p = iterations_to_reach(eps, start, prof.alpha());
    LoadPlan::new(vec![0.0, 1.0], vec![p], gamma0, prof)
}

/// The first reason a plan is not admissible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PlanViolation {
    Shape { s: usize, iters: usize, gamma: usize },
    Endpoints { first: f64, last: f64 },
    Unordered { q: usize },
    NoIterations { q: usize },
    /// `γ` disagrees with the recurrence.
    Supersolution { q: usize, stored: f64, recomputed: f64 },
    /// The start of step `q` lies outside the contraction window.
    Window { q: usize, start: f64, delta: f64 },
    Tolerance { gamma: f64, eps: f64 },
}

impl std::fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Shape { s, iters, gamma } => write!(f, "inconsistent lengths: {s} loads, {iters} counts, {gamma} bounds"),
            Self::Endpoints { first, last } => write!(f, "plan runs from {first} to {last}, not 0 to 1"),
            Self::Unordered { q } => write!(f, "load step {q} goes backwards"),
            Self::NoIterations { q } => write!(f, "step {q} has no iterations"),
            Self::Supersolution { q, stored, recomputed } => {
                write!(f, "γ_{q} = {stored:e} does not follow the recurrence ({recomputed:e})")
            }
            Self::Window { q, start, delta } => {
                write!(f, "step {q} starts {start:e} from the solution, outside the window radius {delta:e}")
            }
            Self::Tolerance { gamma, eps } => write!(f, "final bound {gamma:e} exceeds tolerance {eps:e}"),
        }
    }
}

/// Checks ordering, positive counts, the window constraint at every step and
/// `γ_Q <= ε`. Both inequalities are closed.
pub fn is_admissible(plan: &LoadPlan, eps: f64, prof: &dyn ContinuationProfile) -> Result<(), PlanViolation> {
    let (ns, ni, ng) = (plan.s.len(), plan.iters.len(), plan.gamma.len());
    if ni == 0 || ns != ni + 1 || ng != ns {
        return Err(PlanViolation::Shape { s: ns, iters: ni, gamma: ng });
    }
    if plan.s[0] != 0.0 || plan.s[ns - 1] != 1.0 {
        return Err(PlanViolation::Endpoints { first: plan.s[0], last: plan.s[ns - 1] });
    }
    let recomputed = supersolution(&plan.s, &plan.iters, plan.gamma[0], prof);
    for q in 1..ns {
        if plan.s[q] < plan.s[q - 1] {
            return Err(PlanViolation::Unordered { q });
        }
        if plan.iters[q - 1] == 0 {
            return Err(PlanViolation::NoIterations { q });
        }
        if recomputed[q] != plan.gamma[q] {
            return Err(PlanViolation::Supersolution { q, stored: plan.gamma[q], recomputed: recomputed[q] });
        }
        let start = plan.start_error(q, prof);
        let delta = prof.delta(plan.s[q]);
        if !(start <= delta) {
            return Err(PlanViolation::Window { q, start, delta });
        }
    }
    if !(plan.final_gamma() <= eps) {
        return Err(PlanViolation::Tolerance { gamma: plan.final_gamma(), eps });
    }
    Ok(())
}

/// Enlarges every non-final step until its start touches the window edge
/// (or reaches `s = 1`), keeping the iteration counts. Steps that are
/// already maximal with an unchanged prefix are kept bit for bit.
pub fn maximize_steps(plan: &LoadPlan, prof: &dyn ContinuationProfile) -> LoadPlan {
    let q_total = plan.steps();
    let alpha = prof.alpha();
    let mut s = vec![0.0];
    let mut gamma = vec![plan.gamma[0]];
    let mut prefix_same = true;
    for q in 1..=q_total {
        let (from, g) = (s[q - 1], gamma[q - 1]);
        let next = if q == q_total {
            1.0
        } else {
            let tight = prof.kappa(plan.s[q]) - prof.kappa(from) + g - prof.delta(plan.s[q]);
            if prefix_same && (-TIGHT..=0.0).contains(&tight) {
                plan.s[q]
            } else {
                // an admissible prefix always leaves a positive reach
                greedy_reach(from, g, prof).unwrap_or(from.max(plan.s[q]))
            }
        };
        prefix_same &= next == plan.s[q];
        let start = prof.kappa(next) - prof.kappa(from) + g;
        s.push(next);
        gamma.push(alpha.powi(plan.iters[q - 1] as i32) * start);
    }
    LoadPlan { s, iters: plan.iters.clone(), gamma }
}

/// Splits step `j` (with `P_j > 1`) into a single iteration at `s_j` and a
/// new step at `s_j + Δs` carrying the remaining `P_j - 1`, where
/// `κ(s_j + Δs) - κ(s_j) + γ̃_j = δ(s_j + Δs)` with `γ̃_j` the bound after one
/// iteration. Total work is unchanged.
pub fn split_step(plan: &LoadPlan, j: usize, prof: &dyn ContinuationProfile) -> Result<LoadPlan, ContinuationError> {
    let q_total = plan.steps();
    if j == 0 || j >= q_total {
        return Err(ContinuationError::RewriteInapplicable { j, reason: "no such non-final step" });
    }
    if plan.iters[j - 1] < 2 {
        return Err(ContinuationError::RewriteInapplicable { j, reason: "step has a single iteration" });
    }
    let gamma_one = prof.alpha() * plan.start_error(j, prof);
    let (sj, sn) = (plan.s[j], plan.s[j + 1]);
    let kj = prof.kappa(sj);
    let f = |s: f64| prof.kappa(s) - kj + gamma_one - prof.delta(s);
    if !(f(sj) < 0.0 && f(sn) > 0.0) {
        return Err(ContinuationError::RewriteInapplicable { j, reason: "new step not bracketed by the next load" });
    }
    let (a, _) = bisect_bracket(f, sj, sn, STEP_WIDTH).map_err(ContinuationError::Root)?;
    if !(a > sj) {
        return Err(ContinuationError::RewriteInapplicable { j, reason: "new step has zero length" });
    }
    let mut s = plan.s.clone();
    let mut iters = plan.iters.clone();
    s.insert(j + 1, a);
    let rest = iters[j - 1] - 1;
    iters[j - 1] = 1;
    iters.insert(j, rest);
    Ok(LoadPlan::new(s, iters, plan.gamma[0], prof))
}

/// Folds trailing steps that sit at `s = 1` into the first one that
/// reaches it.
pub fn merge_final_steps(plan: &LoadPlan, prof: &dyn ContinuationProfile) -> LoadPlan {
    let first_one = plan.s.iter().position(|&v| v >= 1.0).expect("plans end at 1");
    if first_one == plan.s.len() - 1 {
        return plan.clone();
    }
    let mut iters: Vec<u32> = plan.iters[..first_one].to_vec();
    let folded: u32 = plan.iters[first_one - 1..].iter().sum();
    *iters.last_mut().expect("at least one step") = folded;
    LoadPlan::new(plan.s[..=first_one].to_vec(), iters, plan.gamma[0], prof)
}

/// Applies the rewrites until every non-final step is maximal with a single
/// iteration. Work is preserved and `γ_Q` never increases.
pub fn normalize(plan: &LoadPlan, prof: &dyn ContinuationProfile) -> Result<LoadPlan, ContinuationError> {
    let mut cur = merge_final_steps(&maximize_steps(plan, prof), prof);
    for _ in 0..MAX_STEPS {
        let q_total = cur.steps();
        let Some(j) = (1..q_total).find(|&q| cur.iters[q - 1] > 1) else {
            return Ok(cur);
        };
        cur = match split_step(&cur, j, prof) {
            Ok(p) => p,
            // The last non-final step can already reach s = 1 after one
            // iteration: hand its spare iterations to the final step.
            Err(ContinuationError::RewriteInapplicable { .. }) if j == q_total - 1 => {
                let mut iters = cur.iters.clone();
                let spare = iters[j - 1] - 1;
                iters[j - 1] = 1;
                iters[j] += spare;
                LoadPlan::new(cur.s.clone(), iters, cur.gamma[0], prof)
            }
            Err(e) => return Err(e),
        };
        cur = merge_final_steps(&maximize_steps(&cur, prof), prof);
    }
    Err(ContinuationError::Stall { q: cur.steps(), s: 1.0 })
}

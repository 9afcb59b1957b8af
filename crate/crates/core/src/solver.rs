//! The QCE-preconditioned iteration for the QCF equations.
//!
//! Each outer step solves the energy-based equations with the ghost-force
//! correction of the previous iterate moved to the right-hand side:
//!
//! ```text
//! ψ^QCE(r^{p+1}) = -Φ - ψ^G(r^p)
//! ```
//!
//! The inner problem is the stationarity condition of
//! `G(r) = E^QCE(r) + Σ_j ν_j rhs_j r_j`, minimized by a modified Newton
//! method. Spacings past the fracture threshold abort the inner solve.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::banded::SymBandMatrix;
use crate::mesh::QcMesh;
use crate::newton::{self, max_norm, BandedObjective, NewtonFailure, NewtonSettings};
use crate::potential::{PairPotential, PotentialProfile};
use crate::qc::QcModel;

/// Residual tolerance of the inner solve, `‖ψ^QCE(r) - rhs‖_∞`.
pub const INNER_TOL: f64 = 1e-12;
/// Spacings beyond this multiple of the inflection spacing count as broken bonds.
pub const FRACTURE_FACTOR: f64 = 1.5;
pub const DEFAULT_MAX_OUTER: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("contraction constant undefined: φ''(r_U) - 5|φ''(2 r_L)| = {denominator:e} is not positive")]
    Denominator { denominator: f64 },
    #[error("window [{r_l}, {r_u}] is empty or inverted")]
    EmptyWindow { r_l: f64, r_u: f64 },
    #[error("expected {expected} {what}, got {got}")]
    Length { what: &'static str, expected: usize, got: usize },
}

/// `α = 16|φ''(2 r_L)| / (φ''(r_U) - 5|φ''(2 r_L)|)`.
pub fn contraction_constant(pot: &dyn PairPotential, r_l: f64, r_u: f64) -> Result<f64, SolverError> {
    let c = pot.d2(2.0 * r_l).abs();
    let denominator = pot.d2(r_u) - 5.0 * c;
    if !(denominator > 0.0) {
        return Err(SolverError::Denominator { denominator });
    }
    Ok(16.0 * c / denominator)
}

/// A spacing box `(r_L, r_U)^{2N+1}` together with its contraction constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionWindow {
    pub r_l: f64,
    pub r_u: f64,
    pub alpha: f64,
}

impl ContractionWindow {
    pub fn new(pot: &dyn PairPotential, r_l: f64, r_u: f64) -> Result<Self, SolverError> {
        if !(r_l < r_u) {
            return Err(SolverError::EmptyWindow { r_l, r_u });
        }
        let alpha = contraction_constant(pot, r_l, r_u)?;
        Ok(Self { r_l, r_u, alpha })
    }

    /// Window `(r - δ, r + δ)` centred on a uniform spacing.
    pub fn centred(pot: &dyn PairPotential, r: f64, delta: f64) -> Result<Self, SolverError> {
        Self::new(pot, r - delta, r + delta)
    }

    /// Open-box membership.
    pub fn contains(&self, r: &[f64]) -> bool {
        r.iter().all(|&x| self.r_l < x && x < self.r_u)
    }

    /// The two load bounds every `Φ_j` must lie strictly between.
    pub fn load_bounds(&self, pot: &dyn PairPotential) -> (f64, f64) {
        let (l, u) = (self.r_l, self.r_u);
        let lo = pot.d1(l) + 6.0 * pot.d1(2.0 * l) - 4.0 * pot.d1(2.0 * u);
        let hi = pot.d1(u) + 6.0 * pot.d1(2.0 * u) - 4.0 * pot.d1(2.0 * l);
        (lo, hi)
    }
}

/// A failed hypothesis of the contraction theorem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// `r̃₂/2 < r_L < r_U` fails.
    SpacingOrder { r_l: f64, r_u: f64, lower: f64 },
    /// `φ''(r_U) + 21 φ''(2 r_L) > 0` fails.
    Stiffness { value: f64 },
    LoadTooLow { element: i64, load: f64, bound: f64 },
    LoadTooHigh { element: i64, load: f64, bound: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::SpacingOrder { r_l, r_u, lower } => {
                write!(f, "spacing order r̃₂/2 < r_L < r_U fails: {lower} / {r_l} / {r_u}")
            }
            Self::Stiffness { value } => write!(f, "stiffness φ''(r_U) + 21φ''(2r_L) = {value:e} is not positive"),
            Self::LoadTooLow { element, load, bound } => {
                write!(f, "load inequality fails at element {element}: Φ = {load} <= lower bound {bound}")
            }
            Self::LoadTooHigh { element, load, bound } => {
                write!(f, "load inequality fails at element {element}: Φ = {load} >= upper bound {bound}")
            }
        }
    }
}

/// Evidence that the contraction theorem applies on a window for a load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub window: ContractionWindow,
    pub load_lower: f64,
    pub load_upper: f64,
}

/// Checks every hypothesis; all violations are reported, not only the first.
/// `loads` are the conjugate loads `Φ_j` in element storage order.
pub fn check_hypotheses(
    pot: &dyn PairPotential,
    prof: &PotentialProfile,
    w: &ContractionWindow,
    loads: &[f64],
) -> Result<Certificate, Vec<Violation>> {
    let mut bad = Vec::new();
    let lower = 0.5 * prof.r_tilde_2;
    if !(lower < w.r_l && w.r_l < w.r_u) {
        bad.push(Violation::SpacingOrder { r_l: w.r_l, r_u: w.r_u, lower });
    }
    let stiff = pot.d2(w.r_u) + 21.0 * pot.d2(2.0 * w.r_l);
    if !(stiff > 0.0) {
        bad.push(Violation::Stiffness { value: stiff });
    }
    let (lo, hi) = w.load_bounds(pot);
    let n = (loads.len() / 2) as i64;
    for (s, &phi) in loads.iter().enumerate() {
        let element = s as i64 - n;
        if !(phi > lo) {
            bad.push(Violation::LoadTooLow { element, load: phi, bound: lo });
        }
        if !(phi < hi) {
            bad.push(Violation::LoadTooHigh { element, load: phi, bound: hi });
        }
    }
    if bad.is_empty() {
        Ok(Certificate { window: *w, load_lower: lo, load_upper: hi })
    } else {
        Err(bad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    /// Any spacing above this aborts the inner solve as a fracture.
    pub fracture_spacing: f64,
}

impl SolverSettings {
    pub fn for_profile(prof: &PotentialProfile) -> Self {
        Self { inner_tol: INNER_TOL, inner_max_iters: 200, fracture_spacing: FRACTURE_FACTOR * prof.r_tilde_1 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InnerFailure {
    #[error("element {element} stretched to {spacing} past the fracture threshold after {iterations} inner iterations")]
    Fracture { element: i64, spacing: f64, iterations: usize, last: Vec<f64> },
    #[error("line search failed after {iterations} inner iterations (residual {residual:e})")]
    LineSearch { iterations: usize, residual: f64, last: Vec<f64> },
    #[error("inner solve did not converge in {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64, last: Vec<f64> },
}

impl InnerFailure {
    pub fn last(&self) -> &[f64] {
        match self {
            Self::Fracture { last, .. } | Self::LineSearch { last, .. } | Self::MaxIterations { last, .. } => last,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution {
    pub r: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

struct InnerObjective<'m, 'a> {
    model: &'m QcModel<'a>,
    rhs: &'m [f64],
    nu: Vec<f64>,
}

impl BandedObjective for InnerObjective<'_, '_> {
    fn value(&self, r: &[f64]) -> f64 {
        let load: f64 = r.iter().zip(&self.nu).zip(self.rhs).map(|((x, n), b)| n * b * x).sum();
        self.model.qce_energy(r) + load
    }

    fn gradient(&self, r: &[f64]) -> Vec<f64> {
        let mut g = self.model.qce_gradient(r);
        for ((gi, n), b) in g.iter_mut().zip(&self.nu).zip(self.rhs) {
            *gi += n * b;
        }
        g
    }

    fn hessian(&self, r: &[f64]) -> SymBandMatrix {
        self.model.qce_hessian(r)
    }

    fn admissible(&self, r: &[f64]) -> bool {
        r.iter().all(|&x| x > 0.0 && x.is_finite())
    }

    /// `‖ψ^QCE(r) - rhs‖_∞`.
    fn residual(&self, _r: &[f64], grad: &[f64]) -> f64 {
        grad.iter().zip(&self.nu).fold(0.0, |m, (g, n)| m.max((g / n).abs()))
    }
}

/// Status of a run at a fixed load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TraceStatus {
    /// Residual tolerance reached.
    Converged,
    /// A fixed number of iterations was requested and performed.
    Completed,
    MaxIterations,
    /// The inner solve of outer step `step` stretched `element` past the threshold.
    Fracture { step: usize, element: i64, spacing: f64, state: Vec<f64> },
    InnerFailure { step: usize, reason: String, state: Vec<f64> },
}

impl TraceStatus {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::Completed => "completed",
            Self::MaxIterations => "max_iterations",
            Self::Fracture { .. } => "fracture",
            Self::InnerFailure { .. } => "inner_failure",
        }
    }

    pub fn is_fracture(&self) -> bool {
        matches!(self, Self::Fracture { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub p: usize,
    pub spacings: Vec<f64>,
    /// `‖ψ^QCF(r^p) + Φ‖_∞`.
    pub residual: f64,
    /// `None` when no window was supplied.
    pub in_window: Option<bool>,
    pub inner_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub steps: Vec<TraceStep>,
    pub status: TraceStatus,
}

impl IterationTrace {
    pub fn last(&self) -> &TraceStep {
        self.steps.last().expect("trace holds the initial state")
    }

    pub fn final_spacings(&self) -> &[f64] {
        &self.last().spacings
    }

    pub fn final_residual(&self) -> f64 {
        self.last().residual
    }

    /// Outer iterations actually performed.
    pub fn iterations(&self) -> usize {
        self.steps.len() - 1
    }

    /// CSV with header `p,residual_inf[force],max_spacing[length],in_window,inner_iters`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["p", "residual_inf[force]", "max_spacing[length]", "in_window", "inner_iters"]).expect("in-memory write");
        for s in &self.steps {
            let inw = match s.in_window {
                Some(true) => "1",
                Some(false) => "0",
                None => "",
            };
            let widest = s.spacings.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            w.write_record([
                s.p.to_string(),
                format!("{:e}", s.residual),
                format!("{widest:?}"),
                inw.to_string(),
                s.inner_iters.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    /// Sidecar summary: status, step count, final residual and state.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "status": self.status,
            "iterations": self.iterations(),
            "final_residual": self.final_residual(),
            "final_spacings": self.final_spacings(),
        })
    }
}

/// Outer stopping rule: at most `max_iters` steps, earlier if `tol` is given
/// and the residual drops to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub max_iters: usize,
    pub tol: Option<f64>,
}

impl StopRule {
    pub fn fixed(p: usize) -> Self {
        Self { max_iters: p, tol: None }
    }

    pub fn tolerance(tol: f64) -> Self {
        Self { max_iters: DEFAULT_MAX_OUTER, tol: Some(tol) }
    }
}

/// Where a run broke.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractureSite {
    pub step: usize,
    pub element: i64,
    pub spacing: f64,
}

pub struct QcSolver<'a> {
    model: QcModel<'a>,
    settings: SolverSettings,
}

impl<'a> QcSolver<'a> {
    pub fn new(pot: &'a dyn PairPotential, mesh: &'a QcMesh, settings: SolverSettings) -> Self {
        Self { model: QcModel::new(pot, mesh), settings }
    }

    pub fn model(&self) -> &QcModel<'a> {
        &self.model
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    fn check_len(&self, v: &[f64], what: &'static str) -> Result<(), SolverError> {
        let expected = self.model.mesh().num_elements();
        if v.len() != expected {
            return Err(SolverError::Length { what, expected, got: v.len() });
        }
        Ok(())
    }

    /// Solves `ψ^QCE(r) = rhs` starting from `guess`.
    pub fn inner_minimize(&self, rhs: &[f64], guess: &[f64]) -> Result<InnerSolution, InnerFailure> {
        self.check_len(rhs, "right-hand side entries").expect("rhs length");
        self.check_len(guess, "guess spacings").expect("guess length");
        let obj = InnerObjective { model: &self.model, rhs, nu: self.model.mesh().nus() };
        let settings = NewtonSettings { tol: self.settings.inner_tol, max_iters: self.settings.inner_max_iters };
        let limit = self.settings.fracture_spacing;
        let mesh = self.model.mesh();
        let monitor = |r: &[f64]| -> Result<(), (i64, f64)> {
            let (s, &v) = r.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("nonempty");
            if v > limit {
                Err((mesh.index(s), v))
            } else {
                Ok(())
            }
        };
        match newton::minimize(&obj, guess, settings, monitor) {
            Ok(out) => Ok(InnerSolution { r: out.x, iterations: out.iterations, residual: out.residual }),
            Err(NewtonFailure::Aborted { x, iterations, reason: (element, spacing) }) => {
                Err(InnerFailure::Fracture { element, spacing, iterations, last: x })
            }
            Err(NewtonFailure::LineSearch { x, iterations, residual }) => {
                Err(InnerFailure::LineSearch { iterations, residual, last: x })
            }
            Err(NewtonFailure::MaxIterations { x, iterations, residual }) => {
                Err(InnerFailure::MaxIterations { iterations, residual, last: x })
            }
        }
    }

    /// Right-hand side `-Φ - ψ^G(r_p)` of one outer step.
    pub fn outer_rhs(&self, r_p: &[f64], loads: &[f64]) -> Vec<f64> {
        self.model.ghost_correction(r_p).iter().zip(loads).map(|(g, l)| -l - g).collect()
    }

    /// One application of the iteration map `T`.
    pub fn outer_iterate(&self, r_p: &[f64], loads: &[f64]) -> Result<InnerSolution, InnerFailure> {
        let rhs = self.outer_rhs(r_p, loads);
        self.inner_minimize(&rhs, r_p)
    }

    pub fn residual(&self, r: &[f64], loads: &[f64]) -> f64 {
        self.model.equilibrium_residual(r, loads)
    }

    /// Iterates from `r0` at fixed conjugate loads. Failures end up in the
    /// trace status.
    pub fn solve_at_load(
        &self,
        r0: &[f64],
        loads: &[f64],
        stop: StopRule,
        window: Option<&ContractionWindow>,
    ) -> IterationTrace {
        let record = |p: usize, r: Vec<f64>, inner_iters: usize| TraceStep {
            p,
            residual: self.residual(&r, loads),
            in_window: window.map(|w| w.contains(&r)),
            spacings: r,
            inner_iters,
        };
        let mut steps = vec![record(0, r0.to_vec(), 0)];
        let converged = |s: &TraceStep| stop.tol.is_some_and(|t| s.residual <= t);
        if converged(&steps[0]) {
            return IterationTrace { steps, status: TraceStatus::Converged };
        }
        for p in 1..=stop.max_iters {
            let prev = &steps[p - 1].spacings;
            match self.outer_iterate(prev, loads) {
                Ok(sol) => steps.push(record(p, sol.r, sol.iterations)),
                Err(InnerFailure::Fracture { element, spacing, last, .. }) => {
                    return IterationTrace { steps, status: TraceStatus::Fracture { step: p, element, spacing, state: last } };
                }
                Err(e) => {
                    let state = e.last().to_vec();
                    return IterationTrace { steps, status: TraceStatus::InnerFailure { step: p, reason: e.to_string(), state } };
                }
            }
            if converged(&steps[p]) {
                return IterationTrace { steps, status: TraceStatus::Converged };
            }
        }
        let status = if stop.tol.is_some() { TraceStatus::MaxIterations } else { TraceStatus::Completed };
        IterationTrace { steps, status }
    }
}

/// Reports a fracture recorded in the status, or any recorded state with a
/// spacing above `threshold`.
pub fn detect_fracture(trace: &IterationTrace, threshold: f64) -> Option<FractureSite> {
    if let TraceStatus::Fracture { step, element, spacing, .. } = trace.status {
        return Some(FractureSite { step, element, spacing });
    }
    let n = (trace.steps.first()?.spacings.len() / 2) as i64;
    trace.steps.iter().find_map(|s| {
        let (slot, &v) = s.spacings.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
        (v > threshold).then_some(FractureSite { step: s.p, element: slot as i64 - n, spacing: v })
    })
}

/// One randomized measurement of the contraction property.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionSample {
    pub input_distance: f64,
    pub output_distance: f64,
    pub ratio: f64,
}

/// Draws `pairs` pairs of states uniformly from the open window and applies
/// `T` to both. Pairs for which `T` fails are returned as errors.
pub fn sample_contraction(
    solver: &QcSolver<'_>,
    window: &ContractionWindow,
    loads: &[f64],
    pairs: usize,
    seed: u64,
) -> Result<Vec<ContractionSample>, InnerFailure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = solver.model().mesh().num_elements();
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n)
            .map(|_| {
                let t: f64 = rng.gen_range(0.0..1.0);
                // keep strictly inside the open box
                window.r_l + (window.r_u - window.r_l) * (1e-9 + t * (1.0 - 2e-9))
            })
            .collect()
    };
    let mut out = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let r = draw(&mut rng);
        let s = draw(&mut rng);
        let tr = solver.outer_iterate(&r, loads)?.r;
        let ts = solver.outer_iterate(&s, loads)?.r;
        let din = distance(&r, &s);
        let dout = distance(&tr, &ts);
        out.push(ContractionSample { input_distance: din, output_distance: dout, ratio: dout / din });
    }
    Ok(out)
}

/// `‖a - b‖_∞`.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    max_norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{compute_profile, LennardJones};
    use crate::qc::uniform_load;
    use crate::roots::bisect_newton;

    const LJ: LennardJones = LennardJones;

    fn setup(n: usize, k: usize) -> (PotentialProfile, QcMesh) {
        let prof = compute_profile(&LJ).unwrap();
        let mesh = QcMesh::uncoarsened(n, k, prof.a0).unwrap();
        (prof, mesh)
    }

    fn uniform_root(phi: f64, prof: &PotentialProfile) -> f64 {
        bisect_newton(|r| LJ.chain_stress(r) - phi, |r| LJ.chain_stiffness(r), prof.a0, prof.r_star, 1e-15).unwrap()
    }

    /// δ of the window centred at `r` with contraction constant `alpha`, by
    /// plain bisection.
    fn window_delta(r: f64, alpha: f64, prof: &PotentialProfile) -> f64 {
        let g = |d: f64| LJ.d2(r + d) + (5.0 + 16.0 / alpha) * LJ.d2(2.0 * (r - d));
        let (mut lo, mut hi) = (0.0, r - 0.5 * prof.r_tilde_2);
        assert!(g(lo) > 0.0 && g(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn contraction_constant_inverts_window_construction() {
        let prof = compute_profile(&LJ).unwrap();
        let d = window_delta(prof.a0, 8.0 / 9.0, &prof);
        let alpha = contraction_constant(&LJ, prof.a0 - d, prof.a0 + d).unwrap();
        assert!((alpha - 8.0 / 9.0).abs() < 1e-10);
    }

    #[test]
    fn contraction_constant_vanishes_at_inflection_pair() {
        let prof = compute_profile(&LJ).unwrap();
        let r_l = 0.5 * prof.r_tilde_1;
        assert!(contraction_constant(&LJ, r_l, 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn contraction_constant_grows_with_upper_bound() {
        let mut prev = 0.0;
        for i in 0..20 {
            let r_u = 1.0 + 0.004 * i as f64;
            let a = contraction_constant(&LJ, 0.93, r_u).unwrap();
            assert!(a > prev);
            prev = a;
        }
        assert!(matches!(contraction_constant(&LJ, 0.93, 1.2), Err(SolverError::Denominator { .. })));
    }

    #[test]
    fn hypotheses_certified_at_half_load() {
        let prof = compute_profile(&LJ).unwrap();
        let r = uniform_root(2.76 * 0.5, &prof);
        let d = window_delta(r, 8.0 / 9.0, &prof);
        let w = ContractionWindow::centred(&LJ, r, d).unwrap();
        let cert = check_hypotheses(&LJ, &prof, &w, &[1.38; 15]).unwrap();
        assert!(cert.load_lower < 1.38 && 1.38 < cert.load_upper);
    }

    #[test]
    fn hypotheses_report_violations() {
        let prof = compute_profile(&LJ).unwrap();
        let w = ContractionWindow::centred(&LJ, prof.a0, 0.03).unwrap();
        let mut loads = vec![0.0; 5];
        loads[3] = 50.0;
        let bad = check_hypotheses(&LJ, &prof, &w, &loads).unwrap_err();
        assert_eq!(bad.len(), 1);
        assert!(matches!(bad[0], Violation::LoadTooHigh { element: 1, .. }));
        assert!(bad[0].to_string().contains("load inequality"));

        let low = ContractionWindow { r_l: 0.5 * prof.r_tilde_2 - 0.01, r_u: 1.0, alpha: 0.5 };
        let bad = check_hypotheses(&LJ, &prof, &low, &[0.0; 3]).unwrap_err();
        assert!(matches!(bad[0], Violation::SpacingOrder { .. }));
    }

    #[test]
    fn inner_solve_returns_stationary_guess_untouched() {
        let (prof, mesh) = setup(7, 3);
        let solver = QcSolver::new(&LJ, &mesh, SolverSettings::for_profile(&prof));
        let r: Vec<f64> = (0..15).map(|s| prof.a0 + 0.01 * (s as f64 * 0.9).sin()).collect();
        let rhs = solver.model().psi_qce(&r);
        let sol = solver.inner_minimize(&rhs, &r).unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.r, r);
    }

    #[test]
    fn inner_solve_recovers_manufactured_solution() {
        let (prof, mesh) = setup(7, 3);
        let solver = QcSolver::new(&LJ, &mesh, SolverSettings::for_profile(&prof));
        let target: Vec<f64> = (0..15).map(|s| 1.02 + 0.015 * (s as f64 * 1.3).cos()).collect();
        let rhs = solver.model().psi_qce(&target);
        let guess: Vec<f64> = target.iter().map(|x| x + 0.01).collect();
        let sol = solver.inner_minimize(&rhs, &guess).unwrap();
        assert!(distance(&sol.r, &target) < 1e-10);
        assert!(sol.residual <= INNER_TOL);
    }

    #[test]
    fn reference_state_is_a_fixed_point_at_zero_load() {
        let (prof, mesh) = setup(7, 3);
        let solver = QcSolver::new(&LJ, &mesh, SolverSettings::for_profile(&prof));
        let r0 = mesh.uniform_spacings(prof.a0);
        let next = solver.outer_iterate(&r0, &uniform_load(&mesh, 0.0)).unwrap();
        assert!(distance(&next.r, &r0) < 1e-10);
    }

    #[test]
    fn uniform_solution_is_a_fixed_point_under_tension() {
        let (prof, mesh) = setup(7, 3);
        let solver = QcSolver::new(&LJ, &mesh, SolverSettings::for_profile(&prof));
        let phi = 2.0;
        let r = mesh.uniform_spacings(uniform_root(phi, &prof));
        let loads = uniform_load(&mesh, phi);
        assert!(solver.residual(&r, &loads) < 1e-12);
        let next = solver.outer_iterate(&r, &loads).unwrap();
        assert!(distance(&next.r, &r) < 1e-10);
    }

    #[test]
    fn zero_iterations_keep_only_the_start() {
        let (prof, mesh) = setup(4, 2);
        let solver = QcSolver::new(&LJ, &mesh, SolverSettings::for_profile(&prof));
        let r0 = mesh.uniform_spacings(prof.a0);
        let trace = solver.solve_at_load(&r0, &uniform_load(&mesh, 1.0), StopRule::fixed(0), None);
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.status, TraceStatus::Completed);
        assert!(trace.to_csv().starts_with("p,residual_inf[force],max_spacing[length],in_window,inner_iters\n0,"));
    }

    #[test]
    fn converges_inside_window_at_half_load() {
        let (prof, mesh) = setup(7, 3);
        let solver = QcSolver::new(&LJ, &mesh, SolverSettings::for_profile(&prof));
        let phi = 1.38;
        let r_star = uniform_root(phi, &prof);
        let d = window_delta(r_star, 8.0 / 9.0, &prof);
        let w = ContractionWindow::centred(&LJ, r_star, d).unwrap();
        let r0: Vec<f64> = (0..15).map(|s| r_star + 0.5 * d * ((s as f64) * 2.1).sin()).collect();
        let trace = solver.solve_at_load(&r0, &uniform_load(&mesh, phi), StopRule::tolerance(1e-10), Some(&w));
        assert_eq!(trace.status, TraceStatus::Converged);
        assert!(trace.final_residual() <= 1e-10);
        let errs: Vec<f64> = trace.steps.iter().map(|s| distance(&s.spacings, &[r_star; 15])).collect();
        for pair in errs.windows(2) {
            assert!(pair[1] <= 8.0 / 9.0 * pair[0] + 1e-9, "{pair:?}");
        }
        assert!(trace.steps.iter().all(|s| s.in_window == Some(true)));
        assert!(detect_fracture(&trace, solver.settings().fracture_spacing).is_none());
    }

    #[test]
    fn single_full_load_step_fractures_at_the_interface() {
        let (prof, mesh) = setup(7, 3);
        let solver = QcSolver::new(&LJ, &mesh, SolverSettings::for_profile(&prof));
        let r0 = mesh.uniform_spacings(prof.a0);
        let trace = solver.solve_at_load(&r0, &uniform_load(&mesh, 2.76), StopRule::tolerance(1e-10), None);
        let site = detect_fracture(&trace, solver.settings().fracture_spacing).expect("fracture");
        assert!(trace.status.is_fracture());
        assert!((-4..=-2).contains(&site.element) || (2..=4).contains(&site.element), "{site:?}");
    }

    #[test]
    fn stretched_uniform_state_is_not_a_fracture() {
        let trace = IterationTrace {
            steps: vec![TraceStep { p: 0, spacings: vec![1.3; 5], residual: 0.0, in_window: None, inner_iters: 0 }],
            status: TraceStatus::Completed,
        };
        assert!(detect_fracture(&trace, 1.66).is_none());
        assert!(detect_fracture(&trace, 1.2).is_some());
    }

    #[test]
    fn inner_tolerance_barely_moves_the_answer() {
        let (prof, mesh) = setup(7, 3);
        let loads = uniform_load(&mesh, 1.0);
        let r0 = mesh.uniform_spacings(prof.a0);
        let mut answers = Vec::new();
        for tol in [1e-10, 5e-11] {
            let mut settings = SolverSettings::for_profile(&prof);
            settings.inner_tol = tol;
            let solver = QcSolver::new(&LJ, &mesh, settings);
            let t = solver.solve_at_load(&r0, &loads, StopRule::tolerance(1e-9), None);
            assert_eq!(t.status, TraceStatus::Converged);
            answers.push(t.final_spacings().to_vec());
        }
        // the outer tolerance dominates; inner accuracy changes little beyond it
        assert!(distance(&answers[0], &answers[1]) <= 10.0 * 1e-9);
    }

    #[test]
    fn sampled_contraction_stays_below_alpha() {
        let (prof, mesh) = setup(7, 3);
        let solver = QcSolver::new(&LJ, &mesh, SolverSettings::for_profile(&prof));
        let phi = 1.38;
        let r = uniform_root(phi, &prof);
        let w = ContractionWindow::centred(&LJ, r, window_delta(r, 0.5, &prof)).unwrap();
        let samples = sample_contraction(&solver, &w, &uniform_load(&mesh, phi), 10, 7).unwrap();
        assert!(samples.iter().all(|s| s.output_distance <= 0.5 * s.input_distance + 1e-6));
        let again = sample_contraction(&solver, &w, &uniform_load(&mesh, phi), 10, 7).unwrap();
        assert_eq!(samples, again);
    }
}

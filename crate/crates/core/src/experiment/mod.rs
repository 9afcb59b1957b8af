//! Experiment commands behind the `qclab` binary. Every command writes
//! `report.json` plus its CSV files into the configured output directory.

mod config;

use std::path::PathBuf;

use serde_json::{json, Value};
use thiserror::Error;

pub use config::{ConfigError, ExperimentConfig, PlannerKind, PotentialKind, KEYS};

use crate::continuation::{
    contraction_radius, is_admissible, path_error, plan_endpoint, plan_single_step, plan_uniform, run_plan,
    uniform_response, window_terminus, ChainProfile, ContinuationError, LoadPath, LoadPlan,
};
use crate::mesh::QcMesh;
use crate::potential::{compute_profile, verify_assumptions, PairPotential, PotentialProfile};
use crate::qc::uniform_load;
use crate::solver::{ContractionWindow, QcSolver, SolverSettings, StopRule, TraceStatus};

/// Contraction constants of the band picture, as `(numerator, denominator)`.
pub const BAND_ALPHAS: [(u32, u32); 4] = [(1, 8), (1, 4), (1, 2), (8, 9)];
pub const BAND_POINTS: usize = 512;
/// Residual at which the single-step experiment counts as converged.
pub const FRACTURE_RUN_TOL: f64 = 1e-10;
/// Sample points of the path error of a uniform plan.
pub const PATH_ERROR_SAMPLES: usize = 4000;

/// Process exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    /// Output could not be written, or the fracture demo converged.
    Failure = 1,
    Violation = 2,
    Fracture = 3,
    Config = 4,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CommandError {
    pub fn exit(&self) -> Exit {
        match self {
            Self::Config(_) => Exit::Config,
            Self::Io { .. } => Exit::Failure,
        }
    }
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit: Exit,
    pub report: Value,
    /// Files written, report last.
    pub files: Vec<PathBuf>,
}

fn exit_for(e: &ContinuationError) -> Exit {
    use ContinuationError as E;
    match e {
        E::LoadLimit { .. } | E::NegativeLoad(_) | E::BadAlpha(_) => Exit::Config,
        E::Fracture { .. } | E::InnerFailure { .. } => Exit::Fracture,
        _ => Exit::Violation,
    }
}

struct Output<'c> {
    cfg: &'c ExperimentConfig,
    command: &'static str,
    files: Vec<(String, String)>,
}

impl<'c> Output<'c> {
    fn new(cfg: &'c ExperimentConfig, command: &'static str) -> Self {
        Self { cfg, command, files: Vec::new() }
    }

    fn csv(&mut self, name: String, body: String) {
        self.files.push((name, body));
    }

    fn finish(self, exit: Exit, body: Value) -> Result<Outcome, CommandError> {
        let mut report = json!({
            "command": self.command,
            "config_hash": self.cfg.hash(),
            "config": self.cfg.to_text(),
            "exit_code": exit.code(),
        });
        if let (Value::Object(dst), Value::Object(src)) = (&mut report, body) {
            dst.extend(src);
        }
        let dir = &self.cfg.out;
        std::fs::create_dir_all(dir).map_err(|source| CommandError::Io { path: dir.clone(), source })?;
        let mut written = Vec::with_capacity(self.files.len() + 1);
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        for (name, body) in self.files.iter().chain(std::iter::once(&("report.json".to_string(), text))) {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|source| CommandError::Io { path: path.clone(), source })?;
            written.push(path);
        }
        Ok(Outcome { exit, report, files: written })
    }
}

/// The potential, and its landmarks or why they could not be found.
type Setup = (Box<dyn PairPotential>, Result<PotentialProfile, String>);

fn setup(cfg: &ExperimentConfig) -> Result<Setup, CommandError> {
    cfg.validate()?;
    let pot = cfg.potential.build();
    let prof = compute_profile(pot.as_ref()).map_err(|e| e.to_string());
    Ok((pot, prof))
}

/// Landmarks, load limit and the assumption table.
pub fn cmd_profile(cfg: &ExperimentConfig) -> Result<Outcome, CommandError> {
    let (pot, prof) = setup(cfg)?;
    let out = Output::new(cfg, "profile");
    let prof = match prof {
        Ok(p) => p,
        Err(e) => return out.finish(Exit::Violation, json!({ "error": e })),
    };
    let checks = verify_assumptions(pot.as_ref(), &prof);
    let table: Vec<Value> = checks
        .checks
        .iter()
        .map(|c| json!({ "assumption": c.assumption, "condition": c.assumption.describe(), "passed": c.passed, "detail": c.detail }))
        .collect();
    let exit = if checks.all_passed() { Exit::Success } else { Exit::Violation };
    out.finish(
        exit,
        json!({
            "potential": pot.name(),
            "a0": prof.a0,
            "r_tilde_1": prof.r_tilde_1,
            "r_tilde_2": prof.r_tilde_2,
            "d_tilde": prof.d_tilde,
            "r_star": prof.r_star,
            "phi_max": prof.phi_max,
            "assumptions": table,
        }),
    )
}

/// One contraction band: rows `(s, r, r - δ, r + δ)` up to where the window
/// closes, and the terminus.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub alpha: f64,
    pub rows: Vec<[f64; 4]>,
    pub terminus: Option<f64>,
}

impl Band {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["s[1]", "r[length]", "r_minus_delta[length]", "r_plus_delta[length]"]).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:?}"))).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

/// Samples the band for `alpha` on `points` loads in `[0, Φ_max/scale)`; a
/// closing zero-width row sits at the terminus.
pub fn contraction_band(pot: &dyn PairPotential, prof: &PotentialProfile, path: &LoadPath, alpha: f64, points: usize) -> Band {
    let top = prof.phi_max / path.scale;
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let s = top * i as f64 / points as f64;
        let Ok(r) = uniform_response(pot, prof, path.load(s)) else { break };
        let Ok(d) = contraction_radius(pot, prof, r, alpha) else { break };
        rows.push([s, r, r - d, r + d]);
    }
    let terminus = window_terminus(pot, prof, path, alpha).ok();
    if let Some(t) = terminus {
        let after_last = rows.last().is_none_or(|row| row[0] < t);
        if let (true, Ok(r)) = (after_last, uniform_response(pot, prof, path.load(t))) {
            rows.push([t, r, r, r]);
        }
    }
    Band { alpha, rows, terminus }
}

/// The four bands, computed concurrently.
pub fn cmd_bands(cfg: &ExperimentConfig) -> Result<Outcome, CommandError> {
    let (pot, prof) = setup(cfg)?;
    let mut out = Output::new(cfg, "bands");
    let prof = match prof {
        Ok(p) => p,
        Err(e) => return out.finish(Exit::Violation, json!({ "error": e })),
    };
    let path = LoadPath { scale: cfg.scale };
    let pot = pot.as_ref();
    let bands: Vec<Band> = std::thread::scope(|scope| {
        let handles: Vec<_> = BAND_ALPHAS
            .iter()
            .map(|&(a, b)| {
                let prof = &prof;
                scope.spawn(move || contraction_band(pot, prof, &path, f64::from(a) / f64::from(b), BAND_POINTS))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("band worker panicked")).collect()
    });
    let mut summary = Vec::new();
    for (band, &(a, b)) in bands.iter().zip(&BAND_ALPHAS) {
        out.csv(format!("bands_alpha_{a}_{b}.csv"), band.to_csv());
        summary.push(json!({
            "alpha": format!("{a}/{b}"),
            "rows": band.rows.len(),
            "terminus_s": band.terminus,
            "last_s": band.rows.last().map(|r| r[0]),
        }));
    }
    out.finish(Exit::Success, json!({ "phi_max": prof.phi_max, "scale": cfg.scale, "bands": summary }))
}

/// Elements with an end on an atom next to the atomistic/continuum boundary.
pub fn interface_elements(mesh: &QcMesh) -> Vec<i64> {
    let k = mesh.k() as i64;
    [-k - 2, -k - 1, -k, k - 1, k, k + 1].into_iter().filter(|&j| mesh.has_element(j)).collect()
}

/// Full load in one step from the reference state.
pub fn cmd_fracture(cfg: &ExperimentConfig) -> Result<Outcome, CommandError> {
    let (pot, prof) = setup(cfg)?;
    let mut out = Output::new(cfg, "fracture");
    let prof = match prof {
        Ok(p) => p,
        Err(e) => return out.finish(Exit::Violation, json!({ "error": e })),
    };
    let pot = pot.as_ref();
    let mesh = cfg.mesh(prof.a0)?;
    let solver = QcSolver::new(pot, &mesh, SolverSettings::for_profile(&prof));
    let loads = uniform_load(&mesh, cfg.scale);
    let window = uniform_response(pot, &prof, cfg.scale)
        .ok()
        .and_then(|r| contraction_radius(pot, &prof, r, cfg.alpha).ok().map(|d| (r, d)))
        .and_then(|(r, d)| ContractionWindow::centred(pot, r, d).ok());
    let trace = solver.solve_at_load(
        &mesh.uniform_spacings(prof.a0),
        &loads,
        StopRule::tolerance(FRACTURE_RUN_TOL),
        window.as_ref(),
    );
    out.csv("trace_q1.csv".into(), trace.to_csv());
    let interface = interface_elements(&mesh);
    let (exit, site) = match &trace.status {
        TraceStatus::Fracture { step, element, spacing, .. } => (
            Exit::Success,
            json!({ "step": step, "element": element, "spacing": spacing, "at_interface": interface.contains(element) }),
        ),
        _ => (Exit::Failure, Value::Null),
    };
    out.finish(
        exit,
        json!({
            "load": cfg.scale,
            "status": trace.status.label(),
            "fracture": site,
            "interface_elements": interface,
            "iterations": trace.iterations(),
            "final_residual": trace.final_residual(),
            "window": window,
        }),
    )
}

fn build_plan(cfg: &ExperimentConfig, cp: &ChainProfile<'_>) -> Result<(LoadPlan, Value), ContinuationError> {
    match cfg.planner {
        PlannerKind::Endpoint => Ok((plan_endpoint(cfg.epsilon, cfg.gamma0, cp)?, Value::Null)),
        PlannerKind::Uniform => {
            let c = cp.uniform_constants()?;
            let up = plan_uniform(cfg.epsilon, &c)?;
            Ok((up.to_load_plan(cfg.gamma0, cp), json!({ "constants": c, "uniform": up })))
        }
        PlannerKind::SingleStep => Ok((plan_single_step(cfg.epsilon, cfg.gamma0, cp), Value::Null)),
    }
}

fn plan_summary(plan: &LoadPlan) -> Value {
    json!({
        "steps": plan.steps(),
        "work": plan.work(),
        "final_gamma": plan.final_gamma(),
    })
}

enum Planned<'p> {
    Ready(Box<ChainProfile<'p>>, LoadPlan, Value),
    Failed(Exit, Value),
}

fn prepare<'p>(cfg: &ExperimentConfig, pot: &'p dyn PairPotential, prof: &PotentialProfile, out: &mut Output<'_>) -> Planned<'p> {
    let fail = |e: ContinuationError| Planned::Failed(exit_for(&e), json!({ "error": e.to_string() }));
    let cp = match ChainProfile::new(pot, prof, LoadPath { scale: cfg.scale }, cfg.alpha) {
        Ok(cp) => cp,
        Err(e) => return fail(e),
    };
    let (plan, extra) = match build_plan(cfg, &cp) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    out.csv("plan.csv".into(), plan.to_csv());
    let admissible = is_admissible(&plan, cfg.epsilon, &cp);
    let body = json!({
        "planner": cfg.planner.name(),
        "plan": plan_summary(&plan),
        "planner_details": extra,
        "admissible": admissible.is_ok(),
        "admissibility": admissible.as_ref().err().map(ToString::to_string),
    });
    // A single full-load step is run regardless, to show what happens.
    if admissible.is_err() && cfg.planner != PlannerKind::SingleStep {
        return Planned::Failed(Exit::Violation, body);
    }
    Planned::Ready(Box::new(cp), plan, body)
}

/// Plans without executing.
pub fn cmd_plan(cfg: &ExperimentConfig) -> Result<Outcome, CommandError> {
    let (pot, prof) = setup(cfg)?;
    let mut out = Output::new(cfg, "plan");
    let prof = match prof {
        Ok(p) => p,
        Err(e) => return out.finish(Exit::Violation, json!({ "error": e })),
    };
    match prepare(cfg, pot.as_ref(), &prof, &mut out) {
        Planned::Failed(exit, body) => out.finish(exit, body),
        Planned::Ready(_, _, body) => {
            let exit = if body["admissible"] == json!(true) { Exit::Success } else { Exit::Violation };
            out.finish(exit, body)
        }
    }
}

/// Plans and executes the load path.
pub fn cmd_continue(cfg: &ExperimentConfig) -> Result<Outcome, CommandError> {
    let (pot, prof) = setup(cfg)?;
    let mut out = Output::new(cfg, "continue");
    let prof = match prof {
        Ok(p) => p,
        Err(e) => return out.finish(Exit::Violation, json!({ "error": e })),
    };
    let pot = pot.as_ref();
    let (cp, plan, mut body) = match prepare(cfg, pot, &prof, &mut out) {
        Planned::Failed(exit, body) => return out.finish(exit, body),
        Planned::Ready(cp, plan, body) => (cp, plan, body),
    };
    let mesh = cfg.mesh(prof.a0)?;
    let solver = QcSolver::new(pot, &mesh, SolverSettings::for_profile(&prof));
    let run = match run_plan(&solver, &cp, &plan) {
        Ok(run) => run,
        Err(e) => {
            let step = match &e {
                ContinuationError::Fracture { q, .. }
                | ContinuationError::InnerFailure { q, .. }
                | ContinuationError::Hypotheses { q, .. } => Some(*q),
                _ => None,
            };
            body["error"] = json!(e.to_string());
            body["failed_step"] = json!(step);
            return out.finish(exit_for(&e), body);
        }
    };
    for (q, trace) in run.traces.iter().enumerate() {
        out.csv(format!("trace_q{}.csv", q + 1), trace.to_csv());
    }
    let last = run.final_record();
    body["work"] = json!(run.work());
    body["final_error"] = json!(last.error);
    body["final_residual"] = json!(last.residual);
    body["dominated"] = json!(run.records.iter().all(|r| r.error <= r.gamma));
    body["steps"] = json!(run
        .records
        .iter()
        .map(|r| json!({ "q": r.q, "s": r.s, "P": r.iters, "gamma": r.gamma, "error": r.error, "residual": r.residual }))
        .collect::<Vec<_>>());
    if cfg.planner == PlannerKind::Uniform {
        match path_error(&run, &plan, &cp, PATH_ERROR_SAMPLES) {
            Ok(e) => body["path_error"] = json!(e),
            Err(e) => return out.finish(exit_for(&e), body),
        }
    }
    out.finish(Exit::Success, body)
}

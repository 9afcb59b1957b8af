//! Greedy endpoint plan to full load, executed with per-step certificates.
use qclab::continuation::{plan_endpoint, run_plan, staircase, ChainProfile, LoadPath};
use qclab::mesh::QcMesh;
use qclab::potential::{compute_profile, LennardJones};
use qclab::solver::{QcSolver, SolverSettings};

fn main() {
    let lj = LennardJones;
    let prof = compute_profile(&lj).unwrap();
    let cp = ChainProfile::new(&lj, &prof, LoadPath::default(), 8.0 / 9.0).unwrap();
    let plan = plan_endpoint(1e-6, 0.0, &cp).unwrap();
    println!("{} steps, work {}, final bound {:.2e}", plan.steps(), plan.work(), plan.final_gamma());

    let mesh = QcMesh::symmetric(7, 7, 3, prof.a0).unwrap();
    let solver = QcSolver::new(&lj, &mesh, SolverSettings::for_profile(&prof));
    let run = run_plan(&solver, &cp, &plan).unwrap();
    print!("{}", run.to_csv());

    let stairs = staircase(&run, &plan, &cp, 8).unwrap();
    let tightest = stairs.iter().map(|p| p.error / p.delta).fold(0.0, f64::max);
    println!("largest predictor error / window radius: {tightest:.4}");
}

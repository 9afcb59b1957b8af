//! Equal load steps from worst-case constants, and the path error they give.
use qclab::continuation::{path_error, plan_uniform, run_plan, ChainProfile, LoadPath};
use qclab::mesh::QcMesh;
use qclab::potential::{compute_profile, LennardJones};
use qclab::solver::{QcSolver, SolverSettings};

fn main() {
    let lj = LennardJones;
    let prof = compute_profile(&lj).unwrap();
    let cp = ChainProfile::new(&lj, &prof, LoadPath::new(2.5, &prof).unwrap(), 8.0 / 9.0).unwrap();
    let c = cp.uniform_constants().unwrap();
    println!("k = {:.4}, k2 = {:.4}, delta = {:.4e}", c.k, c.k2, c.delta);
    let mesh = QcMesh::symmetric(7, 7, 3, prof.a0).unwrap();
    let solver = QcSolver::new(&lj, &mesh, SolverSettings::for_profile(&prof));
    for eps in [1e-3, 1e-4, 1e-5] {
        let up = plan_uniform(eps, &c).unwrap();
        let plan = up.to_load_plan(0.0, &cp);
        let run = run_plan(&solver, &cp, &plan).unwrap();
        let err = path_error(&run, &plan, &cp, 4000).unwrap();
        println!(
            "eps {eps:.0e}: Q = {}, P = {}, work = {}, {}-limited, path error {err:.3e}",
            up.q,
            up.p,
            up.predicted_work,
            if up.interpolation_limited { "interpolation" } else { "window" }
        );
    }
}

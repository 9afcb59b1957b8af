//! Full load in one step: the iteration leaves the contraction window and a
//! bond at the interface breaks.
use qclab::mesh::QcMesh;
use qclab::potential::{compute_profile, LennardJones};
use qclab::qc::uniform_load;
use qclab::solver::{QcSolver, SolverSettings, StopRule, TraceStatus};

fn main() {
    let lj = LennardJones;
    let prof = compute_profile(&lj).unwrap();
    let mesh = QcMesh::symmetric(7, 7, 3, prof.a0).unwrap();
    let solver = QcSolver::new(&lj, &mesh, SolverSettings::for_profile(&prof));
    for load in [0.5, 2.0, 2.76] {
        let trace =
            solver.solve_at_load(&mesh.uniform_spacings(prof.a0), &uniform_load(&mesh, load), StopRule::tolerance(1e-10), None);
        match trace.status {
            TraceStatus::Fracture { step, element, spacing, .. } => {
                println!("load {load}: fracture in step {step}, element {element} stretched to {spacing:.3}")
            }
            ref s => println!("load {load}: {} after {} steps, residual {:.2e}", s.label(), trace.iterations(), trace.final_residual()),
        }
    }
}

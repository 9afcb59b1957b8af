//! Fully resolved atomistic chain under end tension against the QCF solve.
use qclab::chain::{atomistic_solve, tension_load, AtomChain, AtomisticSolveOptions};
use qclab::continuation::uniform_response;
use qclab::mesh::QcMesh;
use qclab::potential::{compute_profile, LennardJones};
use qclab::qc::uniform_load;
use qclab::solver::{distance, QcSolver, SolverSettings, StopRule};

fn main() {
    let lj = LennardJones;
    let prof = compute_profile(&lj).unwrap();
    let (m, load) = (7, 2.0);
    let start = AtomChain::uniform(m, prof.a0).with_dead_loads(tension_load(m, load)).unwrap();
    let atoms = atomistic_solve(&lj, &start, &AtomisticSolveOptions::default()).unwrap();
    let exact = uniform_response(&lj, &prof, load).unwrap();

    let mesh = QcMesh::symmetric(m, m, 3, prof.a0).unwrap();
    let solver = QcSolver::new(&lj, &mesh, SolverSettings::for_profile(&prof));
    let trace = solver.solve_at_load(&mesh.uniform_spacings(prof.a0), &uniform_load(&mesh, load), StopRule::tolerance(1e-12), None);

    println!("uniform response r = {exact:.12}");
    println!("{:>4} {:>16} {:>16}", "j", "atomistic", "QCF");
    for (j, (a, q)) in atoms.spacings().iter().zip(trace.final_spacings()).enumerate() {
        println!("{:>4} {a:>16.12} {q:>16.12}", j as i64 - m as i64);
    }
    println!("max |QCF - r| = {:.2e}", distance(trace.final_spacings(), &vec![exact; 2 * m + 1]));
}

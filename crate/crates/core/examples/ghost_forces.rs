//! Ghost forces of the energy-based coupling at the reference lattice, and
//! their absence in the force-based one.
use qclab::mesh::QcMesh;
use qclab::potential::{compute_profile, LennardJones, PairPotential};
use qclab::qc::QcModel;

fn main() {
    let lj = LennardJones;
    let prof = compute_profile(&lj).unwrap();
    let mesh = QcMesh::symmetric(7, 7, 3, prof.a0).unwrap();
    let model = QcModel::new(&lj, &mesh);
    let r = mesh.uniform_spacings(prof.a0);
    let (qce, qcf) = (model.qce_forces(&r), model.qcf_forces(&r));
    println!("{:>4} {:>12} {:>12}", "j", "QCE", "QCF");
    for j in mesh.elements() {
        let s = mesh.slot(j);
        println!("{j:>4} {:>12.3e} {:>12.3e}", qce[s], qcf[s]);
    }
    println!("1/2 phi'(2 a0) = {:.6e}", 0.5 * lj.d1(2.0 * prof.a0));
}

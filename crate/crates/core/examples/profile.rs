//! Landmarks and load limit of the Lennard-Jones chain.
use qclab::potential::{compute_profile, verify_assumptions, LennardJones};

fn main() {
    let lj = LennardJones;
    let prof = compute_profile(&lj).expect("Lennard-Jones landmarks");
    println!("a0       = {:.10}", prof.a0);
    println!("r~1      = {:.10}", prof.r_tilde_1);
    println!("r~2      = {:.10}", prof.r_tilde_2);
    println!("D~       = {:.10}", prof.d_tilde);
    println!("r*       = {:.10}", prof.r_star);
    println!("Phi_max  = {:.10}", prof.phi_max);
    for c in verify_assumptions(&lj, &prof).checks {
        println!("{:<5} {}", if c.passed { "ok" } else { "FAIL" }, c.assumption.describe());
    }
}

//! Turning an equal-step plan into the greedy one without changing the work.
use qclab::continuation::{
    is_admissible, maximize_steps, normalize, plan_endpoint, plan_uniform, ChainProfile, LoadPath,
};
use qclab::potential::{compute_profile, LennardJones};

fn main() {
    let lj = LennardJones;
    let prof = compute_profile(&lj).unwrap();
    let cp = ChainProfile::new(&lj, &prof, LoadPath::new(2.5, &prof).unwrap(), 8.0 / 9.0).unwrap();
    let eps = 1e-3;
    let seed = plan_uniform(eps, &cp.uniform_constants().unwrap()).unwrap().to_load_plan(0.0, &cp);
    let maximal = maximize_steps(&seed, &cp);
    let norm = normalize(&seed, &cp).unwrap();
    let greedy = plan_endpoint(eps, 0.0, &cp).unwrap();
    for (name, p) in [("uniform", &seed), ("maximized", &maximal), ("normalized", &norm), ("greedy", &greedy)] {
        println!(
            "{name:<11} Q = {:>3}  work = {:>4}  gamma_Q = {:.3e}  admissible = {}",
            p.steps(),
            p.work(),
            p.final_gamma(),
            is_admissible(p, eps, &cp).is_ok()
        );
    }
}

//! Randomized check of the contraction rate inside certified windows.
use qclab::continuation::{ChainProfile, LoadPath};
use qclab::experiment::ExperimentConfig;
use qclab::potential::{compute_profile, LennardJones};
use qclab::qc::uniform_load;
use qclab::solver::{check_hypotheses, sample_contraction, ContractionWindow, QcSolver, SolverSettings};

fn main() {
    let cfg = ExperimentConfig::default();
    let lj = LennardJones;
    let prof = compute_profile(&lj).unwrap();
    let mesh = cfg.mesh(prof.a0).unwrap();
    let solver = QcSolver::new(&lj, &mesh, SolverSettings::for_profile(&prof));
    for alpha in [0.125, 0.25, 0.5, 8.0 / 9.0] {
        let cp = ChainProfile::new(&lj, &prof, LoadPath { scale: cfg.scale }, alpha).unwrap();
        for s in [0.0, 0.5, 0.9] {
            let Ok(delta) = cp.radius(s) else {
                println!("alpha {alpha:.3} s {s}: no window");
                continue;
            };
            let w = ContractionWindow::centred(&lj, cp.r(s).unwrap(), delta).unwrap();
            let loads = uniform_load(&mesh, cp.path().load(s));
            if check_hypotheses(&lj, &prof, &w, &loads).is_err() {
                println!("alpha {alpha:.3} s {s}: hypotheses fail");
                continue;
            }
            let samples = sample_contraction(&solver, &w, &loads, 50, cfg.seed).unwrap();
            let worst = samples.iter().map(|p| p.ratio).fold(0.0, f64::max);
            println!("alpha {alpha:.3} s {s}: window width {:.2e}, worst ratio {worst:.4}", w.r_u - w.r_l);
        }
    }
}

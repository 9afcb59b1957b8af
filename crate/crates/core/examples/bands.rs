//! Contraction bands around the loading response, one CSV per alpha on stdout.
use qclab::continuation::LoadPath;
use qclab::experiment::{contraction_band, BAND_ALPHAS, BAND_POINTS};
use qclab::potential::{compute_profile, LennardJones};

fn main() {
    let lj = LennardJones;
    let prof = compute_profile(&lj).unwrap();
    let path = LoadPath::default();
    for (a, b) in BAND_ALPHAS {
        let band = contraction_band(&lj, &prof, &path, a as f64 / b as f64, BAND_POINTS);
        let end = band.terminus.map_or("none".to_string(), |t| format!("{t:.6}"));
        println!("# alpha = {a}/{b}: {} rows, window closes at s = {end}", band.rows.len());
        print!("{}", band.to_csv());
    }
}

//! Euler-Maruyama against the splitting scheme at small σ in the Taylor-Green
//! flow. Euler breaks the closed streamlines and overestimates K.

use effdiff::{run_simulation, Ensemble, ExperimentConfig};

fn main() -> effdiff::Result<()> {
    let ensemble = Ensemble::default();
    let split = ExperimentConfig::new("taylor-green", 0.01, 0.1, 5000.0, 100, 3);
    let ks = run_simulation(&split, &ensemble)?.estimate.entry(0, 0);
    println!("splitting dt = 0.1      K11 = {ks:.3e}");
    for k in 0..=4 {
        let dt = 0.1 / f64::from(1 << k);
        let cfg = ExperimentConfig::new("taylor-green", 0.01, dt, 5000.0, 100, 3).euler();
        let ke = run_simulation(&cfg, &ensemble)?.estimate.entry(0, 0);
        println!("Euler     dt = {dt:<7.5} K11 = {ke:.3e}  ({:.1}x)", ke / ks);
    }
    Ok(())
}

//! Inertial particles in the shear flow, with the exact noise increment
//! coefficients of the scheme.

use effdiff::integrators::noise_coefficients;
use effdiff::{run_simulation, Ensemble, ExperimentConfig};

fn main() -> effdiff::Result<()> {
    let c = noise_coefficients(1.0, 0.25, 0.1, 2)?;
    println!("alpha = {:.6} beta = {:.6} delta_g = {:.6}", c.alpha, c.beta, c.delta_g);

    let ensemble = Ensemble::default();
    for sigma in [0.2, 0.5, 1.0] {
        let cfg = ExperimentConfig::new("shear", sigma, 0.01, 500.0, 200, 6).inertial(1.0);
        let est = run_simulation(&cfg, &ensemble)?.estimate;
        println!("tau = 1 sigma = {sigma:<4} K22 = {:.3} ± {:.3}", est.entry(1, 1), est.entry_stderr(1, 1));
    }
    Ok(())
}

//! Passive tracers in the shear flow `v = (0, sin x₁)` against the closed form
//! `K = diag(σ²/2, σ²/2 + 1/σ²)`.

use effdiff::oracles::shear_diffusivity_analytic;
use effdiff::{run_simulation, Ensemble, ExperimentConfig};

fn main() -> effdiff::Result<()> {
    let ensemble = Ensemble::default();
    for sigma in [0.5, 1.0, 2.0] {
        let cfg = ExperimentConfig::new("shear", sigma, 0.01, 200.0, 400, 1);
        let est = run_simulation(&cfg, &ensemble)?.estimate;
        let exact = shear_diffusivity_analytic(sigma)?.k;
        println!(
            "sigma = {sigma:<4} K22 = {:.3} ± {:.3}   exact {:.3}",
            est.entry(1, 1),
            est.entry_stderr(1, 1),
            exact[(1, 1)]
        );
    }
    Ok(())
}

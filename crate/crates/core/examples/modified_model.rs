//! The small-inertia model `dx = (v − τ(∇v)v) dt + √τ dW` next to the full
//! inertial model and plain passive tracers at σ = √τ.

use effdiff::estimators::DiffusivityEstimate;
use effdiff::{run_simulation, Ensemble, ExperimentConfig};

fn k(e: &DiffusivityEstimate) -> f64 {
    0.5 * (e.entry(0, 0) + e.entry(1, 1))
}

fn main() -> effdiff::Result<()> {
    let ensemble = Ensemble::default();
    for tau in [0.05, 0.1] {
        let sigma = f64::sqrt(tau);
        let modified = ExperimentConfig::new("taylor-green", sigma, 0.01, 500.0, 200, 8).modified(tau);
        let inertial = ExperimentConfig::new("taylor-green", sigma, 0.005, 500.0, 200, 8).inertial(tau);
        let passive = ExperimentConfig::new("taylor-green", sigma, 0.01, 500.0, 200, 8);
        let [m, i, p] = [modified, inertial, passive].map(|c| run_simulation(&c, &ensemble).map(|r| k(&r.estimate)));
        println!("tau = {tau:<5} modified {:.4} inertial {:.4} passive {:.4}", m?, i?, p?);
    }
    Ok(())
}

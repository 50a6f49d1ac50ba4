//! Tracers driven by Ornstein-Uhlenbeck noise. As the correlation time
//! shrinks K approaches the white-noise value.

use effdiff::{run_simulation, Ensemble, ExperimentConfig};

fn main() -> effdiff::Result<()> {
    let ensemble = Ensemble::default();
    let white = ExperimentConfig::new("taylor-green", 0.5, 0.01, 100.0, 4000, 7);
    let kw = run_simulation(&white, &ensemble)?.estimate.entry(0, 0);
    println!("white          K11 = {kw:.4}");
    for delta in [0.02, 0.1, 1.0, 5.0] {
        let cfg = ExperimentConfig::new("taylor-green", 0.5, 0.01, 100.0, 4000, 7).colored(delta);
        let k = run_simulation(&cfg, &ensemble)?.estimate.entry(0, 0);
        println!("delta = {delta:<6} K11 = {k:.4}");
    }
    Ok(())
}

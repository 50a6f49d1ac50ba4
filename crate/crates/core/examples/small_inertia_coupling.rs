//! Inertial particles converge to passive tracers as τ → 0 at rate √τ when
//! both are driven by the same noise.

use effdiff::{run_coupling, Ensemble, ExperimentConfig};

fn main() -> effdiff::Result<()> {
    let taus = [1e-6, 1e-5, 1e-4];
    for field in ["shear", "taylor-green"] {
        let cfg = ExperimentConfig::new(field, 1.0, 1e-3, 1.0, 200, 5);
        let report = run_coupling(&cfg, &taus, &Ensemble::default())?;
        println!("{field}: errors {:.4?} slope {:.3}", report.errors, report.slope());
    }
    Ok(())
}

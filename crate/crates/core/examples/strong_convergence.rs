//! Strong error of the splitting scheme on shared Brownian paths.

use effdiff::{run_convergence, Ensemble, ExperimentConfig};

fn main() -> effdiff::Result<()> {
    let cfg = ExperimentConfig::new("taylor-green", 1.0, 0.0625, 1.0, 200, 4);
    let dts: Vec<f64> = (4..=8).map(|k| 2f64.powi(-k)).collect();
    let report = run_convergence(&cfg, &dts, &Ensemble::default())?;
    for (dt, e) in report.dts.iter().zip(&report.errors) {
        println!("dt = {dt:<10} error = {e:.3e}");
    }
    println!("slope = {:.3}", report.slope());
    Ok(())
}

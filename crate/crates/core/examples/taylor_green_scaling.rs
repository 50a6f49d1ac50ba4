//! Effective diffusivity of the Taylor-Green cellular flow for decreasing
//! molecular diffusion. K grows like σ rather than σ².

use effdiff::{run_sweep, Ensemble, ExperimentConfig, SweepSpec};

fn main() -> effdiff::Result<()> {
    let base = ExperimentConfig::new("taylor-green", 0.1, 0.01, 2000.0, 100, 2);
    let spec = SweepSpec::new(base, "sigma", vec![0.1, 0.2, 0.4, 0.8]);
    let report = run_sweep(&spec, &Ensemble::default())?;
    for (s, r) in report.values.iter().zip(&report.points) {
        let t = r.diffusive_time.map_or("-".to_string(), |t| format!("{t:.1}"));
        println!("sigma = {s:<4} K11 = {:.4}  t_diff = {t}", r.estimate.entry(0, 0));
    }
    if let Some(f) = report.fit_k11 {
        println!("K11 ~ {:.3} sigma^{:.3}", f.prefactor, f.exponent);
    }
    Ok(())
}

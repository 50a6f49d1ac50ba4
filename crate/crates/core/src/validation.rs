//! A quick self-check of the integrators against the closed-form oracles,
//! run by `effdiff validate`.

use std::f64::consts::TAU;

use crate::config::{ExperimentConfig, InitialCondition};
use crate::ensemble::Ensemble;
use crate::error::Result;
use crate::fields::make_taylor_green;
use crate::integrators::noise_coefficients;
use crate::matrix::Matrix;
use crate::noise::{Channel, NoiseStream, StreamKey};
use crate::oracles::{free_diffusivity, shear_diffusivity_analytic, splitting_jacobian_determinant};
use crate::runner::{run_convergence, run_simulation};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

/// Runs every check; an error means a check could not be run at all.
pub fn run_validation(ensemble: &Ensemble) -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let shear = shear_diffusivity_analytic(1.0)?.k;
    out.push(Check::new(
        "shear closed form",
        shear == Matrix::diagonal(&[0.5, 1.5]),
        format!("K = {:?}", shear.rows()),
    ));
    let free = free_diffusivity(2.0)?.k;
    out.push(Check::new("free closed form", free == Matrix::identity(2).scale(2.0), format!("K = {:?}", free.rows())));

    let tg = make_taylor_green();
    let mut s = NoiseStream::new(StreamKey::new(0, 0, Channel::Init));
    let mut worst = 0.0f64;
    for dt in [0.1, 0.01] {
        for _ in 0..100 {
            let x = [s.uniform(0.0, TAU), s.uniform(0.0, TAU)];
            worst = worst.max((splitting_jacobian_determinant(&tg, &x, dt) - 1.0).abs());
        }
    }
    out.push(Check::new("volume preservation", worst <= 1e-8, format!("max |det - 1| = {worst:e}")));

    let c = noise_coefficients(1.0, 0.25, 0.1, 2)?;
    let tau_limit = noise_coefficients(1.0, 1e-8, 0.1, 2)?;
    out.push(Check::new(
        "inertial noise coefficients",
        (tau_limit.delta_g - 0.1f64.sqrt()).abs() < 1e-3 && c.beta > 0.0 && c.alpha > 0.0 && c.delta_g > 0.0,
        format!("alpha = {:.6}, beta = {:.6}, delta_g = {:.6}", c.alpha, c.beta, c.delta_g),
    ));

    let free_run = ExperimentConfig::new("zero", 1.0, 0.1, 10.0, 4000, 1).with_initial(InitialCondition::Origin);
    let est = run_simulation(&free_run, ensemble)?.estimate;
    let ok = (0..2).all(|i| (est.entry(i, i) - 0.5).abs() <= 3.0 * est.entry_stderr(i, i));
    out.push(Check::new(
        "free diffusion ensemble",
        ok,
        format!(
            "K11 = {:.4} ± {:.4}, K22 = {:.4} ± {:.4}",
            est.entry(0, 0),
            est.entry_stderr(0, 0),
            est.entry(1, 1),
            est.entry_stderr(1, 1)
        ),
    ));

    let shear_run = ExperimentConfig::new("shear", 1.0, 0.01, 200.0, 500, 2);
    let est = run_simulation(&shear_run, ensemble)?.estimate;
    let tol = (3.0 * est.entry_stderr(1, 1)).max(0.05 * 1.5);
    out.push(Check::new(
        "shear ensemble",
        (est.entry(1, 1) - 1.5).abs() <= tol,
        format!("K22 = {:.4} ± {:.4}, expected 1.5", est.entry(1, 1), est.entry_stderr(1, 1)),
    ));

    let conv = ExperimentConfig::new("taylor-green", 1.0, 0.0625, 1.0, 100, 3);
    let dts: Vec<f64> = (4..=7).map(|k| 2f64.powi(-k)).collect();
    let slope = run_convergence(&conv, &dts, ensemble)?.slope();
    out.push(Check::new("strong order", (0.85..=1.15).contains(&slope), format!("slope = {slope:.3}")));

    Ok(out)
}

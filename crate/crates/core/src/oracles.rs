//! Independent references for tests and validation runs: closed-form
//! diffusivities, a finite-difference Jacobian, fine-grid reference paths
//! and a weak check of the Euler scheme's modified equation.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::estimators::{mean_observable_series, ObservableSeries, PathSnapshots};
use crate::fields::SplittableField;
use crate::integrators::{
    deterministic_flow, euler_step_passive, modified_equation_coefficients, modified_tracers_step,
    splitting_step_passive, splitting_step_passive_increment,
};
use crate::matrix::Matrix;
use crate::noise::{BrownianPath, Channel, NoiseStream, StreamKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusivitySource {
    ShearPassive,
    FreeDiffusion,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticDiffusivity {
    pub k: Matrix,
    pub source: DiffusivitySource,
}

/// Passive tracers in the shear flow: `diag(σ²/2, σ²/2 + 1/σ²)`.
pub fn shear_diffusivity_analytic(sigma: f64) -> Result<AnalyticDiffusivity> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("shear diffusivity diverges as sigma -> 0, got {sigma}"),
        });
    }
    let s2 = sigma * sigma;
    Ok(AnalyticDiffusivity {
        k: Matrix::diagonal(&[s2 / 2.0, s2 / 2.0 + 1.0 / s2]),
        source: DiffusivitySource::ShearPassive,
    })
}

/// `v ≡ 0`: `(σ²/2) I` in two dimensions.
pub fn free_diffusivity(sigma: f64) -> Result<AnalyticDiffusivity> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter { name: "sigma", reason: format!("must be non-negative, got {sigma}") });
    }
    Ok(AnalyticDiffusivity {
        k: Matrix::identity(2).scale(sigma * sigma / 2.0),
        source: DiffusivitySource::FreeDiffusion,
    })
}

const FD_STEP: f64 = 1e-6;

/// Determinant of the central-difference Jacobian of `x ↦ map(x, dt)`.
///
/// The perturbation is rounded to a representable offset so that the
/// identity map yields exactly 1.
pub fn jacobian_determinant(map: impl Fn(&mut [f64], f64), x: &[f64], dt: f64) -> f64 {
    let n = x.len();
    let mut jac = Matrix::zeros(n);
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    for k in 0..n {
        let h = (x[k] + FD_STEP) - x[k];
        plus.copy_from_slice(x);
        minus.copy_from_slice(x);
        plus[k] = x[k] + h;
        minus[k] = x[k] - h;
        let width = plus[k] - minus[k];
        map(&mut plus, dt);
        map(&mut minus, dt);
        for i in 0..n {
            jac[(i, k)] = (plus[i] - minus[i]) / width;
        }
    }
    jac.determinant()
}

/// Jacobian determinant of the deterministic splitting composition.
pub fn splitting_jacobian_determinant(field: &SplittableField, x: &[f64], dt: f64) -> f64 {
    jacobian_determinant(|z, t| deterministic_flow(field, z, t), x, dt)
}

/// Jacobian determinant of the deterministic Euler map `x + v(x) dt`.
pub fn euler_jacobian_determinant(field: &SplittableField, x: &[f64], dt: f64) -> f64 {
    let zero = vec![0.0; x.len()];
    jacobian_determinant(|z, t| euler_step_passive(field, z, t, 0.0, &zero), x, dt)
}

/// Dynamics integrated along a prescribed Brownian path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathModel {
    /// `dx = v dt + σ dW`
    Passive { sigma: f64 },
    /// `dx = (v − τ(∇v)v) dt + √τ dW`
    Modified { tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathScheme {
    Splitting,
    Euler,
}

/// Integrates `model` with `scheme` along the increments of `path`, recording
/// the position after every `save_every` steps (flat, `dim` per record).
pub fn integrate_on_path(
    field: &SplittableField,
    model: PathModel,
    scheme: PathScheme,
    x0: &[f64],
    path: &BrownianPath,
    save_every: usize,
) -> Result<Vec<f64>> {
    let dim = field.dim();
    if x0.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x0.len() });
    }
    if path.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: path.dim() });
    }
    if save_every == 0 || path.n_steps() % save_every != 0 {
        return Err(Error::MismatchedGrid(format!("{} steps cannot be saved every {save_every}", path.n_steps())));
    }
    let dt = path.dt();
    let inv_sqrt_dt = 1.0 / dt.sqrt();
    let mut x = x0.to_vec();
    let mut gamma = vec![0.0; dim];
    let mut out = Vec::with_capacity(path.n_steps() / save_every * dim);
    for k in 0..path.n_steps() {
        let dw = path.increment(k);
        match (model, scheme) {
            (PathModel::Passive { sigma }, PathScheme::Splitting) => {
                splitting_step_passive_increment(field, &mut x, dt, sigma, dw)
            }
            (PathModel::Passive { sigma }, PathScheme::Euler) => {
                gamma.iter_mut().zip(dw).for_each(|(g, w)| *g = w * inv_sqrt_dt);
                euler_step_passive(field, &mut x, dt, sigma, &gamma)
            }
            (PathModel::Modified { tau }, PathScheme::Splitting) => {
                gamma.iter_mut().zip(dw).for_each(|(g, w)| *g = w * inv_sqrt_dt);
                modified_tracers_step(field, &mut x, dt, tau, &gamma)
            }
            (PathModel::Modified { .. }, PathScheme::Euler) => {
                return Err(Error::InvalidParameter {
                    name: "integrator",
                    reason: "the modified model is only integrated by splitting".into(),
                })
            }
        }
        if (k + 1) % save_every == 0 {
            out.extend_from_slice(&x);
        }
    }
    Ok(out)
}

/// Splitting solution on a fine Brownian path, used as the exact solution
/// in strong convergence studies.
pub fn reference_trajectory(
    field: &SplittableField,
    model: PathModel,
    x0: &[f64],
    fine: &BrownianPath,
    save_every: usize,
) -> Result<Vec<f64>> {
    integrate_on_path(field, model, PathScheme::Splitting, x0, fine, save_every)
}

/// Ensemble settings for [`modified_equation_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct CheckSettings {
    pub n_paths: usize,
    pub horizon: f64,
    pub n_snapshots: usize,
    pub seed: u64,
    pub x0: Vec<f64>,
    /// Steps of the fine integrator per coarse step.
    pub refinement: usize,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self { n_paths: 1000, horizon: 100.0, n_snapshots: 50, seed: 0, x0: vec![FRAC_PI_2; 2], refinement: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModifiedEquationReport {
    pub euler: ObservableSeries,
    pub modified: ObservableSeries,
    pub splitting: ObservableSeries,
    /// Decay rate of the coarse Euler mean over that of the modified SDE.
    pub rate_ratio: Option<f64>,
}

impl ModifiedEquationReport {
    pub fn euler_rate(&self) -> Option<f64> {
        self.euler.decay.map(|d| d.rate)
    }

    pub fn modified_rate(&self) -> Option<f64> {
        self.modified.decay.map(|d| d.rate)
    }

    pub fn splitting_rate(&self) -> Option<f64> {
        self.splitting.decay.map(|d| d.rate)
    }
}

#[derive(Clone, Copy)]
enum CheckScheme {
    Euler,
    Splitting,
    ModifiedFine,
}

/// Mean stream function under coarse Euler, under a fine Euler solution of
/// the Euler scheme's modified SDE, and under coarse splitting.
pub fn modified_equation_check(
    field: &SplittableField,
    sigma: f64,
    dt_coarse: f64,
    settings: &CheckSettings,
    ensemble: &Ensemble,
) -> Result<ModifiedEquationReport> {
    if !field.has_stream_function() {
        return Err(Error::NoStreamFunction(field.name().to_string()));
    }
    if !(dt_coarse > 0.0) || settings.refinement == 0 || settings.n_snapshots == 0 {
        return Err(Error::InvalidParameter { name: "dt", reason: "need a positive step and refinement".into() });
    }
    let n_coarse = (settings.horizon / dt_coarse).round() as usize;
    let save_every = (n_coarse / settings.n_snapshots).max(1);
    let n_saved = n_coarse / save_every;
    let times: Vec<f64> = (1..=n_saved).map(|k| (k * save_every) as f64 * dt_coarse).collect();

    let run = |scheme: CheckScheme| -> Result<ObservableSeries> {
        let positions = ensemble.map(settings.n_paths, |p| {
            simulate_check_path(field, sigma, dt_coarse, settings, scheme, p, n_saved, save_every)
        })?;
        let snaps = PathSnapshots {
            times: times.clone(),
            dim: field.dim(),
            initial: vec![settings.x0.clone(); settings.n_paths],
            positions,
        };
        mean_observable_series(&snaps, field)
    };
    let euler = run(CheckScheme::Euler)?;
    let modified = run(CheckScheme::ModifiedFine)?;
    let splitting = run(CheckScheme::Splitting)?;
    let rate_ratio = match (euler.decay, modified.decay) {
        (Some(a), Some(b)) if b.rate != 0.0 => Some(a.rate / b.rate),
        _ => None,
    };
    Ok(ModifiedEquationReport { euler, modified, splitting, rate_ratio })
}

#[allow(clippy::too_many_arguments)]
fn simulate_check_path(
    field: &SplittableField,
    sigma: f64,
    dt: f64,
    settings: &CheckSettings,
    scheme: CheckScheme,
    path: u64,
    n_saved: usize,
    save_every: usize,
) -> Result<Vec<f64>> {
    let dim = field.dim();
    let channel = match scheme {
        CheckScheme::ModifiedFine => Channel::Xi,
        _ => Channel::Gamma,
    };
    let mut noise = NoiseStream::new(StreamKey::new(settings.seed, path, channel));
    let mut x = settings.x0.clone();
    let mut gamma = vec![0.0; dim];
    let mut out = Vec::with_capacity(n_saved * dim);
    let h = dt / settings.refinement as f64;
    let sqrt_h = h.sqrt();
    for k in 1..=n_saved * save_every {
        match scheme {
            CheckScheme::Euler => {
                noise.fill_gaussian(&mut gamma);
                euler_step_passive(field, &mut x, dt, sigma, &gamma);
            }
            CheckScheme::Splitting => {
                noise.fill_gaussian(&mut gamma);
                splitting_step_passive(field, &mut x, dt, sigma, &gamma);
            }
            CheckScheme::ModifiedFine => {
                for _ in 0..settings.refinement {
                    noise.fill_gaussian(&mut gamma);
                    let (drift, diffusion) = modified_equation_coefficients(field, &x, dt, sigma)?;
                    let kick = diffusion.mul_vec(&gamma);
                    for i in 0..dim {
                        x[i] += drift[i] * h + kick[i] * sqrt_h;
                    }
                }
            }
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState { path, time: k as f64 * dt });
        }
        if k % save_every == 0 {
            out.extend_from_slice(&x);
        }
    }
    Ok(out)
}

//! One-step maps for the passive, inertial, coloured-noise and modified
//! tracer models, in splitting and Euler–Maruyama variants.
//!
//! All steppers work in place on unwrapped coordinates and take their
//! Gaussian draws as arguments, so a caller owns the random streams.
//! Sub-flows are applied in declaration order of the field's terms.

use rand::Rng;
use rand_distr::StandardNormal;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::fields::{dot, SplitTerm, SplittableField};
use crate::matrix::Matrix;

type Scratch = SmallVec<[f64; 4]>;

#[derive(Debug, Clone, PartialEq)]
pub struct TracerState {
    pub x: Vec<f64>,
}

/// Inertial particle state. `y = √τ ẋ` is the scaled momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct InertialState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl InertialState {
    pub fn at_rest(x: Vec<f64>) -> Self {
        let y = vec![0.0; x.len()];
        Self { x, y }
    }

    pub fn velocity(&self, tau: f64) -> Vec<f64> {
        let s = tau.sqrt();
        self.y.iter().map(|y| y / s).collect()
    }
}

/// Tracer driven by the OU process `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoredState {
    pub x: Vec<f64>,
    pub eta: Vec<f64>,
}

#[inline]
fn one_minus_exp_neg(u: f64) -> f64 {
    -(-u).exp_m1()
}

/// `u − 2(1 − e^{−u}) + (1 − e^{−2u})/2`, the normalised variance of
/// `∫₀ᵗ (1 − e^{−(t−s)/c}) dW_s` with `u = t/c`. Series for small `u`,
/// where the closed form cancels catastrophically.
fn integrated_ou_variance(u: f64) -> f64 {
    if u < 1e-3 {
        let u3 = u * u * u;
        u3 * (1.0 / 3.0 - u / 4.0 + 7.0 * u * u / 60.0 - u * u * u / 24.0)
    } else {
        u - 2.0 * one_minus_exp_neg(u) + 0.5 * one_minus_exp_neg(2.0 * u)
    }
}

// ---------------------------------------------------------------------------
// Passive tracers
// ---------------------------------------------------------------------------

/// Exact flow of a single sub-field: `x + t d v(<e, x>)`. Conserves `<e, x>`.
#[inline]
pub fn phi_j_step(term: &SplitTerm, x: &mut [f64], t: f64) {
    let a = t * term.amplitude(x);
    for (xi, d) in x.iter_mut().zip(term.d()) {
        *xi += d * a;
    }
}

/// Volume-preserving composition `φ_n ∘ … ∘ φ_1`.
#[inline]
pub fn deterministic_flow(field: &SplittableField, x: &mut [f64], t: f64) {
    for term in field.terms() {
        phi_j_step(term, x, t);
    }
}

/// One step of the stochastic splitting map `ψ(x, Δt, γ) = φ(x, Δt) + σ√Δt γ`.
#[inline]
pub fn splitting_step_passive(field: &SplittableField, x: &mut [f64], dt: f64, sigma: f64, gamma: &[f64]) {
    deterministic_flow(field, x, dt);
    let s = sigma * dt.sqrt();
    for (xi, g) in x.iter_mut().zip(gamma) {
        *xi += s * g;
    }
}

/// Splitting step driven by a Brownian increment `ΔW` instead of `γ`.
#[inline]
pub fn splitting_step_passive_increment(field: &SplittableField, x: &mut [f64], dt: f64, sigma: f64, dw: &[f64]) {
    deterministic_flow(field, x, dt);
    for (xi, w) in x.iter_mut().zip(dw) {
        *xi += sigma * w;
    }
}

/// Euler–Maruyama step `x + v(x) Δt + σ√Δt γ`.
#[inline]
pub fn euler_step_passive(field: &SplittableField, x: &mut [f64], dt: f64, sigma: f64, gamma: &[f64]) {
    let mut v: Scratch = SmallVec::from_elem(0.0, x.len());
    field.velocity_into(x, &mut v);
    let s = sigma * dt.sqrt();
    for ((xi, vi), g) in x.iter_mut().zip(&v).zip(gamma) {
        *xi += vi * dt + s * g;
    }
}

#[inline]
fn add_convective_correction(field: &SplittableField, x: &mut [f64], scale: f64) {
    // (∇v)v at x, accumulated term by term: Σ_j d_j v_j'(<e_j,x>) <e_j, v(x)>
    let dim = x.len();
    let mut v: Scratch = SmallVec::from_elem(0.0, dim);
    field.velocity_into(x, &mut v);
    let mut c: Scratch = SmallVec::from_elem(0.0, dim);
    for term in field.terms() {
        let w = term.profile().derivative(term.phase(x)) * dot(term.e(), &v);
        for (ci, d) in c.iter_mut().zip(term.d()) {
            *ci += d * w;
        }
    }
    for (xi, ci) in x.iter_mut().zip(&c) {
        *xi += scale * ci;
    }
}

/// Splitting step for `ẋ = v − τ(∇v)v + √τ Ẇ`: the sub-flows, then the
/// explicit correction `−τ(∇v)v Δt` evaluated after the composition, then
/// the noise `√τ √Δt γ`.
#[inline]
pub fn modified_tracers_step(field: &SplittableField, x: &mut [f64], dt: f64, tau: f64, gamma: &[f64]) {
    deterministic_flow(field, x, dt);
    if tau != 0.0 {
        add_convective_correction(field, x, -tau * dt);
    }
    let s = (tau * dt).sqrt();
    for (xi, g) in x.iter_mut().zip(gamma) {
        *xi += s * g;
    }
}

/// Drift and diffusion of the weak modified equation of the Euler scheme
/// for `ẋ = v + σẆ`:
/// drift `v − (Δt/2)(∇v)v − (σ²Δt/4)Δv`, diffusion `σ(I − (Δt/2)∇vᵀ)`.
pub fn modified_equation_coefficients(
    field: &SplittableField,
    x: &[f64],
    dt: f64,
    sigma: f64,
) -> Result<(Vec<f64>, Matrix)> {
    let v = field.eval_velocity(x)?;
    let grad = field.eval_gradient(x)?;
    let conv = grad.mul_vec(&v);
    let lap = field.eval_laplacian(x)?;
    let drift = (0..v.len()).map(|i| v[i] - 0.5 * dt * conv[i] - 0.25 * sigma * sigma * dt * lap[i]).collect();
    let mut diffusion = Matrix::identity(v.len());
    let gt = grad.transpose();
    for i in 0..v.len() {
        for k in 0..v.len() {
            diffusion[(i, k)] = sigma * (diffusion[(i, k)] - 0.5 * dt * gt[(i, k)]);
        }
    }
    Ok((drift, diffusion))
}

// ---------------------------------------------------------------------------
// Inertial particles
// ---------------------------------------------------------------------------

/// Coefficients of the exact noise increment `g = (αξ + δ_g γ, βξ)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct NoiseCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub delta_g: f64,
}

impl NoiseCoefficients {
    /// Variance of the position increment, `α² + δ_g²`.
    pub fn position_variance(&self) -> f64 {
        self.alpha * self.alpha + self.delta_g * self.delta_g
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: format!("must be positive and finite, got {v}") })
    }
}

fn check_nonnegative(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: format!("must be non-negative and finite, got {v}") })
    }
}

/// Solves for `(β, α, δ_g)` in that order from the second moments of the
/// OU sub-step with time scale `(n+1)τ`.
pub fn noise_coefficients(sigma: f64, tau: f64, dt: f64, n: usize) -> Result<NoiseCoefficients> {
    check_nonnegative("sigma", sigma)?;
    check_positive("tau", tau)?;
    check_positive("dt", dt)?;
    if n == 0 {
        return Err(Error::InvalidParameter { name: "n", reason: "need at least one split term".into() });
    }
    let m = (n + 1) as f64;
    let c = m * tau;
    let u = dt / c;
    let s2 = sigma * sigma;

    let beta_sq = 0.5 * m * s2 * one_minus_exp_neg(2.0 * u);
    let beta_alpha = 0.5 * s2 * tau.sqrt() * m * one_minus_exp_neg(u).powi(2);
    let total = s2 * c * integrated_ou_variance(u);

    let beta = beta_sq.sqrt();
    let alpha = if beta > 0.0 { beta_alpha / beta } else { 0.0 };
    let mut radicand = total - alpha * alpha;
    if radicand < 0.0 {
        if radicand < -1e-14 {
            return Err(Error::NegativeRadicand(radicand));
        }
        radicand = 0.0;
    }
    let delta_g = radicand.sqrt();
    for (name, v) in [("alpha", alpha), ("beta", beta), ("delta_g", delta_g)] {
        if !v.is_finite() {
            return Err(Error::NonFiniteCoefficient(name));
        }
    }
    Ok(NoiseCoefficients { alpha, beta, delta_g })
}

/// Exact deterministic part of the OU sub-step:
/// `(x + √τ(1 − e^{−t/((n+1)τ)}) y, y e^{−t/((n+1)τ)})`.
pub fn lambda_map(x: &mut [f64], y: &mut [f64], t: f64, tau: f64, n: usize) {
    let u = t / ((n + 1) as f64 * tau);
    let decay = (-u).exp();
    let shift = tau.sqrt() * one_minus_exp_neg(u);
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        *xi += shift * *yi;
        *yi *= decay;
    }
}

/// Constants shared by every sub-step of one inertial splitting step.
#[derive(Debug, Clone, Copy)]
struct SubStep {
    decay: f64,
    /// `√τ (1 − decay)`, the displacement per unit `y` of the free motion.
    shift: f64,
    /// `(n+1)τ (1 − decay)`.
    relax: f64,
    /// `(n+1)√τ (1 − decay)`.
    kick: f64,
    half_t: f64,
}

impl SubStep {
    fn new(t: f64, tau: f64, n: usize) -> Self {
        let m = (n + 1) as f64;
        let u = t / (m * tau);
        let om = one_minus_exp_neg(u);
        Self {
            decay: (-u).exp(),
            shift: tau.sqrt() * om,
            relax: m * tau * om,
            kick: m * tau.sqrt() * om,
            half_t: 0.5 * t,
        }
    }

    /// `φ̃_j = λ + μ_j`, the quadrature approximation of the exact sub-flow of
    /// `(n+1)τ ẍ = d v(<e,x>) − ẋ`.
    ///
    /// The forcing is evaluated along the free motion of `<e, x>` (it is
    /// unaffected by the forcing itself because `<d, e> = 0`): the exponential
    /// convolution by a left-point rule, the plain integral by the trapezoid
    /// rule. Position gains `h_j − (n+1)τ(1 − e^{−t/((n+1)τ)}) d v(<e,x>)`.
    #[inline]
    fn apply(&self, term: &SplitTerm, x: &mut [f64], y: &mut [f64]) {
        let phase = term.phase(x);
        let a0 = term.profile().value(phase);
        let a1 = term.profile().value(phase + self.shift * dot(term.e(), y));
        let pos = self.half_t * (a0 + a1) - self.relax * a0;
        let mom = self.kick * a0;
        for ((xi, yi), d) in x.iter_mut().zip(y.iter_mut()).zip(term.d()) {
            *xi += self.shift * *yi + pos * d;
            *yi = *yi * self.decay + mom * d;
        }
    }

    #[inline]
    fn free(&self, x: &mut [f64], y: &mut [f64]) {
        for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
            *xi += self.shift * *yi;
            *yi *= self.decay;
        }
    }
}

/// One sub-flow `φ̃_j(x, y, t)` of the inertial splitting, in place.
pub fn tilde_phi_j_step(term: &SplitTerm, x: &mut [f64], y: &mut [f64], t: f64, tau: f64, n: usize) {
    SubStep::new(t, tau, n).apply(term, x, y);
}

/// Precomputed inertial splitting map `ψ̂ = λ ∘ φ̃_n ∘ … ∘ φ̃_1 + g`.
///
/// Stable for any `Δt/τ`: every factor is either a contraction in `y` or a
/// bounded forcing.
#[derive(Debug, Clone, Copy)]
pub struct InertialSplitting {
    sub: SubStep,
    coeffs: NoiseCoefficients,
}

impl InertialSplitting {
    pub fn new(field: &SplittableField, dt: f64, sigma: f64, tau: f64) -> Result<Self> {
        let n = field.n_terms().max(1);
        let coeffs = noise_coefficients(sigma, tau, dt, n)?;
        Ok(Self { sub: SubStep::new(dt, tau, n), coeffs })
    }

    pub fn coefficients(&self) -> NoiseCoefficients {
        self.coeffs
    }

    #[inline]
    pub fn step(&self, field: &SplittableField, x: &mut [f64], y: &mut [f64], xi: &[f64], gamma: &[f64]) {
        for term in field.terms() {
            self.sub.apply(term, x, y);
        }
        self.sub.free(x, y);
        let NoiseCoefficients { alpha, beta, delta_g } = self.coeffs;
        for i in 0..x.len() {
            x[i] += alpha * xi[i] + delta_g * gamma[i];
            y[i] += beta * xi[i];
        }
    }
}

/// One inertial splitting step. Builds the step constants on every call; use
/// [`InertialSplitting`] inside loops.
#[allow(clippy::too_many_arguments)]
pub fn splitting_step_inertial(
    field: &SplittableField,
    state: &mut InertialState,
    dt: f64,
    sigma: f64,
    tau: f64,
    xi: &[f64],
    gamma: &[f64],
) -> Result<()> {
    InertialSplitting::new(field, dt, sigma, tau)?.step(field, &mut state.x, &mut state.y, xi, gamma);
    Ok(())
}

/// Euler–Maruyama for `τẍ = v − ẋ + σẆ`, integrated in the physical velocity
/// `u = y/√τ`. Unstable once `Δt > 2τ`.
#[inline]
pub fn euler_step_inertial(
    field: &SplittableField,
    state: &mut InertialState,
    dt: f64,
    sigma: f64,
    tau: f64,
    xi: &[f64],
) {
    euler_inertial_in_place(field, &mut state.x, &mut state.y, dt, sigma, tau, xi);
}

#[inline]
pub(crate) fn euler_inertial_in_place(
    field: &SplittableField,
    x: &mut [f64],
    y: &mut [f64],
    dt: f64,
    sigma: f64,
    tau: f64,
    xi: &[f64],
) {
    let st = tau.sqrt();
    let mut v: Scratch = SmallVec::from_elem(0.0, x.len());
    field.velocity_into(x, &mut v);
    let noise = sigma / tau * dt.sqrt();
    for i in 0..x.len() {
        let u = y[i] / st;
        x[i] += u * dt;
        let u_next = u + (v[i] - u) * (dt / tau) + noise * xi[i];
        y[i] = st * u_next;
    }
}

// ---------------------------------------------------------------------------
// Coloured noise
// ---------------------------------------------------------------------------

/// Exact joint law of `(η(t+h), ∫_t^{t+h} η ds)` for
/// `η̇ = −η/δ_c + Ẇ/√δ_c`, given `η(t)`.
///
/// The integral is sampled from the first normal, so for `δ_c → 0` the
/// tracer increment `(σ/√δ_c) ∫η` tends to `σ√h z_int`, the white-noise
/// increment driven by the same draw.
#[derive(Debug, Clone, Copy)]
pub struct OuSampler {
    decay: f64,
    /// `E[∫η] = η · mean_int`
    mean_int: f64,
    l11: f64,
    l21: f64,
    l22: f64,
}

impl OuSampler {
    pub fn new(corr_time: f64, dt: f64) -> Result<Self> {
        check_positive("corr_time", corr_time)?;
        check_positive("dt", dt)?;
        let u = dt / corr_time;
        let om = one_minus_exp_neg(u);
        let var_int = corr_time * corr_time * integrated_ou_variance(u);
        let var_eta = 0.5 * one_minus_exp_neg(2.0 * u);
        let cov = 0.5 * corr_time * om * om;
        let l11 = var_int.sqrt();
        let l21 = if l11 > 0.0 { cov / l11 } else { 0.0 };
        let l22 = (var_eta - l21 * l21).max(0.0).sqrt();
        Ok(Self { decay: (-u).exp(), mean_int: corr_time * om, l11, l21, l22 })
    }

    /// Mean, variance of `η(t+h)`, variance of the integral and their covariance.
    pub fn moments(&self) -> (f64, f64, f64, f64) {
        (self.decay, self.l21 * self.l21 + self.l22 * self.l22, self.l11 * self.l11, self.l11 * self.l21)
    }

    #[inline]
    pub fn sample(&self, eta: f64, z_int: f64, z_eta: f64) -> (f64, f64) {
        let integral = eta * self.mean_int + self.l11 * z_int;
        let eta_next = eta * self.decay + self.l21 * z_int + self.l22 * z_eta;
        (eta_next, integral)
    }
}

/// Draws `(η(t+dt), ∫ η)` exactly, consuming two standard normals from `rng`.
pub fn ou_joint_sample<R: Rng + ?Sized>(corr_time: f64, dt: f64, eta: f64, rng: &mut R) -> Result<(f64, f64)> {
    let sampler = OuSampler::new(corr_time, dt)?;
    let z_int: f64 = rng.sample(StandardNormal);
    let z_eta: f64 = rng.sample(StandardNormal);
    Ok(sampler.sample(eta, z_int, z_eta))
}

/// Splitting for `ẋ = v + σ η/√δ_c`: the passive sub-flows followed by the
/// exactly sampled OU contribution.
#[derive(Debug, Clone, Copy)]
pub struct ColoredSplitting {
    sampler: OuSampler,
    gain: f64,
}

impl ColoredSplitting {
    pub fn new(dt: f64, sigma: f64, corr_time: f64) -> Result<Self> {
        check_nonnegative("sigma", sigma)?;
        Ok(Self { sampler: OuSampler::new(corr_time, dt)?, gain: sigma / corr_time.sqrt() })
    }

    #[inline]
    pub fn step(&self, field: &SplittableField, dt: f64, x: &mut [f64], eta: &mut [f64], z_int: &[f64], z_eta: &[f64]) {
        deterministic_flow(field, x, dt);
        for i in 0..x.len() {
            let (next, integral) = self.sampler.sample(eta[i], z_int[i], z_eta[i]);
            x[i] += self.gain * integral;
            eta[i] = next;
        }
    }
}

/// One coloured-noise splitting step drawing its normals from `rng`.
pub fn splitting_step_colored<R: Rng + ?Sized>(
    field: &SplittableField,
    state: &mut ColoredState,
    dt: f64,
    sigma: f64,
    corr_time: f64,
    rng: &mut R,
) -> Result<()> {
    let stepper = ColoredSplitting::new(dt, sigma, corr_time)?;
    let dim = state.x.len();
    let z_int: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let z_eta: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    stepper.step(field, dt, &mut state.x, &mut state.eta, &z_int, &z_eta);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{make_shear, make_taylor_green, make_zero};
    use crate::noise::{Channel, NoiseStream, StreamKey};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    const TG_COEFFS: (f64, f64, f64) = (
        // (β, α, δ_g) at σ=1, τ=0.25, Δt=0.1, n=2 from 40-digit evaluation of the closed forms
        0.592_543_240_998_517_3,
        0.019_722_231_898_843_95,
        0.012_160_807_810_591_50,
    );

    #[test]
    fn phi_j_examples() {
        let tg = make_taylor_green();
        let mut x = [0.0, FRAC_PI_2];
        phi_j_step(&tg.terms()[0], &mut x, 0.1);
        assert!((x[0] + 0.05).abs() < 1e-15 && (x[1] - (FRAC_PI_2 + 0.05)).abs() < 1e-15);

        let mut x = [0.3, 0.7];
        phi_j_step(&tg.terms()[1], &mut x, 0.0);
        assert_eq!(x, [0.3, 0.7]);

        // stagnation line of term 1: <e1, x> = 0
        let mut x = [0.4, -0.4];
        phi_j_step(&tg.terms()[0], &mut x, 0.3);
        assert_eq!(x, [0.4, -0.4]);
    }

    #[test]
    fn phi_j_conserves_phase() {
        let tg = make_taylor_green();
        for term in tg.terms() {
            let mut x = [1.234, -0.567];
            let before = term.phase(&x);
            phi_j_step(term, &mut x, 0.37);
            assert!((term.phase(&x) - before).abs() < 1e-15);
        }
    }

    #[test]
    fn passive_splitting_examples() {
        let tg = make_taylor_green();
        let mut x = [FRAC_PI_2, FRAC_PI_2];
        splitting_step_passive(&tg, &mut x, 0.7, 0.0, &[5.0, 5.0]);
        assert!((x[0] - FRAC_PI_2).abs() < 1e-15 && (x[1] - FRAC_PI_2).abs() < 1e-15);

        let mut a = [0.3, 0.7];
        splitting_step_passive(&tg, &mut a, 0.01, 0.0, &[0.0, 0.0]);
        let mut b = [0.3, 0.7];
        phi_j_step(&tg.terms()[0], &mut b, 0.01);
        phi_j_step(&tg.terms()[1], &mut b, 0.01);
        assert_eq!(a, b);

        let zero = make_zero(2);
        let mut x = [1.0, 2.0];
        splitting_step_passive(&zero, &mut x, 0.04, 1.0, &[1.0, 0.0]);
        assert!((x[0] - 1.2).abs() < 1e-15 && x[1] == 2.0);
        let mut e = [1.0, 2.0];
        euler_step_passive(&zero, &mut e, 0.04, 1.0, &[1.0, 0.0]);
        assert_eq!(x, e);
    }

    #[test]
    fn euler_versus_splitting_differ_at_second_order() {
        let tg = make_taylor_green();
        let v0 = tg.eval_velocity(&[0.3, 0.7]).unwrap();
        let mut prev = f64::NAN;
        for dt in [1e-2, 5e-3, 2.5e-3] {
            let mut a = [0.3, 0.7];
            euler_step_passive(&tg, &mut a, dt, 0.0, &[0.0, 0.0]);
            assert!((a[0] - (0.3 + v0[0] * dt)).abs() < 1e-15);
            let mut b = [0.3, 0.7];
            splitting_step_passive(&tg, &mut b, dt, 0.0, &[0.0, 0.0]);
            let diff = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            assert!(diff > 0.0);
            if prev.is_finite() {
                // halving dt quarters the gap
                assert!((prev / diff - 4.0).abs() < 0.1, "ratio {}", prev / diff);
            }
            prev = diff;
        }
        let mut z = [0.3, 0.7];
        euler_step_passive(&tg, &mut z, 0.0, 1.0, &[1.0, 1.0]);
        assert_eq!(z, [0.3, 0.7]);
    }

    #[test]
    fn noise_coefficients_match_high_precision_values() {
        let c = noise_coefficients(1.0, 0.25, 0.1, 2).unwrap();
        assert!((c.beta - TG_COEFFS.0).abs() < 1e-13);
        assert!((c.alpha - TG_COEFFS.1).abs() < 1e-13);
        assert!((c.delta_g - TG_COEFFS.2).abs() < 1e-13);
        assert_eq!(
            noise_coefficients(0.0, 0.25, 0.1, 2).unwrap(),
            NoiseCoefficients { alpha: 0.0, beta: 0.0, delta_g: 0.0 }
        );
    }

    #[test]
    fn noise_coefficients_limits() {
        let c = noise_coefficients(1.0, 1e-8, 0.1, 2).unwrap();
        assert!((c.delta_g - 0.1f64.sqrt()).abs() < 1e-3);
        assert!(c.alpha < 1e-3);
        // large τ: series branch, everything finite and tiny
        let c = noise_coefficients(1.0, 1e8, 0.01, 2).unwrap();
        assert!(c.alpha.is_finite() && c.delta_g.is_finite() && c.beta.is_finite());
        assert!(c.position_variance() < 1e-20);
        assert!(noise_coefficients(1.0, 0.0, 0.1, 2).is_err());
        assert!(noise_coefficients(-1.0, 1.0, 0.1, 2).is_err());
    }

    #[test]
    fn series_matches_closed_form_near_switch() {
        for u in [5e-4, 9.99e-4, 1e-3, 1.001e-3, 2e-3] {
            let closed = u - 2.0 * one_minus_exp_neg(u) + 0.5 * one_minus_exp_neg(2.0 * u);
            let series = {
                let u3 = u * u * u;
                u3 * (1.0 / 3.0 - u / 4.0 + 7.0 * u * u / 60.0 - u * u * u / 24.0)
            };
            assert!((closed - series).abs() / series < 1e-6, "u = {u}");
        }
    }

    #[test]
    fn lambda_examples() {
        let mut x = [1.0, 2.0];
        let mut y = [0.5, -0.5];
        lambda_map(&mut x, &mut y, 0.0, 0.3, 2);
        assert_eq!((x, y), ([1.0, 2.0], [0.5, -0.5]));

        let mut x = [1.0, 2.0];
        let mut y = [0.0, 0.0];
        lambda_map(&mut x, &mut y, 3.0, 0.3, 2);
        assert_eq!((x, y), ([1.0, 2.0], [0.0, 0.0]));

        let mut x = [1.0, 2.0];
        let mut y = [0.5, -0.5];
        lambda_map(&mut x, &mut y, 1e6, 0.25, 2);
        assert!((x[0] - 1.25).abs() < 1e-12 && (x[1] - 1.75).abs() < 1e-12);
        assert_eq!(y, [0.0, 0.0]);
    }

    /// Exact sub-flow `ẋ = y/((n+1)√τ)`, `ẏ = d v(<e,x>)/√τ − y/((n+1)τ)` by RK4.
    fn reference_subflow(term: &SplitTerm, x: [f64; 2], y: [f64; 2], t: f64, tau: f64, n: usize) -> [f64; 4] {
        let m = (n + 1) as f64;
        let st = tau.sqrt();
        let rhs = |z: [f64; 4]| {
            let a = term.amplitude(&z[..2]);
            [
                z[2] / (m * st),
                z[3] / (m * st),
                term.d()[0] * a / st - z[2] / (m * tau),
                term.d()[1] * a / st - z[3] / (m * tau),
            ]
        };
        let steps = 10_000;
        let h = t / steps as f64;
        let mut z = [x[0], x[1], y[0], y[1]];
        let axpy =
            |z: [f64; 4], k: [f64; 4], s: f64| [z[0] + s * k[0], z[1] + s * k[1], z[2] + s * k[2], z[3] + s * k[3]];
        for _ in 0..steps {
            let k1 = rhs(z);
            let k2 = rhs(axpy(z, k1, h / 2.0));
            let k3 = rhs(axpy(z, k2, h / 2.0));
            let k4 = rhs(axpy(z, k3, h));
            for i in 0..4 {
                z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        z
    }

    #[test]
    fn tilde_phi_is_second_order_accurate_per_step() {
        let tg = make_taylor_green();
        for tau in [1.0, 0.1, 0.01] {
            for term in tg.terms() {
                let mut errs = Vec::new();
                for t in [1e-2, 1e-3] {
                    let x0 = [0.3, 0.7];
                    let y0 = [0.8, -0.4];
                    let r = reference_subflow(term, x0, y0, t, tau, 2);
                    let mut x = x0;
                    let mut y = y0;
                    tilde_phi_j_step(term, &mut x, &mut y, t, tau, 2);
                    let err = [x[0] - r[0], x[1] - r[1], y[0] - r[2], y[1] - r[3]]
                        .iter()
                        .map(|e| e.abs())
                        .fold(0.0, f64::max);
                    assert!(err <= 10.0 * t * t, "tau {tau} t {t}: err {err:e}");
                    errs.push(err);
                }
                assert!(errs[0] / errs[1] > 30.0, "tau {tau}: not second order {errs:?}");
            }
        }
    }

    #[test]
    fn tilde_phi_trivial_cases() {
        let tg = make_taylor_green();
        let mut x = [0.3, 0.7];
        let mut y = [0.8, -0.4];
        tilde_phi_j_step(&tg.terms()[0], &mut x, &mut y, 0.0, 0.5, 2);
        assert_eq!((x, y), ([0.3, 0.7], [0.8, -0.4]));
        let mut x = [0.4, -0.4];
        let mut y = [0.0, 0.0];
        tilde_phi_j_step(&tg.terms()[0], &mut x, &mut y, 0.2, 0.5, 2);
        assert_eq!((x, y), ([0.4, -0.4], [0.0, 0.0]));
    }

    #[test]
    fn inertial_equilibrium_is_fixed() {
        let tg = make_taylor_green();
        let mut s = InertialState::at_rest(vec![FRAC_PI_2, FRAC_PI_2]);
        for _ in 0..100 {
            splitting_step_inertial(&tg, &mut s, 0.05, 0.0, 0.3, &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        }
        assert!((s.x[0] - FRAC_PI_2).abs() < 1e-14 && (s.x[1] - FRAC_PI_2).abs() < 1e-14);
        assert!(s.y.iter().all(|y| y.abs() < 1e-14));

        let mut e = InertialState::at_rest(vec![FRAC_PI_2, FRAC_PI_2]);
        euler_step_inertial(&tg, &mut e, 0.05, 0.0, 0.3, &[1.0, 1.0]);
        assert!(e.y.iter().all(|y| y.abs() < 1e-15));
        assert!((e.x[0] - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn inertial_free_motion_has_exact_position_variance() {
        // v ≡ 0 with y = 0: one step of x-increment is αξ + δ_g γ exactly
        let zero = make_zero(2);
        let (sigma, tau, dt) = (1.0, 0.25, 0.1);
        let stepper = InertialSplitting::new(&zero, dt, sigma, tau).unwrap();
        let c = stepper.coefficients();
        let mut g = NoiseStream::new(StreamKey::new(1, 0, Channel::Gamma));
        let mut k = NoiseStream::new(StreamKey::new(1, 0, Channel::Xi));
        let n = 100_000;
        let mut sum2 = 0.0;
        let mut xs = [0.0; 2];
        let mut gs = [0.0; 2];
        for _ in 0..n {
            let mut x = [0.0, 0.0];
            let mut y = [0.0, 0.0];
            k.fill_gaussian(&mut xs);
            g.fill_gaussian(&mut gs);
            stepper.step(&zero, &mut x, &mut y, &xs, &gs);
            sum2 += x[0] * x[0];
        }
        let var = sum2 / n as f64;
        assert!((var / c.position_variance() - 1.0).abs() < 0.02, "{var} vs {}", c.position_variance());
    }

    #[test]
    fn inertial_recovers_passive_for_tiny_tau() {
        let tg = make_taylor_green();
        let (dt, sigma, tau) = (1e-2, 1.0, 1e-6);
        let stepper = InertialSplitting::new(&tg, dt, sigma, tau).unwrap();
        let mut x = [0.3, 0.7];
        let mut y = [0.0, 0.0];
        let mut p = [0.3, 0.7];
        let mut g = NoiseStream::new(StreamKey::new(2, 0, Channel::Gamma));
        let mut k = NoiseStream::new(StreamKey::new(2, 0, Channel::Xi));
        let (mut gs, mut xs) = ([0.0; 2], [0.0; 2]);
        for _ in 0..10 {
            g.fill_gaussian(&mut gs);
            k.fill_gaussian(&mut xs);
            stepper.step(&tg, &mut x, &mut y, &xs, &gs);
            splitting_step_passive(&tg, &mut p, dt, sigma, &gs);
        }
        let err = ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt();
        assert!(err < 10.0 * tau.sqrt() / dt, "err {err}");
    }

    #[test]
    fn inertial_splitting_is_stable_for_extreme_tau() {
        let tg = make_taylor_green();
        for tau in [1e-8, 1e8] {
            let stepper = InertialSplitting::new(&tg, 0.01, 1.0, tau).unwrap();
            let mut x = [0.3, 0.7];
            let mut y = [0.5, -0.5];
            let mut g = NoiseStream::new(StreamKey::new(3, 0, Channel::Gamma));
            let (mut gs, mut xs) = ([0.0; 2], [0.0; 2]);
            for _ in 0..10_000 {
                g.fill_gaussian(&mut gs);
                g.fill_gaussian(&mut xs);
                stepper.step(&tg, &mut x, &mut y, &xs, &gs);
            }
            assert!(x.iter().chain(&y).all(|v| v.is_finite()), "tau {tau}");
            assert!(y.iter().all(|v| v.abs() < 100.0));
        }
    }

    #[test]
    fn euler_inertial_examples() {
        let zero = make_zero(2);
        // τ = 1, σ = 1: u' = u + (0 − u)dt + √dt ξ
        let mut s = InertialState { x: vec![0.0, 0.0], y: vec![0.5, -1.0] };
        euler_step_inertial(&zero, &mut s, 0.1, 1.0, 1.0, &[0.3, 0.0]);
        assert!((s.y[0] - (0.5 * 0.9 + 0.1f64.sqrt() * 0.3)).abs() < 1e-15);
        assert!((s.x[0] - 0.05).abs() < 1e-15);

        // dt = 4τ amplifies |u| by |1 − dt/τ| = 3
        let tau: f64 = 0.01;
        let mut s = InertialState { x: vec![0.0, 0.0], y: vec![tau.sqrt() * 2.0, 0.0] };
        euler_step_inertial(&zero, &mut s, 4.0 * tau, 0.0, tau, &[0.0, 0.0]);
        let u = s.velocity(tau);
        assert!((u[0] + 6.0).abs() < 1e-12);

        let mut s = InertialState { x: vec![0.0, 0.0], y: vec![tau.sqrt(), 0.0] };
        for _ in 0..50 {
            euler_step_inertial(&zero, &mut s, 3.0 * tau, 0.0, tau, &[0.0, 0.0]);
        }
        assert!(s.velocity(tau)[0].abs() > 1e10);
    }

    #[test]
    fn ou_sampler_moments_match_closed_forms() {
        let s = OuSampler::new(1.0, 1.0).unwrap();
        let (decay, var_eta, var_int, cov) = s.moments();
        let e = (-1.0f64).exp();
        assert!((decay - e).abs() < 1e-15);
        assert!((var_eta - 0.5 * (1.0 - e * e)).abs() < 1e-15);
        assert!((var_int - (1.0 - 2.0 * (1.0 - e) + 0.5 * (1.0 - e * e))).abs() < 1e-15);
        assert!((cov - 0.5 * (1.0 - e).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn ou_sample_statistics() {
        let mut rng = NoiseStream::new(StreamKey::new(4, 0, Channel::Eta));
        let n = 1_000_000;
        let mut s2 = 0.0;
        for _ in 0..n {
            let (e, _) = ou_joint_sample(1.0, 1.0, 0.0, &mut rng).unwrap();
            s2 += e * e;
        }
        let target = 0.5 * (1.0 - (-2.0f64).exp());
        assert!((s2 / n as f64 / target - 1.0).abs() < 0.01);

        let (dc, dt, eta0) = (0.5, 0.25, 1.3);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let (e, _) = ou_joint_sample(dc, dt, eta0, &mut rng).unwrap();
            sum += e;
            sum2 += e * e;
        }
        let mean = sum / n as f64;
        let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - eta0 * (-dt / dc).exp()).abs() < 3.0 * se);
    }

    #[test]
    fn ou_sample_agrees_with_fine_euler() {
        // cross-check the covariance of (η', ∫η) against a fine Euler simulation
        let (dc, h) = (1.0, 1.0);
        let sampler = OuSampler::new(dc, h).unwrap();
        let (_, var_eta, var_int, cov) = sampler.moments();
        let mut rng = NoiseStream::new(StreamKey::new(6, 0, Channel::Eta));
        let (paths, steps) = (20_000, 400);
        let ds = h / steps as f64;
        let (mut see, mut sii, mut sei) = (0.0, 0.0, 0.0);
        for _ in 0..paths {
            let mut eta = 0.0;
            let mut int = 0.0;
            for _ in 0..steps {
                let next = eta - eta / dc * ds + (ds / dc).sqrt() * rng.normal();
                int += 0.5 * (eta + next) * ds;
                eta = next;
            }
            see += eta * eta;
            sii += int * int;
            sei += eta * int;
        }
        let p = paths as f64;
        assert!((see / p / var_eta - 1.0).abs() < 0.04);
        assert!((sii / p / var_int - 1.0).abs() < 0.05);
        assert!((sei / p / cov - 1.0).abs() < 0.06);
    }

    #[test]
    fn ou_small_step_is_continuous() {
        let s = OuSampler::new(0.7, 1e-12).unwrap();
        let (e, i) = s.sample(0.9, 1.0, -1.0);
        assert!((e - 0.9).abs() < 1e-5 && i.abs() < 1e-5);
    }

    #[test]
    fn colored_examples() {
        let tg = make_taylor_green();
        let mut rng = NoiseStream::new(StreamKey::new(5, 0, Channel::Eta));
        let mut s = ColoredState { x: vec![0.3, 0.7], eta: vec![0.0, 0.0] };
        let mut p = [0.3, 0.7];
        splitting_step_colored(&tg, &mut s, 0.01, 0.0, 0.1, &mut rng).unwrap();
        deterministic_flow(&tg, &mut p, 0.01);
        assert_eq!(s.x, p.to_vec());

        let mut s = ColoredState { x: vec![FRAC_PI_2, FRAC_PI_2], eta: vec![0.0, 0.0] };
        splitting_step_colored(&tg, &mut s, 0.01, 0.0, 0.1, &mut rng).unwrap();
        assert!((s.x[0] - FRAC_PI_2).abs() < 1e-15 && (s.x[1] - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn colored_tends_to_white_with_same_draw() {
        let zero = make_zero(2);
        let (dt, sigma) = (0.01, 0.7);
        let stepper = ColoredSplitting::new(dt, sigma, 1e-9).unwrap();
        let mut x = [0.0, 0.0];
        let mut eta = [0.0, 0.0];
        stepper.step(&zero, dt, &mut x, &mut eta, &[1.0, -2.0], &[0.5, 0.5]);
        assert!((x[0] - sigma * dt.sqrt()).abs() < 1e-4);
        assert!((x[1] + 2.0 * sigma * dt.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn modified_step_examples() {
        let tg = make_taylor_green();
        let g = [0.4, -1.1];
        let mut a = [0.3, 0.7];
        modified_tracers_step(&tg, &mut a, 0.05, 0.0, &g);
        let mut b = [0.3, 0.7];
        splitting_step_passive(&tg, &mut b, 0.05, 0.0, &g);
        assert_eq!(a, b);

        let sh = make_shear();
        let tau = 0.04;
        let mut a = [0.3, 0.7];
        modified_tracers_step(&sh, &mut a, 0.05, tau, &g);
        let mut b = [0.3, 0.7];
        splitting_step_passive(&sh, &mut b, 0.05, tau.sqrt(), &g);
        assert!((a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15);

        // correction at (π/4, π/4) is −τ (1/2)(1, 1) dt, added after the composition
        let dt = 0.02;
        let mut a = [FRAC_PI_4, FRAC_PI_4];
        modified_tracers_step(&tg, &mut a, dt, 0.1, &[0.0, 0.0]);
        let mut x1 = [FRAC_PI_4, FRAC_PI_4];
        deterministic_flow(&tg, &mut x1, dt);
        let c = tg.convective_term(&x1).unwrap();
        assert!((a[0] - (x1[0] - 0.1 * dt * c[0])).abs() < 1e-15);
        assert!((a[1] - (x1[1] - 0.1 * dt * c[1])).abs() < 1e-15);
        let c0 = tg.convective_term(&[FRAC_PI_4, FRAC_PI_4]).unwrap();
        assert!((-0.1 * c0[0] - -0.05).abs() < 1e-15 && (-0.1 * c0[1] - -0.05).abs() < 1e-15);
    }

    #[test]
    fn modified_equation_coefficient_examples() {
        let tg = make_taylor_green();
        let x = [0.3, 0.7];
        let (d, m) = modified_equation_coefficients(&tg, &x, 0.0, 0.6).unwrap();
        assert_eq!(d, tg.eval_velocity(&x).unwrap());
        assert_eq!(m, Matrix::identity(2).scale(0.6));

        let (dt, sigma) = (0.1, 0.5);
        let (d, _) = modified_equation_coefficients(&tg, &x, dt, sigma).unwrap();
        let v = tg.eval_velocity(&x).unwrap();
        let c = tg.convective_term(&x).unwrap();
        for i in 0..2 {
            let expect = v[i] - 0.5 * dt * c[i] + 0.5 * sigma * sigma * dt * v[i];
            assert!((d[i] - expect).abs() < 1e-14);
        }
        let sh = make_shear();
        let (d, _) = modified_equation_coefficients(&sh, &x, dt, sigma).unwrap();
        let v = sh.eval_velocity(&x).unwrap();
        assert!((d[1] - (v[1] + 0.25 * sigma * sigma * dt * v[1])).abs() < 1e-14);
        assert_eq!(d[0], 0.0);
    }
}
